#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "levelline/boundary.hpp"
#include "levelline/sde.hpp"

namespace levelline {

/// Rectangular lattice embedded in the upper half plane with the bottom edge
/// on the real axis. Bottom vertices left of a are free (reflecting); bottom
/// vertices right of a are pinned to the alternating arc values; top and
/// side vertices are pinned to 0.
struct LatticeSpec {
    int width = 0;    // cells in x
    int height = 0;   // cells in y
    double mesh = 0.0;
    double x0 = 0.0;  // x of vertex column 0; bottom row sits at y = 0
    BoundaryConfig boundary;

    double x(int i) const { return x0 + i * mesh; }
    double y(int j) const { return j * mesh; }
    int vertex_id(int i, int j) const { return j * (width + 1) + i; }

    void validate() const;

    /// Geometry for a square cells x cells grid at the resolution floor of
    /// 16 cells per marked-point gap, with [a, b_n] centered horizontally.
    /// Throws when the grid cannot cover the marked points at that mesh.
    static LatticeSpec from_config(const BoundaryConfig& config, int cells);
};

struct FieldSample {
    int nx = 0, ny = 0;  // vertex counts per side
    std::vector<double> values;
    double at(int i, int j) const { return values[j * nx + i]; }
};

/// Factored mixed-boundary lattice Gaussian: builds the graph Laplacian with
/// reflecting stencil on the free arc, eliminates pinned rows, and reuses
/// the Cholesky factor across samples.
class DgffSampler {
  public:
    explicit DgffSampler(const LatticeSpec& spec);
    ~DgffSampler();
    DgffSampler(DgffSampler&&) noexcept;

    const LatticeSpec& spec() const;
    int free_count() const;

    /// Discrete harmonic extension of the boundary data (all vertices).
    const std::vector<double>& mean_field() const;

    /// mean + zero-mean Gaussian with covariance = inverse reduced Laplacian.
    FieldSample sample(uint64_t seed) const;

    /// Vertex ids of the unpinned slots, in elimination order.
    const std::vector<int>& free_ids() const;

    /// Dense inverse of the reduced precision operator (small grids only).
    std::vector<double> dense_covariance(int max_free = 400) const;

    /// Reduced precision operator as dense row-major (small grids only).
    std::vector<double> dense_precision(int max_free = 400) const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct LevelLineResult {
    Outcome outcome = Outcome::Censored;
    int point_index = 0;
    double landing_x = 0.0;
    std::string censor_reason;
    std::vector<std::pair<double, double>> polyline;
};

/// Follows the zero level set of the bilinearly interpolated field from the
/// boundary sign change at b_k until it returns to the bottom edge.
/// Deterministic: saddles are resolved by a fixed left-hand rule.
LevelLineResult trace_level_line(const FieldSample& sample, const LatticeSpec& spec, int start_k);

}  // namespace levelline
