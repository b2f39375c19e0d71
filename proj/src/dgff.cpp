#include "levelline/dgff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "levelline/rng.hpp"

namespace levelline {

namespace {

enum class VertexKind { Interior, FreeArc, DirichletBottom, FarBoundary };

double arc_value(const BoundaryConfig& cfg, double x) {
    // x >= a, value on [b_m, b_{m+1}) is first_sign * (-1)^m * lambda, b_0 = a
    int m = 0;
    for (double b : cfg.b) {
        if (x >= b) ++m;
        else break;
    }
    return cfg.first_sign * cfg.lambda * ((m % 2 == 0) ? 1.0 : -1.0);
}

VertexKind classify_vertex(const LatticeSpec& spec, int i, int j) {
    if (i == 0 || i == spec.width || j == spec.height) return VertexKind::FarBoundary;
    if (j == 0) {
        return (spec.x(i) < spec.boundary.a) ? VertexKind::FreeArc : VertexKind::DirichletBottom;
    }
    return VertexKind::Interior;
}

double pinned_value(const LatticeSpec& spec, int i, VertexKind kind) {
    if (kind == VertexKind::FarBoundary) return 0.0;
    return arc_value(spec.boundary, spec.x(i));
}

}  // namespace

void LatticeSpec::validate() const {
    boundary.validate();
    if (width < 4 || height < 4) throw std::invalid_argument("LatticeSpec: grid too small");
    if (!(mesh > 0.0)) throw std::invalid_argument("LatticeSpec: mesh must be positive");
    if (!(x0 < boundary.a)) {
        throw std::invalid_argument("LatticeSpec: box must contain part of the free arc (x0 < a)");
    }
    if (!(boundary.b.back() < x0 + width * mesh)) {
        throw std::invalid_argument("LatticeSpec: all marked points must lie inside the box");
    }
}

LatticeSpec LatticeSpec::from_config(const BoundaryConfig& config, int cells) {
    config.validate();
    LatticeSpec spec;
    spec.boundary = config;
    spec.width = cells;
    spec.height = cells;
    spec.mesh = config.min_gap() / 16.0;
    const double extent = cells * spec.mesh;
    const double span = config.span();
    if (extent <= span + 2.0 * spec.mesh) {
        throw std::invalid_argument(
            "LatticeSpec: grid too small: fewer than 16 cells per marked-point gap "
            "would be needed to also cover the free arc; increase the cell count");
    }
    spec.x0 = config.a - (extent - span) / 2.0;
    spec.validate();
    return spec;
}

struct DgffSampler::Impl {
    LatticeSpec spec;
    std::vector<int> free_slot;  // vertex id -> slot or -1
    std::vector<int> free_ids;
    std::vector<double> mean;  // all vertices
    Eigen::SparseMatrix<double> laplacian;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> chol;
};

DgffSampler::DgffSampler(const LatticeSpec& spec_in) : impl_(new Impl) {
    Impl& im = *impl_;
    im.spec = spec_in;
    im.spec.validate();
    const LatticeSpec& spec = im.spec;
    const int nx = spec.width + 1;
    const int ny = spec.height + 1;
    const int n_vert = nx * ny;

    std::vector<VertexKind> kind(n_vert);
    std::vector<double> pinned(n_vert, 0.0);
    im.free_slot.assign(n_vert, -1);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int id = spec.vertex_id(i, j);
            kind[id] = classify_vertex(spec, i, j);
            if (kind[id] == VertexKind::Interior || kind[id] == VertexKind::FreeArc) {
                im.free_slot[id] = static_cast<int>(im.free_ids.size());
                im.free_ids.push_back(id);
            } else {
                pinned[id] = pinned_value(spec, i, kind[id]);
            }
        }
    }
    const int n_free = static_cast<int>(im.free_ids.size());
    if (n_free == 0) throw std::invalid_argument("DgffSampler: no unpinned vertices");

    // Graph Laplacian rows for unpinned vertices. Free-arc vertices have no
    // southern neighbor (reflecting stencil, degree 3).
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_free);
    auto neighbors = [&](int i, int j, auto&& fn) {
        if (i > 0) fn(i - 1, j);
        if (i < nx - 1) fn(i + 1, j);
        if (j > 0) fn(i, j - 1);
        if (j < ny - 1) fn(i, j + 1);
    };
    for (int s = 0; s < n_free; ++s) {
        const int id = im.free_ids[s];
        const int i = id % nx;
        const int j = id / nx;
        int degree = 0;
        neighbors(i, j, [&](int ii, int jj) {
            const int nid = spec.vertex_id(ii, jj);
            ++degree;
            if (im.free_slot[nid] >= 0) {
                trips.emplace_back(s, im.free_slot[nid], -1.0);
            } else {
                rhs[s] += pinned[nid];
            }
        });
        trips.emplace_back(s, s, static_cast<double>(degree));
    }
    im.laplacian.resize(n_free, n_free);
    im.laplacian.setFromTriplets(trips.begin(), trips.end());
    im.chol.compute(im.laplacian);
    if (im.chol.info() != Eigen::Success) {
        throw std::runtime_error("DgffSampler: Cholesky factorization failed (singular operator?)");
    }

    // Harmonic extension of the boundary data.
    Eigen::VectorXd mean_free = im.chol.solve(rhs);
    im.mean.assign(n_vert, 0.0);
    for (int id = 0; id < n_vert; ++id) {
        im.mean[id] = (im.free_slot[id] >= 0) ? mean_free[im.free_slot[id]] : pinned[id];
    }
}

DgffSampler::~DgffSampler() = default;
DgffSampler::DgffSampler(DgffSampler&&) noexcept = default;

const LatticeSpec& DgffSampler::spec() const { return impl_->spec; }
int DgffSampler::free_count() const { return static_cast<int>(impl_->free_ids.size()); }
const std::vector<double>& DgffSampler::mean_field() const { return impl_->mean; }
const std::vector<int>& DgffSampler::free_ids() const { return impl_->free_ids; }

FieldSample DgffSampler::sample(uint64_t seed) const {
    const Impl& im = *impl_;
    const int n_free = static_cast<int>(im.free_ids.size());
    Eigen::VectorXd z(n_free);
    for (int s = 0; s < n_free; ++s) {
        z[s] = rng::gaussian(seed, /*traj=*/1, static_cast<uint64_t>(s));
    }
    // Precision = P^T L L^T P, so x = P^T L^{-T} z has covariance
    // (precision)^{-1}.
    Eigen::VectorXd y = im.chol.matrixU().solve(z);
    Eigen::VectorXd fluct = im.chol.permutationPinv() * y;

    FieldSample out;
    out.nx = im.spec.width + 1;
    out.ny = im.spec.height + 1;
    out.values = im.mean;
    for (int s = 0; s < n_free; ++s) {
        out.values[im.free_ids[s]] += fluct[s];
    }
    return out;
}

std::vector<double> DgffSampler::dense_precision(int max_free) const {
    const Impl& im = *impl_;
    const int n = static_cast<int>(im.free_ids.size());
    if (n > max_free) throw std::invalid_argument("dense_precision: grid too large");
    Eigen::MatrixXd dense = Eigen::MatrixXd(im.laplacian);
    return {dense.data(), dense.data() + n * n};  // column-major == symmetric
}

std::vector<double> DgffSampler::dense_covariance(int max_free) const {
    const Impl& im = *impl_;
    const int n = static_cast<int>(im.free_ids.size());
    if (n > max_free) throw std::invalid_argument("dense_covariance: grid too large");
    Eigen::MatrixXd dense = Eigen::MatrixXd(im.laplacian);
    Eigen::MatrixXd cov = dense.inverse();
    return {cov.data(), cov.data() + n * n};
}

namespace {

enum Dir { S = 0, E = 1, N = 2, W = 3 };  // direction of motion

struct EdgeRef {
    int cx, cy;  // cell
    Dir side;    // which edge of the cell, named by the motion that crosses it
};

bool positive(double v) { return v >= 0.0; }

}  // namespace

LevelLineResult trace_level_line(const FieldSample& sample, const LatticeSpec& spec, int start_k) {
    spec.validate();
    const BoundaryConfig& cfg = spec.boundary;
    if (start_k < 1 || start_k > cfg.n()) {
        throw std::invalid_argument("trace_level_line: start index out of range");
    }
    const double bk = cfg.b[start_k - 1];

    LevelLineResult res;

    // Starting edge: the bottom edge straddling the boundary sign change at
    // b_k. Search a few columns around it for the pinned-value flip.
    int start_i = -1;
    const int guess = static_cast<int>(std::floor((bk - spec.x0) / spec.mesh));
    double best_dist = std::numeric_limits<double>::infinity();
    for (int i = std::max(0, guess - 2); i <= std::min(spec.width - 1, guess + 2); ++i) {
        if (positive(sample.at(i, 0)) != positive(sample.at(i + 1, 0))) {
            const double mid = spec.x(i) + 0.5 * spec.mesh;
            if (std::abs(mid - bk) < best_dist) {
                best_dist = std::abs(mid - bk);
                start_i = i;
            }
        }
    }
    if (start_i < 0) {
        throw std::invalid_argument("trace_level_line: no boundary sign change near b_k");
    }

    auto corner = [&](int cx, int cy, int dx, int dy) { return sample.at(cx + dx, cy + dy); };
    // Zero crossing position along an edge of cell (cx, cy); side named by
    // the motion direction that crosses it.
    auto crossing_point = [&](int cx, int cy, Dir side) -> std::pair<double, double> {
        double u, v, xa, ya, xb, yb;
        switch (side) {
            case S: u = corner(cx, cy, 0, 0); v = corner(cx, cy, 1, 0);
                    xa = spec.x(cx); ya = spec.y(cy); xb = spec.x(cx + 1); yb = ya; break;
            case N: u = corner(cx, cy, 0, 1); v = corner(cx, cy, 1, 1);
                    xa = spec.x(cx); ya = spec.y(cy + 1); xb = spec.x(cx + 1); yb = ya; break;
            case W: u = corner(cx, cy, 0, 0); v = corner(cx, cy, 0, 1);
                    xa = spec.x(cx); ya = spec.y(cy); xb = xa; yb = spec.y(cy + 1); break;
            default: u = corner(cx, cy, 1, 0); v = corner(cx, cy, 1, 1);
                    xa = spec.x(cx + 1); ya = spec.y(cy); xb = xa; yb = spec.y(cy + 1); break;
        }
        const double t = u / (u - v);
        return {xa + t * (xb - xa), ya + t * (yb - ya)};
    };
    auto has_crossing = [&](int cx, int cy, Dir side) {
        switch (side) {
            case S: return positive(corner(cx, cy, 0, 0)) != positive(corner(cx, cy, 1, 0));
            case N: return positive(corner(cx, cy, 0, 1)) != positive(corner(cx, cy, 1, 1));
            case W: return positive(corner(cx, cy, 0, 0)) != positive(corner(cx, cy, 0, 1));
            default: return positive(corner(cx, cy, 1, 0)) != positive(corner(cx, cy, 1, 1));
        }
    };

    // Fixed left-hand rule: prefer turning left, then straight, then right,
    // relative to the direction of motion.
    auto candidates = [](Dir motion) -> std::array<Dir, 3> {
        switch (motion) {
            case N: return {W, N, E};
            case E: return {N, E, S};
            case S: return {E, S, W};
            default: return {S, W, N};
        }
    };
    // Exit side of current cell for a given motion direction.
    auto exit_side = [](Dir motion) { return motion; };

    int cx = start_i, cy = 0;
    Dir motion = N;
    res.polyline.push_back(crossing_point(cx, cy, S));

    const long max_crossings = 4L * spec.width * spec.height + 16;
    for (long step = 0; step < max_crossings; ++step) {
        Dir next_motion = motion;
        bool found = false;
        for (Dir cand : candidates(motion)) {
            if (has_crossing(cx, cy, exit_side(cand))) {
                next_motion = cand;
                found = true;
                break;
            }
        }
        if (!found) {
            res.outcome = Outcome::Censored;
            res.censor_reason = "dead_end";
            return res;
        }
        res.polyline.push_back(crossing_point(cx, cy, exit_side(next_motion)));
        // Leave the cell.
        int nx_cell = cx, ny_cell = cy;
        switch (next_motion) {
            case N: ++ny_cell; break;
            case S: --ny_cell; break;
            case E: ++nx_cell; break;
            case W: --nx_cell; break;
        }
        if (next_motion == S && ny_cell < 0) {
            // Landed back on the bottom edge.
            const double x_land = res.polyline.back().first;
            res.landing_x = x_land;
            if (x_land < cfg.a) {
                res.outcome = Outcome::FreeArc;
            } else {
                int nearest = 1;
                double best = std::numeric_limits<double>::infinity();
                for (int i = 1; i <= cfg.n(); ++i) {
                    const double d = std::abs(cfg.b[i - 1] - x_land);
                    if (d < best) {
                        best = d;
                        nearest = i;
                    }
                }
                res.point_index = nearest;
                res.outcome = ((nearest - start_k) % 2 == 0) ? Outcome::AnomalousSamePolarity
                                                             : Outcome::SwallowedPoint;
            }
            return res;
        }
        if (nx_cell < 0 || nx_cell >= spec.width || ny_cell >= spec.height) {
            res.outcome = Outcome::Censored;
            res.censor_reason = "box";
            return res;
        }
        cx = nx_cell;
        cy = ny_cell;
        motion = next_motion;
    }
    res.outcome = Outcome::Censored;
    res.censor_reason = "loop";
    return res;
}

}  // namespace levelline
