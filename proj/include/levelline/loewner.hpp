#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <vector>

#include "levelline/boundary.hpp"
#include "levelline/sde.hpp"

namespace levelline {

/// A sampled driving function: strictly increasing time grid starting at 0
/// and the driving value at each grid point.
struct DrivingPath {
    std::vector<double> times;
    std::vector<double> values;

    void validate() const;
    double duration() const { return times.back(); }
};

/// Polyline approximation of the trace, tip per grid time.
struct CurveTrace {
    std::vector<std::complex<double>> points;
    std::vector<double> times;
};

struct FlowResult {
    std::complex<double> value;  // g_t(z) at the end of the path (or at tau)
    double tau = std::numeric_limits<double>::infinity();  // swallowing time
    bool swallowed = false;
};

/// Integrates dg/dt = 2/(g - W) with piecewise-constant driving, using the
/// exact slit-map solution per sub-interval. Returns the final image and the
/// blow-up time if the point is swallowed.
FlowResult flow_point(const DrivingPath& path, std::complex<double> z,
                      double blow_tol_rel = 1e-8);

/// Traces the curve: tip at t_j is f_1 o ... o f_j (W_{t_j}) with f_i the
/// inverse single-slit map of step i. Cost is quadratic in the number of
/// grid points; tips are independent, so the loop parallelizes.
CurveTrace trace_curve(const DrivingPath& path);
CurveTrace trace_curve_serial(const DrivingPath& path);

/// True iff no two non-adjacent polyline segments come within tol of each
/// other. Segments resting on the real axis are not tested (the simpleness
/// claim concerns gamma inside H; the slit tracer parks tips on the axis).
/// Statistical diagnostic for simpleness, not a proof.
bool simplicity_check(const CurveTrace& trace, double tol);

/// Greedy spatial resampling: keeps points at least h apart (plus the
/// endpoints). Traced tips carry discretization error at the chord scale,
/// so simplicity is meaningful only above it; check the resampled trace.
CurveTrace resample_trace(const CurveTrace& trace, double h);

/// Suggested resampling scale: 3x the 90th-percentile chord length.
double trace_error_scale(const CurveTrace& trace);

/// Canned simpleness diagnostic for traced curves: resamples at the error
/// scale h and checks segment proximity at h/50. Transversal crossings sit
/// at distance ~0 and are always caught; the tight tolerance keeps the
/// curve's own near-self-approaches (present at every scale) out.
bool trace_is_simple(const CurveTrace& trace);

/// Simulates one general-system trajectory and returns its driving function
/// sampled on the integration grid (thinned to at most max_points).
DrivingPath driving_path_from_sde(const BoundaryConfig& config, const StepControl& ctrl,
                                  uint64_t seed, OutcomeRecord* record = nullptr,
                                  std::size_t max_points = 20000);

}  // namespace levelline
