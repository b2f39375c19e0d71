#include "levelline/loewner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "levelline/formula.hpp"

namespace levelline {

void DrivingPath::validate() const {
    if (times.empty() || times.size() != values.size()) {
        throw std::invalid_argument("DrivingPath: times/values must be non-empty and equal length");
    }
    if (times.front() != 0.0) {
        throw std::invalid_argument("DrivingPath: grid must start at t = 0");
    }
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
        if (!(times[i + 1] > times[i])) {
            throw std::invalid_argument("DrivingPath: times must be strictly increasing");
        }
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw std::invalid_argument("DrivingPath: non-finite value");
    }
}

namespace {

double path_scale(const DrivingPath& path, std::complex<double> z) {
    double s = std::abs(z) + 1.0;
    for (double v : path.values) s = std::max(s, std::abs(v));
    return s;
}

}  // namespace

FlowResult flow_point(const DrivingPath& path, std::complex<double> z, double blow_tol_rel) {
    path.validate();
    FlowResult res;
    const double tol = blow_tol_rel * path_scale(path, z);

    if (z.imag() == 0.0) {
        // Boundary point: exact real branch, g stays on the same side of W
        // within a constant-driving interval; swallowing happens when the
        // driving jumps across it.
        double x = z.real();
        if (std::abs(x - path.values.front()) <= tol) {
            res.value = path.values.front();
            res.tau = 0.0;
            res.swallowed = true;
            return res;
        }
        double sign = (x > path.values.front()) ? 1.0 : -1.0;
        for (std::size_t j = 1; j < path.times.size(); ++j) {
            const double w = path.values[j - 1];
            if ((x - w) * sign <= 0.0 || std::abs(x - w) <= tol) {
                res.value = w;
                res.tau = path.times[j - 1];
                res.swallowed = true;
                return res;
            }
            const double dt = path.times[j] - path.times[j - 1];
            const double gap = x - w;
            x = w + sign * std::sqrt(gap * gap + 4.0 * dt);
        }
        if (path.times.size() > 1) {
            const double w_end = path.values.back();
            if ((x - w_end) * sign <= 0.0 || std::abs(x - w_end) <= tol) {
                res.value = w_end;
                res.tau = path.times.back();
                res.swallowed = true;
                return res;
            }
        }
        res.value = x;
        return res;
    }

    std::complex<double> g = z;
    for (std::size_t j = 1; j < path.times.size(); ++j) {
        const double w = path.values[j - 1];
        const double dt = path.times[j] - path.times[j - 1];
        const std::complex<double> zeta = g - w;
        const double mag = std::abs(zeta) + 2.0 * std::sqrt(dt);
        if (std::abs(zeta) <= tol) {
            res.value = w;
            res.tau = path.times[j - 1];
            res.swallowed = true;
            return res;
        }
        if (std::abs(zeta.real()) <= 1e-12 * mag) {
            // On the imaginary axis above the slit base: swallowed inside
            // this sub-interval iff the slit outgrows it.
            const double y2 = zeta.imag() * zeta.imag();
            if (y2 <= 4.0 * dt) {
                res.value = w;
                res.tau = path.times[j - 1] + y2 / 4.0;
                res.swallowed = true;
                return res;
            }
            g = w + std::complex<double>(0.0, std::sqrt(y2 - 4.0 * dt));
        } else if (std::abs(zeta.imag()) <= 1e-12 * mag) {
            // Image currently on the real axis (an unzipped curve point):
            // stays real, on the same side of the slit base.
            const double side = (zeta.real() >= 0.0) ? 1.0 : -1.0;
            g = w + side * std::sqrt(zeta.real() * zeta.real() + 4.0 * dt);
        } else {
            g = w + sqrt_uhp(zeta * zeta + 4.0 * dt);
        }
        if (std::abs(g - path.values[j]) <= tol) {
            res.value = path.values[j];
            res.tau = path.times[j];
            res.swallowed = true;
            return res;
        }
    }
    res.value = g;
    return res;
}

namespace {

std::complex<double> trace_tip(const DrivingPath& path, std::size_t j) {
    std::complex<double> z = path.values[j];
    for (std::size_t i = j; i >= 1; --i) {
        const double w = path.values[i - 1];
        const double dt = path.times[i] - path.times[i - 1];
        const std::complex<double> zeta = z - w;
        z = w + sqrt_uhp(zeta * zeta - 4.0 * dt);
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
            throw std::runtime_error("trace_curve: non-finite intermediate at step " +
                                     std::to_string(i));
        }
    }
    return z;
}

CurveTrace trace_impl(const DrivingPath& path, bool parallel) {
    path.validate();
    const std::size_t m = path.times.size();
    CurveTrace trace;
    trace.points.resize(m);
    trace.times = path.times;
    trace.points[0] = {path.values[0], 0.0};
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16) if (parallel)
#endif
    for (std::size_t j = 1; j < m; ++j) {
        trace.points[j] = trace_tip(path, j);
    }
    return trace;
}

}  // namespace

CurveTrace trace_curve(const DrivingPath& path) { return trace_impl(path, true); }
CurveTrace trace_curve_serial(const DrivingPath& path) { return trace_impl(path, false); }

namespace {

double segment_distance(std::complex<double> p1, std::complex<double> p2,
                        std::complex<double> q1, std::complex<double> q2) {
    auto dot = [](std::complex<double> a, std::complex<double> b) {
        return a.real() * b.real() + a.imag() * b.imag();
    };
    const std::complex<double> d1 = p2 - p1, d2 = q2 - q1, r = p1 - q1;
    const double a = dot(d1, d1), e = dot(d2, d2), f = dot(d2, r);
    double s = 0.0, t = 0.0;
    if (a <= 1e-300 && e <= 1e-300) {
        return std::abs(r);
    }
    if (a <= 1e-300) {
        t = std::clamp(f / e, 0.0, 1.0);
    } else {
        const double c = dot(d1, r);
        if (e <= 1e-300) {
            s = std::clamp(-c / a, 0.0, 1.0);
        } else {
            const double b = dot(d1, d2);
            const double denom = a * e - b * b;
            s = (denom > 0.0) ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
            t = (b * s + f) / e;
            if (t < 0.0) {
                t = 0.0;
                s = std::clamp(-c / a, 0.0, 1.0);
            } else if (t > 1.0) {
                t = 1.0;
                s = std::clamp((b - c) / a, 0.0, 1.0);
            }
        }
    }
    return std::abs((p1 + s * d1) - (q1 + t * d2));
}

}  // namespace

bool simplicity_check(const CurveTrace& trace, double tol) {
    const std::size_t m = trace.points.size();
    if (m < 3) throw std::invalid_argument("simplicity_check: need at least 3 points");
    const std::size_t n_seg = m - 1;

    // The simplicity claim concerns the curve inside the open half plane;
    // the vertical-slit tracer occasionally parks a tip exactly on the real
    // axis, so segments lying on the boundary are not tested against each
    // other.
    auto interior = [&](std::size_t i) {
        return trace.points[i].imag() > tol || trace.points[i + 1].imag() > tol;
    };

    // Uniform-grid broad phase over inflated segment boxes.
    double cell = tol;
    for (std::size_t i = 0; i < n_seg; ++i) {
        cell = std::max(cell, std::abs(trace.points[i + 1] - trace.points[i]));
    }
    auto key = [&](long ix, long iy) {
        return (static_cast<uint64_t>(ix) << 32) ^ static_cast<uint32_t>(iy);
    };
    std::unordered_map<uint64_t, std::vector<std::size_t>> grid;
    auto cells_of = [&](std::size_t i, auto&& fn) {
        const auto& p = trace.points[i];
        const auto& q = trace.points[i + 1];
        const double x0 = std::min(p.real(), q.real()) - tol;
        const double x1 = std::max(p.real(), q.real()) + tol;
        const double y0 = std::min(p.imag(), q.imag()) - tol;
        const double y1 = std::max(p.imag(), q.imag()) + tol;
        for (long ix = static_cast<long>(std::floor(x0 / cell));
             ix <= static_cast<long>(std::floor(x1 / cell)); ++ix) {
            for (long iy = static_cast<long>(std::floor(y0 / cell));
                 iy <= static_cast<long>(std::floor(y1 / cell)); ++iy) {
                fn(key(ix, iy));
            }
        }
    };
    for (std::size_t i = 0; i < n_seg; ++i) {
        cells_of(i, [&](uint64_t k) { grid[k].push_back(i); });
    }
    for (std::size_t i = 0; i < n_seg; ++i) {
        if (!interior(i)) continue;
        bool ok = true;
        cells_of(i, [&](uint64_t k) {
            if (!ok) return;
            for (std::size_t other : grid[k]) {
                if (other <= i + 1) continue;  // self and adjacent
                if (!interior(other)) continue;
                if (segment_distance(trace.points[i], trace.points[i + 1], trace.points[other],
                                     trace.points[other + 1]) < tol) {
                    ok = false;
                    return;
                }
            }
        });
        if (!ok) return false;
    }
    return true;
}

CurveTrace resample_trace(const CurveTrace& trace, double h) {
    CurveTrace out;
    if (trace.points.empty()) return out;
    out.points.push_back(trace.points.front());
    out.times.push_back(trace.times.front());
    for (std::size_t i = 1; i + 1 < trace.points.size(); ++i) {
        if (std::abs(trace.points[i] - out.points.back()) >= h) {
            out.points.push_back(trace.points[i]);
            out.times.push_back(trace.times[i]);
        }
    }
    if (trace.points.size() > 1) {
        out.points.push_back(trace.points.back());
        out.times.push_back(trace.times.back());
    }
    return out;
}

double trace_error_scale(const CurveTrace& trace) {
    std::vector<double> chords;
    chords.reserve(trace.points.size());
    for (std::size_t i = 0; i + 1 < trace.points.size(); ++i) {
        chords.push_back(std::abs(trace.points[i + 1] - trace.points[i]));
    }
    if (chords.empty()) return 0.0;
    const std::size_t q = (9 * chords.size()) / 10;
    std::nth_element(chords.begin(), chords.begin() + q, chords.end());
    return 3.0 * chords[q];
}

bool trace_is_simple(const CurveTrace& trace) {
    // The slit-map tip error is comparable to the separation of nearby
    // strands, so the polyline crosses itself at the chord scale even when
    // the curve is simple. The diagnostic therefore looks at the curve well
    // above that scale.
    const double h = 8.0 * trace_error_scale(trace);
    if (h <= 0.0) return true;
    return simplicity_check(resample_trace(trace, h), h / 50.0);
}

namespace {

class PathRecorder : public StepHook {
  public:
    void on_step(const DrivingState& state) override {
        times.push_back(state.t);
        values.push_back(state.w);
    }
    std::vector<double> times, values;
};

}  // namespace

DrivingPath driving_path_from_sde(const BoundaryConfig& config, const StepControl& ctrl,
                                  uint64_t seed, OutcomeRecord* record, std::size_t max_points) {
    PathRecorder rec;
    OutcomeRecord out = run_trajectory(config, ctrl, seed, DriveLaw::General, &rec);
    if (record) *record = out;

    // Thin onto a grid uniform in sqrt(t): slit half-lengths 2(sqrt t_{j+1}
    // - sqrt t_j) are then roughly constant, so the traced polyline has
    // uniform chords. Steps too small to advance the clock (the
    // classification endgame runs below the ULP of t) are dropped.
    DrivingPath path;
    const std::size_t n = rec.times.size();
    const double t_end = rec.times.back();
    const double sqrt_spacing = std::sqrt(t_end) / static_cast<double>(max_points);
    double next_sqrt = 0.0;
    double tail_kept = t_end;  // T - t of the last kept point
    for (std::size_t i = 0; i < n; ++i) {
        if (!path.times.empty() && !(rec.times[i] > path.times.back())) continue;
        const double tail = t_end - rec.times[i];
        // Keep when sqrt(t) has advanced a chord, or geometrically in T - t
        // so the final approach to the collision stays resolved.
        const bool sqrt_due = std::sqrt(rec.times[i]) >= next_sqrt;
        const bool tail_due = tail <= 0.9 * tail_kept;
        if (i > 0 && i + 1 < n && !sqrt_due && !tail_due) continue;
        path.times.push_back(rec.times[i]);
        path.values.push_back(rec.values[i]);
        next_sqrt = std::sqrt(rec.times[i]) + sqrt_spacing;
        tail_kept = tail;
    }
    return path;
}

}  // namespace levelline
