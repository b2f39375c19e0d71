#include "levelline/sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "levelline/formula.hpp"
#include "levelline/rng.hpp"

namespace levelline {

namespace {

// RNG substream layout per (seed, step): 0..1 feed the Gaussian increment,
// 2 + channel feed the bridge-crossing uniforms (channel 0 = a, 1.. = b_img).
constexpr uint64_t kBridgeSubBase = 2;

double gap_to_a(const DrivingState& s) { return s.w - s.a_img; }

/// Signed force-term sum J_t. Lower images that have merged with a within
/// rounding contribute 0 (their force term vanishes in that limit).
double j_sum(const DrivingState& s, int k) {
    const double ga = gap_to_a(s);
    double j = 0.0;
    for (int slot = 0; slot < static_cast<int>(s.b_img.size()); ++slot) {
        const double num = std::max(s.b_img[slot] - s.a_img, 0.0);
        const double f = (2.0 / (s.w - s.b_img[slot])) * std::sqrt(num / ga);
        j += tracked_parity_sign(slot, k) * f;
    }
    return j;
}

bool state_finite(const DrivingState& s) {
    if (!std::isfinite(s.w) || !std::isfinite(s.a_img) || !std::isfinite(s.j_sq_integral)) {
        return false;
    }
    for (double b : s.b_img) {
        if (!std::isfinite(b)) return false;
    }
    return true;
}

/// Brownian-bridge probability that a gap with endpoint distances d0, d1
/// above the threshold dipped below it during a step of length dt (noise
/// coefficient 2, so variance 4 dt).
double bridge_cross_prob(double d0, double d1, double dt) {
    if (d0 <= 0.0 || d1 <= 0.0) return 1.0;
    const double e = d0 * d1 / (2.0 * dt);
    return (e > 40.0) ? 0.0 : std::exp(-e);
}

}  // namespace

StepControl StepControl::defaults_for(const BoundaryConfig& config) {
    config.validate();
    const double g0 = config.min_gap();
    StepControl ctrl;
    ctrl.dt_base = 1e-3 * g0 * g0;
    ctrl.epsilon = 1e-4 * g0;
    ctrl.adapt_power = 2.0;
    // The free-arc gap is a Bessel(3/2)-type process whose hitting time has
    // a t^{-1/4} tail; the horizon must be huge for sub-percent censoring.
    // Cheap, because dt grows with the configuration scale.
    ctrl.t_max = 1e10 * config.span() * config.span();
    ctrl.max_steps = 20000000;
    return ctrl;
}

void StepControl::validate() const {
    if (!(dt_base > 0.0) || !(epsilon > 0.0) || !(t_max > 0.0) || !(adapt_power >= 0.0) ||
        max_steps < 1) {
        throw std::invalid_argument("StepControl: require dt_base, epsilon, t_max > 0, "
                                    "adapt_power >= 0, max_steps >= 1");
    }
}

DrivingState initial_state(const BoundaryConfig& config) {
    config.validate();
    DrivingState s;
    s.w = config.bk();
    s.a_img = config.a;
    s.b_img.reserve(config.n() - 1);
    for (int i = 1; i <= config.n(); ++i) {
        if (i != config.k) s.b_img.push_back(config.b[i - 1]);
    }
    return s;
}

double drift_general(const DrivingState& state, const BoundaryConfig& config) {
    const double ga = gap_to_a(state);
    if (!(ga > 0.0)) {
        throw std::invalid_argument("drift_general: w - a gap must be positive");
    }
    for (double b : state.b_img) {
        if (state.w == b) throw std::invalid_argument("drift_general: zero gap to a tracked point");
    }
    return -1.0 / ga + j_sum(state, config.k);
}

void step_general(DrivingState& state, const BoundaryConfig& config, double dB, double dt) {
    if (dt < 0.0) throw std::invalid_argument("step_general: dt must be >= 0");
    if (dt == 0.0) return;
    const double w_old = state.w;
    const double j = j_sum(state, config.k);
    state.w += 2.0 * dB + (-1.0 / gap_to_a(state) + j) * dt;
    state.a_img += 2.0 * dt / (state.a_img - w_old);
    for (double& b : state.b_img) {
        b += 2.0 * dt / (b - w_old);
    }
    state.j_sq_integral += j * j * dt;
    state.t += dt;
}

std::pair<double, double> step_sle_kappa_rho(double w, double v, const SleParams& params,
                                             double dB, double dt) {
    if (w == v) throw std::invalid_argument("step_sle_kappa_rho: w == v");
    if (!(dt > 0.0)) throw std::invalid_argument("step_sle_kappa_rho: dt must be positive");
    const double w_new = w + std::sqrt(params.kappa) * dB + params.rho * dt / (w - v);
    const double v_new = v + 2.0 * dt / (v - w);
    return {w_new, v_new};
}

std::optional<OutcomeRecord> detect_collision(const DrivingState& state,
                                              const BoundaryConfig& config, double epsilon) {
    const int k = config.k;
    const double ga = gap_to_a(state);

    int best_slot = -1;  // -1 encodes the a channel
    double best_gap = (ga <= epsilon) ? ga : std::numeric_limits<double>::infinity();
    for (int slot = 0; slot < static_cast<int>(state.b_img.size()); ++slot) {
        const double g = std::abs(state.b_img[slot] - state.w);
        if (g <= epsilon && g < best_gap) {
            best_gap = g;
            best_slot = slot;
        }
    }
    if (!std::isfinite(best_gap)) return std::nullopt;

    OutcomeRecord rec;
    rec.T = state.t;
    rec.final_state = state;
    if (best_slot < 0) {
        rec.outcome = Outcome::FreeArc;
        return rec;
    }
    const int orig = tracked_original_index(best_slot, k);
    if (orig < k && state.b_img[best_slot] - state.a_img <= epsilon) {
        // The nearest point has itself collapsed onto a: at resolution
        // epsilon this is a hit of the free arc through the merged cluster.
        rec.outcome = Outcome::FreeArc;
        return rec;
    }
    rec.outcome = (tracked_parity_sign(best_slot, k) < 0.0) ? Outcome::SwallowedPoint
                                                            : Outcome::AnomalousSamePolarity;
    rec.point_index = orig;
    return rec;
}

bool guard_time_hit(const DrivingState& state, const BoundaryConfig& config, int n_guard) {
    if (n_guard < 2) throw std::invalid_argument("guard_time_hit: n_guard must be >= 2");
    const double lo = 1.0 / n_guard;
    const double hi = 1.0 - lo;
    const double ga = gap_to_a(state);
    for (int slot = 0; slot < static_cast<int>(state.b_img.size()); ++slot) {
        const double gb = state.b_img[slot] - state.a_img;
        const int orig = tracked_original_index(slot, config.k);
        const double ratio = (orig > config.k) ? ga / gb : gb / ga;
        if (!(ratio > lo && ratio < hi)) return true;
    }
    return false;
}

Observables observables(const DrivingState& state, const BoundaryConfig& config) {
    const int k = config.k;
    const double ga = gap_to_a(state);
    if (!(ga > 0.0)) throw std::domain_error("observables: collision state (w - a <= 0)");
    const double vk = std::sqrt(ga);

    Observables obs;
    double half_log_z = 0.0;
    for (int slot = 0; slot < static_cast<int>(state.b_img.size()); ++slot) {
        const double gb = std::abs(state.b_img[slot] - state.w);
        if (!(gb > 0.0)) throw std::domain_error("observables: collision state (w hits a point)");
        const double u = std::sqrt(std::max(state.b_img[slot] - state.a_img, 0.0));
        // Z factors squared have negative numerators for i < k; the per-factor
        // log uses |.| (Z itself is the square, hence positive).
        half_log_z += tracked_parity_sign(slot, k) * (std::log(std::abs(u - vk)) - std::log(u + vk));
    }
    obs.j = j_sum(state, k);
    obs.log_z = 2.0 * half_log_z;
    obs.n_weight = std::exp(-state.j_sq_integral / 8.0);
    obs.m = std::exp(0.25 * obs.log_z - state.j_sq_integral / 8.0);

    std::vector<double> b_full;
    b_full.reserve(state.b_img.size() + 1);
    b_full.insert(b_full.end(), state.b_img.begin(), state.b_img.begin() + (k - 1));
    b_full.push_back(state.w);
    b_full.insert(b_full.end(), state.b_img.begin() + (k - 1), state.b_img.end());
    obs.m_tilde = hit_free_arc_probability(state.a_img, b_full, k);
    return obs;
}

OutcomeRecord run_trajectory(const BoundaryConfig& config, const StepControl& ctrl, uint64_t seed,
                             DriveLaw law, StepHook* hook, std::span<const double> forced_times) {
    config.validate();
    ctrl.validate();

    DrivingState state = initial_state(config);
    const int k = config.k;
    const int n_tracked = static_cast<int>(state.b_img.size());
    const double g0 = config.min_gap();
    const double eps_detect = ctrl.epsilon;
    const double eps = (ctrl.epsilon_classify > 0.0)
                           ? std::min(ctrl.epsilon_classify, eps_detect)
                           : 1e-4 * eps_detect;
    double t_detect = -1.0;  // first contact at the detection threshold

    OutcomeRecord rec;
    const int this_k = k;
    std::vector<double> vb0(n_tracked), vb1(n_tracked), b_pred(n_tracked), gap_old(n_tracked);
    if (hook) hook->on_step(state);
    std::size_t next_forced = 0;
    while (next_forced < forced_times.size() && forced_times[next_forced] <= 0.0) ++next_forced;

    auto censor = [&](const char* reason) {
        rec.outcome = Outcome::Censored;
        rec.censor_reason = reason;
        rec.T = state.t;
        rec.final_state = state;
        return rec;
    };
    auto classify_point = [&](int slot, double T) {
        rec.outcome = (tracked_parity_sign(slot, k) < 0.0) ? Outcome::SwallowedPoint
                                                           : Outcome::AnomalousSamePolarity;
        rec.point_index = tracked_original_index(slot, k);
        rec.T = (t_detect >= 0.0) ? t_detect : T;
        rec.final_state = state;
        return rec;
    };
    auto classify_free = [&](double T) {
        rec.outcome = Outcome::FreeArc;
        rec.T = (t_detect >= 0.0) ? t_detect : T;
        rec.final_state = state;
        return rec;
    };
    // Lower points trigger classification only once their distance to a
    // dominates: on free-arc paths (b_i - a)/(w - a) -> 0 while on genuine
    // swallows it -> 1, so a trigger with ratio < 1/2 is deferred and the
    // flow itself resolves the ambiguity (free-arc hits fire on the a
    // channel once w - a <= eps).
    auto lower_is_swallow = [&](int slot) {
        return state.b_img[slot] - state.a_img >= 0.5 * gap_to_a(state);
    };

    for (long step = 0;; ++step) {
        // Threshold classification of the current state.
        {
            const double ga = gap_to_a(state);
            if (ga <= eps) return classify_free(state.t);
            int best_slot = -1;
            double best_gap = std::numeric_limits<double>::infinity();
            for (int slot = 0; slot < n_tracked; ++slot) {
                const double g = std::abs(state.b_img[slot] - state.w);
                if (g <= eps && g < best_gap) {
                    const int orig = tracked_original_index(slot, k);
                    if (orig < k && !lower_is_swallow(slot)) continue;  // deferred
                    best_gap = g;
                    best_slot = slot;
                }
            }
            if (best_slot >= 0) return classify_point(best_slot, state.t);
        }
        if (state.t >= ctrl.t_max) return censor("t_max");
        if (step >= ctrl.max_steps) return censor("max_steps");

        // Gap-adaptive step, clamped to land exactly on forced times.
        double min_gap = gap_to_a(state);
        for (int slot = 0; slot < n_tracked; ++slot) {
            min_gap = std::min(min_gap, std::abs(state.b_img[slot] - state.w));
        }
        if (t_detect < 0.0 && min_gap <= eps_detect) t_detect = state.t;
        const double ratio = min_gap / g0;
        double dt = ctrl.dt_base *
                    (ctrl.adapt_power == 2.0 ? ratio * ratio : std::pow(ratio, ctrl.adapt_power));
        if (ctrl.startup_factor > 0.0) {
            dt = std::min(dt, std::max(ctrl.startup_factor * state.t, 1e-6 * ctrl.dt_base));
        }
        dt = std::min(dt, ctrl.t_max - state.t);
        if (next_forced < forced_times.size()) {
            dt = std::min(dt, forced_times[next_forced] - state.t);
        }
        dt = std::max(dt, 1e-300);

        const double w_old = state.w;
        const double a_old = state.a_img;
        const double ga_old = w_old - a_old;
        for (int slot = 0; slot < n_tracked; ++slot) {
            gap_old[slot] = std::abs(state.b_img[slot] - w_old);
        }
        const double dB = rng::gaussian(seed, 0, static_cast<uint64_t>(step)) * std::sqrt(dt);
        if (hook) hook->on_increment(state, dB, dt);

        // Velocities of the system at (w, a, b): the J force-term sum, the
        // drift of w, and the Loewner velocities of the tracked points.
        auto velocities = [&](double w, double a, const std::vector<double>& b, double* vb,
                              double& j_out, double& mu_out, double& va_out) -> bool {
            const double ga = w - a;
            if (!(ga > 0.0)) return false;
            double j = 0.0;
            for (int slot = 0; slot < n_tracked; ++slot) {
                const double gb = w - b[slot];
                if (gb == 0.0) return false;
                const double num = std::max(b[slot] - a, 0.0);
                j += tracked_parity_sign(slot, k) * (2.0 / gb) * std::sqrt(num / ga);
                vb[slot] = 2.0 / (b[slot] - w);
            }
            j_out = j;
            mu_out = (law == DriveLaw::General) ? (-1.0 / ga + j) : (-1.0 / ga);
            va_out = 2.0 / (a - w);
            return true;
        };

        double j0, mu0, va0;
        velocities(w_old, a_old, state.b_img, vb0.data(), j0, mu0, va0);

        // Predictor (plain Euler), then trapezoidal corrector. The noise is
        // additive, so the Heun step is weak order 2; plain Euler leaves an
        // O(sqrt(dt_base)) bias in the hitting probabilities.
        const double w_pred = w_old + 2.0 * dB + mu0 * dt;
        const double a_pred = a_old + va0 * dt;
        for (int slot = 0; slot < n_tracked; ++slot) {
            b_pred[slot] = state.b_img[slot] + vb0[slot] * dt;
        }
        double j1, mu1, va1;
        bool pred_ok = w_pred > a_pred;
        for (int slot = 0; pred_ok && slot < n_tracked; ++slot) {
            const bool below = tracked_original_index(slot, k) < this_k;
            pred_ok = below ? (b_pred[slot] < w_pred) : (b_pred[slot] > w_pred);
        }
        if (pred_ok) pred_ok = velocities(w_pred, a_pred, b_pred, vb1.data(), j1, mu1, va1);
        if (pred_ok) {
            state.w = w_old + 2.0 * dB + 0.5 * (mu0 + mu1) * dt;
            state.a_img = a_old + 0.5 * (va0 + va1) * dt;
            for (int slot = 0; slot < n_tracked; ++slot) {
                state.b_img[slot] += 0.5 * (vb0[slot] + vb1[slot]) * dt;
            }
            state.j_sq_integral += 0.5 * (j0 * j0 + j1 * j1) * dt;
        } else {
            // Predictor overshot a gap; fall back to the Euler step.
            state.w = w_pred;
            state.a_img = a_pred;
            for (int slot = 0; slot < n_tracked; ++slot) state.b_img[slot] = b_pred[slot];
            state.j_sq_integral += j0 * j0 * dt;
        }
        state.t += dt;

        if (!state_finite(state)) return censor("nonfinite");

        // The driving value may cross a tracked point in one step only via an
        // extreme noise draw; order violations around w are censored rather
        // than silently reclassified.
        {
            const int lower_slots = k - 1;
            const double below = (lower_slots > 0) ? state.b_img[lower_slots - 1] : state.a_img;
            const double above = (lower_slots < n_tracked)
                                     ? state.b_img[lower_slots]
                                     : std::numeric_limits<double>::infinity();
            if (state.w < below || state.w > above) return censor("order");
        }

        // Sub-step crossing tests: did some gap dip below eps inside the step?
        if (ctrl.bridge_detection) {
            int hit_channel = -2;  // -2 none, -1 a, >=0 slot
            double hit_prob_best = 0.0;
            const double d0a = ga_old - eps;
            const double d1a = gap_to_a(state) - eps;
            if (d1a > 0.0) {  // post-step threshold handles d1a <= 0 next loop
                const double p = bridge_cross_prob(d0a, d1a, dt);
                if (p > 0.0 && rng::uniform(seed, 0, static_cast<uint64_t>(step), kBridgeSubBase) < p) {
                    hit_channel = -1;
                    hit_prob_best = p;
                }
            }
            for (int slot = 0; slot < n_tracked; ++slot) {
                const double d0 = gap_old[slot] - eps;
                const double d1 = std::abs(state.b_img[slot] - state.w) - eps;
                if (d1 <= 0.0) continue;
                const double p = bridge_cross_prob(d0, d1, dt);
                if (p <= hit_prob_best) continue;
                const int orig = tracked_original_index(slot, k);
                if (orig < k && !lower_is_swallow(slot)) continue;  // deferred
                if (rng::uniform(seed, 0, static_cast<uint64_t>(step),
                                 kBridgeSubBase + 1 + static_cast<uint64_t>(slot)) < p) {
                    hit_channel = slot;
                    hit_prob_best = p;
                }
            }
            if (hit_channel != -2) {
                const double d0 = (hit_channel == -1)
                                      ? d0a
                                      : gap_old[hit_channel] - eps;
                const double d1 = (hit_channel == -1)
                                      ? d1a
                                      : std::abs(state.b_img[hit_channel] - state.w) - eps;
                const double frac = (d0 + d1 > 0.0) ? d0 / (d0 + d1) : 0.5;
                const double T = state.t - dt + frac * dt;
                rec.steps = step + 1;
                if (hit_channel == -1) return classify_free(T);
                return classify_point(hit_channel, T);
            }
        }

        rec.steps = step + 1;
        if (hook) hook->on_step(state);
        if (next_forced < forced_times.size() && state.t >= forced_times[next_forced]) {
            ++next_forced;
        }
    }
}

}  // namespace levelline
