#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "levelline/boundary.hpp"

namespace levelline {

/// Images of the marked points under the Loewner flow. w is the driving
/// value b_k(t); b_img holds the other images in ascending order (original
/// indices 1..n skipping k).
struct DrivingState {
    double t = 0.0;
    double w = 0.0;
    double a_img = 0.0;
    std::vector<double> b_img;
    double j_sq_integral = 0.0;
};

struct SleParams {
    double kappa = 4.0;
    double rho = -1.0;
    double x0 = 0.0;
    double y0 = 0.0;  // force point, y0 <= x0
};

struct StepControl {
    double dt_base = 0.0;       // step size at the initial minimum gap
    double epsilon = 0.0;       // absolute collision threshold (detection, T)
    double adapt_power = 2.0;   // dt = dt_base * (min gap / initial min gap)^p
    double t_max = 0.0;         // censoring horizon
    long max_steps = 200000000; // hard safety cap
    bool bridge_detection = true;  // sub-step Brownian-bridge crossing tests

    // Classifying at the detection threshold carries an O(sqrt(epsilon))
    // bias toward the free arc (the gap can still escape from epsilon and
    // swallow a point). The integrator therefore keeps going after first
    // contact and classifies at this much smaller gap. 0 = 1e-4 * epsilon.
    double epsilon_classify = 0.0;

    // Startup refinement: dt <= max(startup_factor * t, startup floor).
    // Costs ~100 steps and resolves the base of the traced curve.
    double startup_factor = 0.125;

    /// dt_base = 1e-3 * g0^2, epsilon = 1e-4 * g0, t_max = 400 * span^2
    /// with g0 the initial minimum gap.
    static StepControl defaults_for(const BoundaryConfig& config);
    void validate() const;
};

enum class Outcome { FreeArc, SwallowedPoint, AnomalousSamePolarity, Censored };

struct OutcomeRecord {
    Outcome outcome = Outcome::Censored;
    int point_index = 0;          // original 1-based index, point outcomes only
    std::string censor_reason;    // "t_max" | "nonfinite" | "max_steps"
    double T = 0.0;
    DrivingState final_state;
    long steps = 0;
};

struct Observables {
    double j = 0.0;        // J_t, the signed force-term sum
    double log_z = 0.0;    // log Z_t
    double n_weight = 1.0; // N_t = exp(-1/8 int J^2 ds)
    double m = 1.0;        // M_t = Z_t^{1/4} N_t
    double m_tilde = 1.0;  // current hitting probability g(a(t), b_1(t), ...)
};

/// Original 1-based index of b_img slot s (0-based) when b_k is excluded.
inline int tracked_original_index(int slot, int k) {
    return (slot + 1 < k) ? slot + 1 : slot + 2;
}

/// +1 when the tracked point has the parity of k (I_k side), -1 otherwise.
inline double tracked_parity_sign(int slot, int k) {
    return ((tracked_original_index(slot, k) - k) % 2 == 0) ? 1.0 : -1.0;
}

DrivingState initial_state(const BoundaryConfig& config);

/// Drift of the driving coordinate: -1/(w - a) + sum_{I_k} F - sum_{J_k} F.
double drift_general(const DrivingState& state, const BoundaryConfig& config);

/// One Euler-Maruyama update of the full system (noise coefficient 2).
void step_general(DrivingState& state, const BoundaryConfig& config, double dB, double dt);

/// One Euler-Maruyama update of SLE_kappa(rho): returns (w', v').
std::pair<double, double> step_sle_kappa_rho(double w, double v, const SleParams& params,
                                             double dB, double dt);

/// Threshold classification of the current state. FreeArc when w - a <= eps;
/// point outcomes by smallest gap, with lower points that have collapsed onto
/// a (b_i - a <= eps) counting as free-arc hits.
std::optional<OutcomeRecord> detect_collision(const DrivingState& state,
                                              const BoundaryConfig& config, double epsilon);

/// True iff some guard ratio left (1/n_guard, 1 - 1/n_guard): the localization
/// stopping time used to keep martingale arguments away from degeneracy.
bool guard_time_hit(const DrivingState& state, const BoundaryConfig& config, int n_guard);

Observables observables(const DrivingState& state, const BoundaryConfig& config);

/// Which drift drives the trajectory: the full multi-force-point system, or
/// plain SLE_4(-1) with the b_i tracked passively (Girsanov reference law).
enum class DriveLaw { General, SleReference };

/// Per-step observer for diagnostics and checkpoint recording. on_increment
/// fires before each update with the noise increment; on_step fires after
/// every accepted step (and once for the initial state).
class StepHook {
  public:
    virtual ~StepHook() = default;
    virtual void on_increment(const DrivingState& /*prev*/, double /*dB*/, double /*dt*/) {}
    virtual void on_step(const DrivingState& state) = 0;
};

/// Integrate from the initial configuration until a collision classifies the
/// trajectory or t_max censors it. Deterministic given (config, ctrl, seed).
/// forced_times, if provided, must be increasing; steps land on them exactly.
OutcomeRecord run_trajectory(const BoundaryConfig& config, const StepControl& ctrl,
                             uint64_t seed, DriveLaw law = DriveLaw::General,
                             StepHook* hook = nullptr,
                             std::span<const double> forced_times = {});

}  // namespace levelline
