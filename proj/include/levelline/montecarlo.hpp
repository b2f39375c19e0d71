#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "levelline/boundary.hpp"
#include "levelline/sde.hpp"

namespace levelline {

std::pair<double, double> wilson_interval(long successes, long total, double z);

const char* outcome_name(Outcome o);

/// Outcome tally of a trajectory ensemble. Counts are exact and merge
/// associatively; derived statistics are recomputed from counts.
struct McSummary {
    long n_total = 0;
    long n_free = 0;
    long n_anomalous = 0;
    long n_censored = 0;
    std::map<int, long> n_point;  // per original index
    std::map<std::string, long> n_censor_reason;

    double p_free_hat = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double censored_fraction = 0.0;
    uint64_t seed_base = 0;

    long n_completed() const { return n_total - n_censored; }
    /// Recomputes the estimate and Wilson bounds (z sigma) from the counts,
    /// excluding censored runs.
    void recompute(double z = 1.96);
};

McSummary merge(const McSummary& x, const McSummary& y);

/// Per-trajectory record for the optional outcomes CSV.
struct TrajRow {
    Outcome outcome;
    int point_index;
    double T;
    long steps;
};

/// Runs n_traj independent trajectories (seed = seed_base + index) and
/// tallies outcomes. The result is identical for any worker count: each
/// trajectory is a pure function of its seed and the tally is order-fixed.
McSummary estimate(const BoundaryConfig& config, const StepControl& ctrl, long n_traj,
                   uint64_t seed_base, int workers, std::vector<TrajRow>* rows = nullptr);

/// Serial reference implementation (no OpenMP), kept for testing and
/// benchmarking against the parallel path.
McSummary estimate_serial(const BoundaryConfig& config, const StepControl& ctrl, long n_traj,
                          uint64_t seed_base, std::vector<TrajRow>* rows = nullptr);

struct CheckReport {
    std::string name;
    double statistic = 0.0;
    double threshold = 0.0;
    bool passed = false;
    std::string details;
};

/// Lemma-2 verification: sample means of the stopped hitting-probability
/// martingale at each checkpoint stay within 2 SE of its initial value, and
/// terminal values separate by outcome (near 1 on FreeArc, near 0 on point
/// hits).
struct MartingaleReport {
    double m0 = 0.0;
    std::vector<double> checkpoints;
    std::vector<double> means;
    std::vector<double> std_errs;
    std::vector<long> counts;
    double free_terminal_mean = 0.0;
    double point_terminal_mean = 0.0;
    long n_free = 0;
    long n_point = 0;
    long n_censored = 0;
    CheckReport summary;
};

MartingaleReport martingale_constancy(const BoundaryConfig& config, const StepControl& ctrl,
                                      long n_traj, const std::vector<double>& checkpoints,
                                      int n_guard, uint64_t seed_base, int workers);

/// Girsanov verification: the law of the driving value at
/// t_check ^ T_guard ^ T under the general system matches the
/// (M_t/M_0)-weighted law under SLE_4(-1) with passively tracked points.
struct GirsanovReport {
    double t_check = 0.0;
    double mean_general = 0.0, se_general = 0.0;
    double mean_weighted = 0.0, se_weighted = 0.0;
    double mean_discrepancy_se = 0.0;  // |diff| / combined SE
    double hist_l1 = 0.0;
    double ess_fraction = 0.0;
    double early_stop_fraction = 0.0;  // guard/collision before t_check
    bool inconclusive = false;
    CheckReport summary;
};

GirsanovReport girsanov_check(const BoundaryConfig& config, const StepControl& ctrl, long n_traj,
                              double t_check, int n_guard, uint64_t seed_base, int workers);

/// Lemma-1 verification at step level: the realized quadratic variation of
/// log Z matches 4 int J^2 ds, and the per-step residual
/// dlogZ - 2 J dB is centered.
struct Lemma1Report {
    double qv_realized = 0.0;
    double qv_predicted = 0.0;  // 4 int J^2 ds
    double qv_rel_error = 0.0;
    double residual_mean = 0.0;
    double residual_se = 0.0;
    long n_steps = 0;
    long n_traj_used = 0;
    CheckReport summary;
};

Lemma1Report lemma1_check(const BoundaryConfig& config, const StepControl& ctrl, long n_traj,
                          double t_horizon, int n_guard, uint64_t seed_base, int workers);

}  // namespace levelline
