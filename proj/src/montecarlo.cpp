#include "levelline/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "levelline/formula.hpp"

namespace levelline {

namespace {

void for_each_trajectory(long n_traj, int workers, const std::function<void(long)>& body) {
#ifdef _OPENMP
    if (workers != 1) {
        if (workers > 0) {
#pragma omp parallel for schedule(dynamic, 16) num_threads(workers)
            for (long i = 0; i < n_traj; ++i) body(i);
        } else {
#pragma omp parallel for schedule(dynamic, 16)
            for (long i = 0; i < n_traj; ++i) body(i);
        }
        return;
    }
#else
    (void)workers;
#endif
    for (long i = 0; i < n_traj; ++i) body(i);
}

McSummary tally(const std::vector<OutcomeRecord>& recs, uint64_t seed_base,
                std::vector<TrajRow>* rows) {
    McSummary s;
    s.seed_base = seed_base;
    for (const OutcomeRecord& r : recs) {
        ++s.n_total;
        switch (r.outcome) {
            case Outcome::FreeArc: ++s.n_free; break;
            case Outcome::SwallowedPoint: ++s.n_point[r.point_index]; break;
            case Outcome::AnomalousSamePolarity:
                ++s.n_anomalous;
                ++s.n_point[r.point_index];
                break;
            case Outcome::Censored:
                ++s.n_censored;
                ++s.n_censor_reason[r.censor_reason];
                break;
        }
        if (rows) rows->push_back({r.outcome, r.point_index, r.T, r.steps});
    }
    s.recompute();
    return s;
}

double mean_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return v.empty() ? 0.0 : m / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / (static_cast<double>(v.size() - 1) * static_cast<double>(v.size())));
}

}  // namespace

const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::FreeArc: return "free_arc";
        case Outcome::SwallowedPoint: return "swallowed_point";
        case Outcome::AnomalousSamePolarity: return "anomalous_same_polarity";
        case Outcome::Censored: return "censored";
    }
    return "?";
}

std::pair<double, double> wilson_interval(long successes, long total, double z) {
    if (total < 1 || successes < 0 || successes > total) {
        throw std::invalid_argument("wilson_interval: require 0 <= successes <= total, total >= 1");
    }
    const double n = static_cast<double>(total);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

void McSummary::recompute(double z) {
    const long completed = n_completed();
    censored_fraction =
        (n_total > 0) ? static_cast<double>(n_censored) / static_cast<double>(n_total) : 0.0;
    if (completed < 1) {
        p_free_hat = ci_low = ci_high = 0.0;
        return;
    }
    p_free_hat = static_cast<double>(n_free) / static_cast<double>(completed);
    auto [lo, hi] = wilson_interval(n_free, completed, z);
    ci_low = lo;
    ci_high = hi;
}

McSummary merge(const McSummary& x, const McSummary& y) {
    McSummary s = x;
    s.n_total += y.n_total;
    s.n_free += y.n_free;
    s.n_anomalous += y.n_anomalous;
    s.n_censored += y.n_censored;
    for (const auto& [i, c] : y.n_point) s.n_point[i] += c;
    for (const auto& [r, c] : y.n_censor_reason) s.n_censor_reason[r] += c;
    s.recompute();
    return s;
}

McSummary estimate(const BoundaryConfig& config, const StepControl& ctrl, long n_traj,
                   uint64_t seed_base, int workers, std::vector<TrajRow>* rows) {
    if (n_traj < 1) throw std::invalid_argument("estimate: n_traj must be >= 1");
    config.validate();
    ctrl.validate();
    std::vector<OutcomeRecord> recs(n_traj);
    for_each_trajectory(n_traj, workers, [&](long i) {
        recs[i] = run_trajectory(config, ctrl, seed_base + static_cast<uint64_t>(i));
    });
    return tally(recs, seed_base, rows);
}

McSummary estimate_serial(const BoundaryConfig& config, const StepControl& ctrl, long n_traj,
                          uint64_t seed_base, std::vector<TrajRow>* rows) {
    if (n_traj < 1) throw std::invalid_argument("estimate_serial: n_traj must be >= 1");
    config.validate();
    ctrl.validate();
    std::vector<OutcomeRecord> recs(n_traj);
    for (long i = 0; i < n_traj; ++i) {
        recs[i] = run_trajectory(config, ctrl, seed_base + static_cast<uint64_t>(i));
    }
    return tally(recs, seed_base, rows);
}

namespace {

/// Freezes the hitting-probability observable at checkpoint ^ guard ^ end.
class MTildeRecorder : public StepHook {
  public:
    MTildeRecorder(const BoundaryConfig& config, const std::vector<double>& checkpoints,
                   int n_guard)
        : config_(config), checkpoints_(checkpoints), n_guard_(n_guard),
          values_(checkpoints.size(), -1.0) {}

    void on_step(const DrivingState& state) override {
        if (next_ >= checkpoints_.size()) return;
        if (!frozen_ && guard_time_hit(state, config_, n_guard_)) {
            frozen_ = true;
            frozen_value_ = observables(state, config_).m_tilde;
        }
        while (next_ < checkpoints_.size() && state.t >= checkpoints_[next_] - 1e-12) {
            values_[next_++] =
                frozen_ ? frozen_value_ : observables(state, config_).m_tilde;
        }
    }

    /// Backfills checkpoints not reached before the trajectory ended.
    void finish(const OutcomeRecord& rec) {
        if (next_ >= checkpoints_.size()) return;
        double v = frozen_ ? frozen_value_ : observables(rec.final_state, config_).m_tilde;
        while (next_ < checkpoints_.size()) values_[next_++] = v;
    }

    const std::vector<double>& values() const { return values_; }

  private:
    const BoundaryConfig& config_;
    const std::vector<double>& checkpoints_;
    int n_guard_;
    std::vector<double> values_;
    std::size_t next_ = 0;
    bool frozen_ = false;
    double frozen_value_ = 0.0;
};

}  // namespace

MartingaleReport martingale_constancy(const BoundaryConfig& config, const StepControl& ctrl,
                                      long n_traj, const std::vector<double>& checkpoints,
                                      int n_guard, uint64_t seed_base, int workers) {
    if (n_traj < 2) throw std::invalid_argument("martingale_constancy: n_traj must be >= 2");
    for (std::size_t i = 1; i < checkpoints.size(); ++i) {
        if (!(checkpoints[i] > checkpoints[i - 1])) {
            throw std::invalid_argument("martingale_constancy: checkpoints must increase");
        }
    }
    config.validate();
    ctrl.validate();

    const std::size_t n_cp = checkpoints.size();
    std::vector<std::vector<double>> cp_values(n_traj);  // per trajectory
    std::vector<double> terminal(n_traj, -1.0);
    std::vector<int> kind(n_traj, 0);  // 0 censored, 1 free, 2 point

    for_each_trajectory(n_traj, workers, [&](long i) {
        MTildeRecorder rec(config, checkpoints, n_guard);
        OutcomeRecord out = run_trajectory(config, ctrl, seed_base + static_cast<uint64_t>(i),
                                           DriveLaw::General, &rec, checkpoints);
        rec.finish(out);
        cp_values[i] = rec.values();
        if (out.outcome == Outcome::FreeArc) {
            kind[i] = 1;
            terminal[i] = observables(out.final_state, config).m_tilde;
        } else if (out.outcome == Outcome::SwallowedPoint ||
                   out.outcome == Outcome::AnomalousSamePolarity) {
            kind[i] = 2;
            terminal[i] = observables(out.final_state, config).m_tilde;
        }
    });

    MartingaleReport rep;
    rep.checkpoints = checkpoints;
    rep.m0 = hit_free_arc_probability(config);
    rep.means.resize(n_cp);
    rep.std_errs.resize(n_cp);
    rep.counts.resize(n_cp);
    for (std::size_t c = 0; c < n_cp; ++c) {
        std::vector<double> vals;
        vals.reserve(n_traj);
        for (long i = 0; i < n_traj; ++i) {
            if (kind[i] != 0) vals.push_back(cp_values[i][c]);
        }
        rep.counts[c] = static_cast<long>(vals.size());
        rep.means[c] = mean_of(vals);
        rep.std_errs[c] = se_of(vals, rep.means[c]);
    }
    double free_sum = 0.0, point_sum = 0.0;
    for (long i = 0; i < n_traj; ++i) {
        if (kind[i] == 1) {
            free_sum += terminal[i];
            ++rep.n_free;
        } else if (kind[i] == 2) {
            point_sum += terminal[i];
            ++rep.n_point;
        } else {
            ++rep.n_censored;
        }
    }
    rep.free_terminal_mean = rep.n_free > 0 ? free_sum / rep.n_free : 0.0;
    rep.point_terminal_mean = rep.n_point > 0 ? point_sum / rep.n_point : 0.0;

    double worst_dev = 0.0;
    bool pass = true;
    std::ostringstream details;
    details.precision(6);
    for (std::size_t c = 0; c < n_cp; ++c) {
        const double dev = (rep.std_errs[c] > 0.0)
                               ? std::abs(rep.means[c] - rep.m0) / rep.std_errs[c]
                               : 0.0;
        worst_dev = std::max(worst_dev, dev);
        if (dev > 2.0) pass = false;
        details << "t=" << checkpoints[c] << " mean=" << rep.means[c] << " se=" << rep.std_errs[c]
                << " dev=" << dev << "SE; ";
    }
    details << "terminal free=" << rep.free_terminal_mean
            << " point=" << rep.point_terminal_mean << " (n=" << rep.n_free << "/" << rep.n_point
            << ")";
    if (rep.n_free > 0 && rep.free_terminal_mean < 0.9) pass = false;
    if (rep.n_point > 0 && rep.point_terminal_mean > 0.1) pass = false;
    rep.summary = {"martingale_constancy", worst_dev, 2.0, pass, details.str()};
    return rep;
}

namespace {

/// Records the state at the first of: guard hit, end of run. (Collisions are
/// handled by the caller through the outcome record.)
class StopRecorder : public StepHook {
  public:
    StopRecorder(const BoundaryConfig& config, int n_guard)
        : config_(config), n_guard_(n_guard) {}

    void on_step(const DrivingState& state) override {
        if (done_) return;
        if (guard_time_hit(state, config_, n_guard_)) {
            stopped_ = state;
            done_ = true;
        }
    }

    bool guard_fired() const { return done_; }
    const DrivingState& stopped() const { return stopped_; }

  private:
    const BoundaryConfig& config_;
    int n_guard_;
    DrivingState stopped_;
    bool done_ = false;
};

}  // namespace

GirsanovReport girsanov_check(const BoundaryConfig& config, const StepControl& ctrl, long n_traj,
                              double t_check, int n_guard, uint64_t seed_base, int workers) {
    if (n_traj < 10) throw std::invalid_argument("girsanov_check: n_traj must be >= 10");
    if (!(t_check > 0.0)) throw std::invalid_argument("girsanov_check: t_check must be positive");
    config.validate();
    ctrl.validate();

    StepControl stop_ctrl = ctrl;
    stop_ctrl.t_max = t_check;
    const std::vector<double> forced = {t_check};

    const double m0 = observables(initial_state(config), config).m;

    std::vector<double> x_gen(n_traj), x_ref(n_traj), w_ref(n_traj);
    std::vector<char> early(2 * n_traj, 0);

    auto run_side = [&](DriveLaw law, uint64_t seed_offset, long i, double& x_out,
                        double* weight_out, char& early_out) {
        StopRecorder rec(config, n_guard);
        OutcomeRecord out = run_trajectory(config, stop_ctrl, seed_base + seed_offset + i, law,
                                           &rec, forced);
        DrivingState stopped;
        if (rec.guard_fired() && rec.stopped().t <= out.final_state.t) {
            stopped = rec.stopped();
        } else {
            stopped = out.final_state;
        }
        x_out = stopped.w;
        if (weight_out) *weight_out = observables(stopped, config).m / m0;
        early_out = (rec.guard_fired() || out.outcome != Outcome::Censored ||
                     out.censor_reason != "t_max")
                        ? 1
                        : 0;
    };

    for_each_trajectory(n_traj, workers, [&](long i) {
        run_side(DriveLaw::General, 0, i, x_gen[i], nullptr, early[i]);
        run_side(DriveLaw::SleReference, 0x9e3779b9, i, x_ref[i], &w_ref[i], early[n_traj + i]);
    });

    GirsanovReport rep;
    rep.t_check = t_check;
    long n_early = 0;
    for (char e : early) n_early += e;
    rep.early_stop_fraction = static_cast<double>(n_early) / static_cast<double>(2 * n_traj);

    rep.mean_general = mean_of(x_gen);
    rep.se_general = se_of(x_gen, rep.mean_general);

    double wsum = 0.0, w2sum = 0.0;
    for (long i = 0; i < n_traj; ++i) {
        wsum += w_ref[i];
        w2sum += w_ref[i] * w_ref[i];
    }
    double wx = 0.0;
    for (long i = 0; i < n_traj; ++i) wx += w_ref[i] * x_ref[i];
    rep.mean_weighted = wx / wsum;
    double var_num = 0.0;
    for (long i = 0; i < n_traj; ++i) {
        const double d = x_ref[i] - rep.mean_weighted;
        var_num += w_ref[i] * w_ref[i] * d * d;
    }
    rep.se_weighted = std::sqrt(var_num) / wsum;
    rep.ess_fraction = (wsum * wsum / w2sum) / static_cast<double>(n_traj);

    const double se_comb =
        std::sqrt(rep.se_general * rep.se_general + rep.se_weighted * rep.se_weighted);
    rep.mean_discrepancy_se =
        se_comb > 0.0 ? std::abs(rep.mean_general - rep.mean_weighted) / se_comb : 0.0;

    // Histogram L1 distance on a common deterministic binning.
    const int n_bins = 25;
    const double sd_gen =
        rep.se_general * std::sqrt(static_cast<double>(n_traj));
    const double lo = rep.mean_general - 5.0 * sd_gen;
    const double hi = rep.mean_general + 5.0 * sd_gen;
    std::vector<double> p(n_bins, 0.0), q(n_bins, 0.0);
    auto bin_of = [&](double x) {
        int b = static_cast<int>(std::floor((x - lo) / (hi - lo) * n_bins));
        return std::clamp(b, 0, n_bins - 1);
    };
    for (long i = 0; i < n_traj; ++i) p[bin_of(x_gen[i])] += 1.0 / static_cast<double>(n_traj);
    for (long i = 0; i < n_traj; ++i) q[bin_of(x_ref[i])] += w_ref[i] / wsum;
    for (int b = 0; b < n_bins; ++b) rep.hist_l1 += std::abs(p[b] - q[b]);

    rep.inconclusive = rep.ess_fraction < 0.10;
    const bool pass =
        !rep.inconclusive && rep.mean_discrepancy_se < 3.0 && rep.hist_l1 < 0.05;
    std::ostringstream details;
    details.precision(6);
    details << "mean_gen=" << rep.mean_general << " mean_wref=" << rep.mean_weighted
            << " dev=" << rep.mean_discrepancy_se << "SE l1=" << rep.hist_l1
            << " ess=" << rep.ess_fraction << " early_stop=" << rep.early_stop_fraction;
    if (rep.inconclusive) details << " [inconclusive: ess < 10%]";
    rep.summary = {"girsanov_reweighting", rep.mean_discrepancy_se, 3.0, pass, details.str()};
    return rep;
}

namespace {

/// Accumulates the quadratic variation of log Z, its Ito prediction, and the
/// per-step martingale residual dlogZ - 2 J dB, stopped at guard ^ horizon.
class Lemma1Recorder : public StepHook {
  public:
    Lemma1Recorder(const BoundaryConfig& config, double t_horizon, int n_guard)
        : config_(config), t_horizon_(t_horizon), n_guard_(n_guard) {}

    void on_increment(const DrivingState&, double dB, double dt) override {
        db_ = dB;
        dt_ = dt;
    }

    void on_step(const DrivingState& state) override {
        if (done_) return;
        if (!has_prev_) {
            prev_ = state;
            prev_obs_ = observables(state, config_);
            has_prev_ = true;
            return;
        }
        const double dt = dt_;
        const Observables obs = observables(state, config_);
        const double dlogz = obs.log_z - prev_obs_.log_z;
        const double dB = db_;
        const double j = prev_obs_.j;

        qv_ += dlogz * dlogz;
        pred_ += 4.0 * j * j * dt;
        const double res = dlogz - 2.0 * j * dB;
        res_sum_ += res;
        res_sq_ += res * res;
        ++n_steps_;

        prev_ = state;
        prev_obs_ = obs;
        if (state.t >= t_horizon_ || guard_time_hit(state, config_, n_guard_)) done_ = true;
    }

    double qv() const { return qv_; }
    double pred() const { return pred_; }
    double res_sum() const { return res_sum_; }
    double res_sq() const { return res_sq_; }
    long n_steps() const { return n_steps_; }

  private:
    const BoundaryConfig& config_;
    double t_horizon_;
    int n_guard_;
    DrivingState prev_;
    Observables prev_obs_;
    bool has_prev_ = false;
    bool done_ = false;
    double qv_ = 0.0, pred_ = 0.0, res_sum_ = 0.0, res_sq_ = 0.0;
    double db_ = 0.0, dt_ = 0.0;
    long n_steps_ = 0;
};

}  // namespace

Lemma1Report lemma1_check(const BoundaryConfig& config, const StepControl& ctrl, long n_traj,
                          double t_horizon, int n_guard, uint64_t seed_base, int workers) {
    if (n_traj < 2) throw std::invalid_argument("lemma1_check: n_traj must be >= 2");
    config.validate();
    ctrl.validate();
    StepControl run_ctrl = ctrl;
    run_ctrl.t_max = std::min(run_ctrl.t_max, 2.0 * t_horizon);

    std::vector<double> qv(n_traj), pred(n_traj), rsum(n_traj), rsq(n_traj);
    std::vector<long> nst(n_traj);
    // Lemma 1 lives under SLE_4(-1): there d log Z = 2 J dB with no drift.
    // (Under the general law log Z picks up a +J^2 dt drift instead.)
    for_each_trajectory(n_traj, workers, [&](long i) {
        Lemma1Recorder rec(config, t_horizon, n_guard);
        run_trajectory(config, run_ctrl, seed_base + static_cast<uint64_t>(i),
                       DriveLaw::SleReference, &rec);
        qv[i] = rec.qv();
        pred[i] = rec.pred();
        rsum[i] = rec.res_sum();
        rsq[i] = rec.res_sq();
        nst[i] = rec.n_steps();
    });

    Lemma1Report rep;
    double rs = 0.0, rss = 0.0;
    for (long i = 0; i < n_traj; ++i) {
        rep.qv_realized += qv[i];
        rep.qv_predicted += pred[i];
        rs += rsum[i];
        rss += rsq[i];
        rep.n_steps += nst[i];
        if (nst[i] > 0) ++rep.n_traj_used;
    }
    rep.qv_rel_error = (rep.qv_predicted > 0.0)
                           ? std::abs(rep.qv_realized - rep.qv_predicted) / rep.qv_predicted
                           : 0.0;
    const double n = static_cast<double>(rep.n_steps);
    rep.residual_mean = rs / n;
    const double var = std::max(0.0, rss / n - rep.residual_mean * rep.residual_mean);
    rep.residual_se = std::sqrt(var / n);
    const double res_dev =
        rep.residual_se > 0.0 ? std::abs(rep.residual_mean) / rep.residual_se : 0.0;

    const bool pass = rep.qv_rel_error < 0.05 && res_dev < 3.0;
    std::ostringstream details;
    details.precision(6);
    details << "qv=" << rep.qv_realized << " 4intJ2=" << rep.qv_predicted
            << " rel_err=" << rep.qv_rel_error << " residual=" << rep.residual_mean << "+-"
            << rep.residual_se << " (" << res_dev << "SE) over " << rep.n_steps << " steps";
    rep.summary = {"lemma1_identity", rep.qv_rel_error, 0.05, pass, details.str()};
    return rep;
}

}  // namespace levelline
