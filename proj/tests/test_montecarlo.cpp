#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "levelline/formula.hpp"
#include "levelline/montecarlo.hpp"

using namespace levelline;

namespace {

BoundaryConfig make_config(double a, std::vector<double> b, int k) {
    BoundaryConfig cfg;
    cfg.a = a;
    cfg.b = std::move(b);
    cfg.k = k;
    return cfg;
}

bool same_summary(const McSummary& x, const McSummary& y) {
    return x.n_total == y.n_total && x.n_free == y.n_free && x.n_anomalous == y.n_anomalous &&
           x.n_censored == y.n_censored && x.n_point == y.n_point &&
           x.p_free_hat == y.p_free_hat && x.ci_low == y.ci_low && x.ci_high == y.ci_high;
}

}  // namespace

TEST_CASE("wilson_interval") {
    auto [lo0, hi0] = wilson_interval(0, 100, 1.96);
    CHECK(lo0 == 0.0);
    CHECK(hi0 == doctest::Approx(0.0369948).epsilon(1e-5));

    auto [lo, hi] = wilson_interval(50, 100, 1.96);
    CHECK(lo == doctest::Approx(0.4038298).epsilon(1e-6));
    CHECK(hi == doctest::Approx(0.5961702).epsilon(1e-6));

    auto [lo1, hi1] = wilson_interval(100, 100, 1.96);
    CHECK(hi1 == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(lo1 < 1.0);

    CHECK_THROWS_AS(wilson_interval(1, 0, 1.96), std::invalid_argument);
    CHECK_THROWS_AS(wilson_interval(5, 3, 1.96), std::invalid_argument);
}

TEST_CASE("estimate hits the closed form within 3 sigma") {
    auto cfg = make_config(0, {1, 4}, 1);
    auto ctrl = StepControl::defaults_for(cfg);
    const long n = 4000;
    auto s = estimate(cfg, ctrl, n, 21, 0);
    CHECK(s.n_total == n);
    const double g = hit_free_arc_probability(cfg);
    auto [lo, hi] = wilson_interval(s.n_free, s.n_completed(), 3.0);
    CHECK(g >= lo);
    CHECK(g <= hi);
    CHECK(s.censored_fraction < 0.005);
}

TEST_CASE("estimate on n=1: every completed run ends on the free arc") {
    auto cfg = make_config(-1, {2}, 1);
    auto ctrl = StepControl::defaults_for(cfg);
    auto s = estimate(cfg, ctrl, 300, 5, 0);
    CHECK(s.n_free == s.n_completed());
    CHECK(s.p_free_hat == 1.0);
}

TEST_CASE("worker count does not change the result") {
    auto cfg = make_config(0, {1, 4, 9}, 2);
    auto ctrl = StepControl::defaults_for(cfg);
    std::vector<TrajRow> rows1, rows2;
    auto s1 = estimate(cfg, ctrl, 500, 77, 1, &rows1);
    auto s2 = estimate(cfg, ctrl, 500, 77, 2, &rows2);
    auto s3 = estimate_serial(cfg, ctrl, 500, 77);
    CHECK(same_summary(s1, s2));
    CHECK(same_summary(s1, s3));
    REQUIRE(rows1.size() == rows2.size());
    for (std::size_t i = 0; i < rows1.size(); ++i) {
        CHECK(rows1[i].outcome == rows2[i].outcome);
        CHECK(rows1[i].T == rows2[i].T);
        CHECK(rows1[i].steps == rows2[i].steps);
    }
}

TEST_CASE("seed discipline: any trajectory reproduces in isolation") {
    auto cfg = make_config(0, {1, 2, 5, 7}, 1);
    auto ctrl = StepControl::defaults_for(cfg);
    std::vector<TrajRow> rows;
    estimate(cfg, ctrl, 64, 1234, 0, &rows);
    for (long i : {5L, 17L, 63L}) {
        auto r = run_trajectory(cfg, ctrl, 1234 + static_cast<uint64_t>(i));
        CHECK(r.outcome == rows[i].outcome);
        CHECK(r.T == rows[i].T);
        CHECK(r.steps == rows[i].steps);
    }
}

TEST_CASE("merge is associative on counts") {
    auto cfg = make_config(0, {1, 4}, 1);
    auto ctrl = StepControl::defaults_for(cfg);
    auto a = estimate(cfg, ctrl, 200, 1, 0);
    auto b = estimate(cfg, ctrl, 300, 500, 0);
    auto c = estimate(cfg, ctrl, 250, 900, 0);
    auto left = merge(merge(a, b), c);
    auto right = merge(a, merge(b, c));
    CHECK(same_summary(left, right));
    CHECK(left.n_total == 750);
    // Derived stats recomputed from counts.
    auto [lo, hi] = wilson_interval(left.n_free, left.n_completed(), 1.96);
    CHECK(left.ci_low == lo);
    CHECK(left.ci_high == hi);
}

TEST_CASE("martingale constancy holds on the benchmark config") {
    auto cfg = make_config(0, {1, 4}, 1);
    auto ctrl = StepControl::defaults_for(cfg);
    const double ts = cfg.span() * cfg.span();
    auto rep = martingale_constancy(cfg, ctrl, 3000, {0.01 * ts, 0.05 * ts, 0.1 * ts}, 100, 31, 0);
    CHECK(rep.m0 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    for (std::size_t c = 0; c < rep.checkpoints.size(); ++c) {
        CHECK(std::abs(rep.means[c] - rep.m0) <= 2.0 * rep.std_errs[c]);
    }
    CHECK(rep.free_terminal_mean >= 0.9);
    CHECK(rep.point_terminal_mean <= 0.1);
    CHECK(rep.summary.passed);
}

TEST_CASE("girsanov check is trivial at n=1 and passes at n=2") {
    // The histogram L1 statistic has a sqrt(4 bins / (pi n)) noise floor, so
    // the 0.05 threshold needs n of a few 10^4 even when the laws agree.
    auto cfg1 = make_config(0, {1}, 1);
    auto ctrl1 = StepControl::defaults_for(cfg1);
    auto rep1 = girsanov_check(cfg1, ctrl1, 30000, 0.01, 100, 7, 0);
    CHECK(rep1.ess_fraction == doctest::Approx(1.0).epsilon(1e-12));  // weights identically 1
    CHECK(rep1.summary.passed);

    auto cfg2 = make_config(0, {1, 4}, 1);
    auto ctrl2 = StepControl::defaults_for(cfg2);
    auto rep2 = girsanov_check(cfg2, ctrl2, 30000, 0.16, 100, 7, 0);
    CHECK(rep2.ess_fraction > 0.5);
    CHECK(rep2.mean_discrepancy_se < 3.0);
    CHECK(rep2.hist_l1 < 0.05);
    CHECK(rep2.summary.passed);
}

TEST_CASE("lemma1 identity at refined dt") {
    auto cfg = make_config(0, {1, 4}, 1);
    auto ctrl = StepControl::defaults_for(cfg);
    ctrl.dt_base /= 10.0;
    const double ts = cfg.span() * cfg.span();
    auto rep = lemma1_check(cfg, ctrl, 400, 0.05 * ts, 50, 11, 0);
    CHECK(rep.n_traj_used >= 399);
    CHECK(rep.qv_rel_error < 0.05);
    CHECK(std::abs(rep.residual_mean) <= 3.0 * rep.residual_se);
    CHECK(rep.summary.passed);
}
