#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "levelline/boundary.hpp"
#include "levelline/formula.hpp"
#include "levelline/rng.hpp"
#include "levelline/sde.hpp"

using namespace levelline;

namespace {

BoundaryConfig make_config(double a, std::vector<double> b, int k) {
    BoundaryConfig cfg;
    cfg.a = a;
    cfg.b = std::move(b);
    cfg.k = k;
    return cfg;
}

DrivingState make_state(double w, double a, std::vector<double> b_img, double t = 0.0) {
    DrivingState s;
    s.w = w;
    s.a_img = a;
    s.b_img = std::move(b_img);
    s.t = t;
    return s;
}

}  // namespace

TEST_CASE("counter rng basic statistics") {
    // Mean and variance of the counter-based gaussian over 10^6 draws.
    const long n = 1000000;
    double sum = 0.0, sum2 = 0.0, lag = 0.0;
    double prev = rng::gaussian(99, 0, 0);
    for (long i = 1; i < n; ++i) {
        const double x = rng::gaussian(99, 0, i);
        sum += x;
        sum2 += x * x;
        lag += x * prev;
        prev = x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
    CHECK(var == doctest::Approx(1.0).epsilon(0.01));
    CHECK(std::abs(lag / n) < 4.0 / std::sqrt(static_cast<double>(n)));
    // Pure function of the counter.
    CHECK(rng::gaussian(99, 3, 17) == rng::gaussian(99, 3, 17));
    CHECK(rng::gaussian(99, 3, 17) != rng::gaussian(99, 3, 18));
}

TEST_CASE("drift_general examples") {
    auto cfg1 = make_config(0, {1}, 1);
    CHECK(drift_general(initial_state(cfg1), cfg1) == doctest::Approx(-1.0).epsilon(1e-14));

    auto cfg2 = make_config(0, {1, 4}, 1);
    CHECK(drift_general(initial_state(cfg2), cfg2) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    // -1/4 - F(4,1,0) - F(4,9,0) = -1/4 - 1/3 + 3/5 = 1/60
    auto cfg3 = make_config(0, {1, 4, 9}, 2);
    CHECK(drift_general(initial_state(cfg3), cfg3) == doctest::Approx(1.0 / 60.0).epsilon(1e-12));

    auto bad = make_state(1.0, 1.0, {});
    CHECK_THROWS_AS(drift_general(bad, cfg1), std::invalid_argument);
}

TEST_CASE("step_general single-step arithmetic") {
    auto cfg = make_config(0, {1}, 1);
    auto s = initial_state(cfg);
    step_general(s, cfg, 0.0, 1e-4);
    CHECK(s.w == doctest::Approx(0.9999).epsilon(1e-12));
    CHECK(s.a_img == doctest::Approx(-2e-4).epsilon(1e-12));
    CHECK(s.t == doctest::Approx(1e-4));

    auto s2 = initial_state(cfg);
    step_general(s2, cfg, 0.0, 0.0);  // zero step is the identity
    CHECK(s2.w == 1.0);
    CHECK(s2.a_img == 0.0);
    CHECK(s2.t == 0.0);
}

TEST_CASE("step_general mean increment matches the drift") {
    auto cfg = make_config(0, {1, 4}, 1);
    const double dt = 1e-4;
    const double drift = drift_general(initial_state(cfg), cfg);
    const long n = 20000;
    double mean_dw = 0.0;
    for (long i = 0; i < n; ++i) {
        auto s = initial_state(cfg);
        step_general(s, cfg, rng::gaussian(7, 0, i) * std::sqrt(dt), dt);
        mean_dw += s.w - cfg.bk();
    }
    mean_dw /= n;
    const double se = 2.0 * std::sqrt(dt) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(mean_dw - drift * dt) < 3.0 * se);
}

TEST_CASE("step_sle_kappa_rho") {
    SleParams p{4.0, -1.0, 1.0, 0.0};
    auto [w1, v1] = step_sle_kappa_rho(1.0, 0.0, p, 0.0, 1e-4);
    CHECK(w1 == doctest::Approx(1.0 - 1e-4).epsilon(1e-12));
    CHECK(v1 == doctest::Approx(-2e-4).epsilon(1e-12));

    // rho = 0 decouples the drift of w entirely.
    SleParams p0{4.0, 0.0, 1.0, 0.0};
    auto [w2, v2] = step_sle_kappa_rho(1.0, 0.0, p0, 0.25, 1e-4);
    CHECK(w2 == doctest::Approx(1.0 + 2.0 * 0.25).epsilon(1e-14));
    CHECK(v2 == v1);

    // Coincides with the general system at n = 1 (kappa=4, rho=-1).
    auto cfg = make_config(0, {1}, 1);
    auto s = initial_state(cfg);
    step_general(s, cfg, 0.37, 1e-3);
    auto [w3, v3] = step_sle_kappa_rho(1.0, 0.0, p, 0.37, 1e-3);
    CHECK(s.w == doctest::Approx(w3).epsilon(1e-14));
    CHECK(s.a_img == doctest::Approx(v3).epsilon(1e-14));

    CHECK_THROWS_AS(step_sle_kappa_rho(1.0, 1.0, p, 0.0, 1e-4), std::invalid_argument);
}

TEST_CASE("detect_collision classification") {
    auto cfg = make_config(0, {1, 4, 9}, 2);  // J = {1, 3}, I = {2}
    const double eps = 1e-4;

    // Free arc: w - a below threshold, everything else far.
    auto s = make_state(4.0, 4.0 - eps / 2, {1.0, 9.0});
    auto c = detect_collision(s, cfg, eps);
    REQUIRE(c.has_value());
    CHECK(c->outcome == Outcome::FreeArc);

    // Point hit on the J side.
    s = make_state(4.0, 0.0, {1.0, 4.0 + eps / 2});
    c = detect_collision(s, cfg, eps);
    REQUIRE(c.has_value());
    CHECK(c->outcome == Outcome::SwallowedPoint);
    CHECK(c->point_index == 3);

    // Lower J point hit while a is far: genuine swallow.
    s = make_state(4.0, 0.0, {4.0 - eps / 2, 9.0});
    c = detect_collision(s, cfg, eps);
    REQUIRE(c.has_value());
    CHECK(c->outcome == Outcome::SwallowedPoint);
    CHECK(c->point_index == 1);

    // Lower point that has itself collapsed onto a: free-arc funnel.
    s = make_state(4.0, 4.0 - eps, {4.0 - eps / 2, 9.0});
    c = detect_collision(s, cfg, eps);
    REQUIRE(c.has_value());
    CHECK(c->outcome == Outcome::FreeArc);

    // No gap below threshold.
    s = make_state(4.0, 0.0, {1.0, 9.0});
    CHECK(!detect_collision(s, cfg, eps).has_value());

    // Same-parity hit is anomalous (diagnostic, not reclassified).
    auto cfg4 = make_config(0, {1, 2, 5, 7}, 1);  // I = {1,3}
    s = make_state(5.0 - eps / 2, 0.0, {2.0, 5.0, 7.0});
    c = detect_collision(s, cfg4, eps);
    REQUIRE(c.has_value());
    CHECK(c->outcome == Outcome::AnomalousSamePolarity);
    CHECK(c->point_index == 3);
}

TEST_CASE("guard_time_hit") {
    auto cfg = make_config(0, {1, 4}, 1);
    auto s = initial_state(cfg);
    CHECK(!guard_time_hit(s, cfg, 10));  // ratio 1/4 inside (0.1, 0.9)
    CHECK(guard_time_hit(s, cfg, 4));    // 1/4 <= 1/4 hits the lower edge
    CHECK(guard_time_hit(s, cfg, 2));    // degenerate guard: (0.5, 0.5) empty

    // ratio 0.95 with n_guard = 10.
    auto s2 = make_state(3.8, 0.0, {4.0});
    CHECK(guard_time_hit(s2, cfg, 10));

    CHECK_THROWS_AS(guard_time_hit(s, cfg, 1), std::invalid_argument);
}

TEST_CASE("observables at the start configuration") {
    auto cfg = make_config(0, {1, 4}, 1);
    auto obs = observables(initial_state(cfg), cfg);
    CHECK(obs.m_tilde == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
    CHECK(obs.n_weight == 1.0);
    CHECK(obs.m == doctest::Approx(std::exp(0.25 * obs.log_z)).epsilon(1e-14));
    // J at t=0: -F(1,4,0) = 4/3
    CHECK(obs.j == doctest::Approx(4.0 / 3.0).epsilon(1e-13));

    auto cfg1 = make_config(0, {1}, 1);
    auto obs1 = observables(initial_state(cfg1), cfg1);
    CHECK(obs1.j == 0.0);
    CHECK(obs1.log_z == 0.0);
    CHECK(obs1.m == 1.0);
    CHECK(obs1.m_tilde == 1.0);
}

TEST_CASE("run_trajectory is deterministic") {
    auto cfg = make_config(0, {1, 4}, 1);
    auto ctrl = StepControl::defaults_for(cfg);
    auto r1 = run_trajectory(cfg, ctrl, 4242);
    auto r2 = run_trajectory(cfg, ctrl, 4242);
    CHECK(r1.outcome == r2.outcome);
    CHECK(r1.point_index == r2.point_index);
    CHECK(r1.T == r2.T);
    CHECK(r1.steps == r2.steps);
    CHECK(r1.final_state.w == r2.final_state.w);
    CHECK(r1.final_state.a_img == r2.final_state.a_img);
    CHECK(r1.final_state.j_sq_integral == r2.final_state.j_sq_integral);

    auto r3 = run_trajectory(cfg, ctrl, 4243);
    CHECK((r3.T != r1.T || r3.steps != r1.steps));
}

namespace {

/// Asserts the monotone-flow invariant after every step.
class MonotoneChecker : public StepHook {
  public:
    explicit MonotoneChecker(int k) : k_(k) {}
    void on_step(const DrivingState& s) override {
        if (!has_prev_) {
            prev_ = s;
            has_prev_ = true;
            return;
        }
        // a moves down, every tracked point moves toward w, and the global
        // order is preserved. (Non-strict: deep in the endgame the update
        // can underflow the ULP of the coordinate.)
        ok_ = ok_ && (s.a_img <= prev_.a_img);
        double lo = s.a_img;
        for (std::size_t i = 0; i < s.b_img.size(); ++i) {
            const bool below = static_cast<int>(i) + 1 < k_;
            if (below) {
                ok_ = ok_ && s.b_img[i] <= prev_.b_img[i];
            } else {
                ok_ = ok_ && s.b_img[i] >= prev_.b_img[i];
            }
            ok_ = ok_ && s.b_img[i] >= lo - 1e-12;
            lo = s.b_img[i];
        }
        prev_ = s;
    }
    bool ok() const { return ok_; }

  private:
    int k_;
    DrivingState prev_;
    bool has_prev_ = false;
    bool ok_ = true;
};

}  // namespace

TEST_CASE("tracked points flow monotonically") {
    auto cfg = make_config(0, {1, 4, 9}, 2);
    auto ctrl = StepControl::defaults_for(cfg);
    for (uint64_t seed : {1u, 2u, 3u}) {
        MonotoneChecker checker(cfg.k);
        run_trajectory(cfg, ctrl, seed, DriveLaw::General, &checker);
        CHECK(checker.ok());
    }
}

TEST_CASE("n=1 trajectories terminate on the free arc") {
    auto cfg = make_config(0, {1}, 1);
    auto ctrl = StepControl::defaults_for(cfg);
    int free_count = 0;
    for (uint64_t seed = 0; seed < 50; ++seed) {
        auto r = run_trajectory(cfg, ctrl, seed);
        if (r.outcome == Outcome::FreeArc) ++free_count;
        CHECK(r.outcome != Outcome::SwallowedPoint);
    }
    CHECK(free_count >= 49);
}

TEST_CASE("forced times land exactly") {
    auto cfg = make_config(0, {1, 4}, 1);
    auto ctrl = StepControl::defaults_for(cfg);
    const std::vector<double> forced = {0.05, 0.2};

    struct Catcher : StepHook {
        std::vector<double> times;
        void on_step(const DrivingState& s) override { times.push_back(s.t); }
    } catcher;
    run_trajectory(cfg, ctrl, 11, DriveLaw::General, &catcher, forced);
    for (double f : forced) {
        bool hit = false;
        for (double t : catcher.times) {
            if (std::abs(t - f) < 1e-12) hit = true;
        }
        CHECK(hit);
    }
}
