#include "cmdp/envs.hpp"
#include "cmdp/errors.hpp"
#include "cmdp/tabular.hpp"
#include "oracles.hpp"

#include "doctest.h"

#include <cmath>

using namespace cmdp;

namespace {

Trajectory fixed_path(std::vector<Transition> steps, int terminal) {
    Trajectory t;
    t.steps = std::move(steps);
    t.terminal_state = terminal;
    return t;
}

} // namespace

TEST_CASE("visit counters") {
    VisitCounters c(3, 2, 2);
    SUBCASE("empty history") {
        for (int h = 0; h < 2; ++h)
            for (int x = 0; x < 3; ++x)
                for (int a = 0; a < 2; ++a) CHECK(c.pair(h, x, a) == 0);
        CHECK(c.conserved());
    }
    SUBCASE("identical trajectories count twice") {
        const Trajectory t = fixed_path({{0, 1, 0.2, 0.3}, {2, 0, 0.1, 0.9}}, 1);
        update_counters(c, t);
        update_counters(c, t);
        CHECK(c.pair(0, 0, 1) == 2);
        CHECK(c.transition(0, 0, 1, 2) == 2);
        CHECK(c.pair(1, 2, 0) == 2);
        CHECK(c.transition(1, 2, 0, 1) == 2);
        CHECK(c.pair(0, 1, 1) == 0);
    }
    SUBCASE("out-of-range indices are structural errors") {
        CHECK_THROWS_AS(update_counters(c, fixed_path({{0, 2, 0, 0}, {0, 0, 0, 0}}, 0)), StructuralError);
        CHECK_THROWS_AS(update_counters(c, fixed_path({{0, 0, 0, 0}, {0, 0, 0, 0}}, 3)), StructuralError);
        CHECK_THROWS_AS(update_counters(c, fixed_path({{0, 0, 0, 0}}, 0)), StructuralError);
        CHECK(c.episodes() == 0);
    }
    SUBCASE("conservation over random trajectories") {
        Rng rng(6);
        const CmdpModel m = oracle::random_model(rng, 3, 2, 2, 1.0);
        for (int k = 0; k < 100; ++k) {
            update_counters(c, run_episode(m, oracle::random_policy(rng, 3, 2, 2), rng, k));
            CHECK(c.conserved());
        }
        for (int h = 0; h < 2; ++h) {
            std::int64_t total = 0;
            for (int x = 0; x < 3; ++x)
                for (int a = 0; a < 2; ++a) total += c.pair(h, x, a);
            CHECK(total == 100);
        }
    }
}

TEST_CASE("empirical model arithmetic") {
    VisitCounters c(2, 1, 1);
    FeedbackArchive fb(2, 1, 1);
    const double beta = 0.8;
    SUBCASE("unvisited pairs") {
        const EmpiricalModel e = estimate_model(c, fb, 1.0, beta);
        CHECK(e.transitions[0].isZero());
        CHECK(e.reward[0].isZero());
        CHECK(e.bonus[0](0, 0) == doctest::Approx(beta));
        CHECK(estimate_model(c, fb, 4.0, beta).bonus[0](1, 0) == doctest::Approx(beta / 2));
    }
    SUBCASE("three visits to the same successor give 3/4") {
        const Trajectory t = fixed_path({{0, 0, 0.7, 0.2}}, 1);
        for (int i = 0; i < 3; ++i) {
            update_counters(c, t);
            fb.record(t);
        }
        const EmpiricalModel e = estimate_model(c, fb, 1.0, beta);
        CHECK(e.transitions[0](0, 1) == doctest::Approx(0.75).epsilon(1e-15));
        CHECK(e.transitions[0](0, 0) == 0.0);
        CHECK(e.reward[0](0, 0) == doctest::Approx(0.7 * 3 / 4).epsilon(1e-15));
        CHECK(e.utility[0](0, 0) == doctest::Approx(0.2 * 3 / 4).epsilon(1e-15));
        CHECK(e.bonus[0](0, 0) == doctest::Approx(beta / 2).epsilon(1e-15));
    }
    SUBCASE("shrunk reward rises toward the true value") {
        const Trajectory t = fixed_path({{0, 0, 0.7, 0.0}}, 0);
        double last = 0.0;
        for (int n = 1; n <= 50; ++n) {
            update_counters(c, t);
            fb.record(t);
            const double r = estimate_model(c, fb, 1.0, beta).reward[0](0, 0);
            CHECK(r == doctest::Approx(0.7 * n / (n + 1.0)).epsilon(1e-14));
            CHECK(r > last);
            CHECK(r < 0.7);
            last = r;
        }
    }
}

TEST_CASE("subprobability rows and forced-visit consistency") {
    Rng rng(10);
    const CmdpModel m = oracle::random_model(rng, 4, 1, 1, 0.5);
    VisitCounters c(4, 1, 1);
    FeedbackArchive fb(4, 1, 1);
    const Policy pi = Policy::uniform(4, 1, 1);
    for (int n = 1; n <= 20000; ++n) {
        const Trajectory t = run_episode(m, pi, rng, n);
        update_counters(c, t);
        fb.record(t);
        if (n % 5000 == 0) {
            const EmpiricalModel e = estimate_model(c, fb, 1.0, 0.0);
            const double mass = e.transitions[0].row(0).sum();
            CHECK(mass < 1.0);
            CHECK(mass == doctest::Approx(n / (n + 1.0)).epsilon(1e-12));
            const double l1 = (e.transitions[0].row(0) - m.transitions(0).row(0)).cwiseAbs().sum();
            CHECK(l1 <= 3.0 * std::sqrt(4.0 / n));
        }
    }
}

TEST_CASE("evaluate_tabular") {
    SUBCASE("no data: Q is the clamped double bonus") {
        VisitCounters c(3, 2, 4);
        FeedbackArchive fb(3, 2, 4);
        const EvalEstimates est = evaluate_tabular(estimate_model(c, fb, 1.0, 0.3), Policy::uniform(3, 2, 4));
        // the empty kernel carries no continuation value
        for (int h = 0; h < 4; ++h) CHECK((est.q_reward[h].array() == std::min(0.6, 4.0 - h)).all());
        const EvalEstimates big = evaluate_tabular(estimate_model(c, fb, 1.0, 10.0), Policy::uniform(3, 2, 4));
        for (int h = 0; h < 4; ++h) CHECK((big.q_utility[h].array() == 4.0 - h).all());
    }
    SUBCASE("ground-truth injection reproduces exact evaluation") {
        Rng rng(21);
        for (int trial = 0; trial < 20; ++trial) {
            const CmdpModel m = oracle::random_model(rng, 2 + trial % 5, 1 + trial % 3, 1 + trial % 6, 0.5);
            const Policy pi = oracle::random_policy(rng, m.num_states(), m.num_actions(), m.horizon());
            const EvalEstimates est = evaluate_tabular(EmpiricalModel::from_truth(m), pi);
            const ValueFunctions vf = evaluate_policy_exact(m, pi);
            for (int h = 0; h < m.horizon(); ++h) {
                for (Signal s : {Signal::kReward, Signal::kUtility}) {
                    CHECK((est.q(s, h) - vf.q(s, h)).cwiseAbs().maxCoeff() <= 1e-10);
                    CHECK((est.v(s, h) - vf.v(s, h)).cwiseAbs().maxCoeff() <= 1e-10);
                }
            }
        }
    }
    SUBCASE("estimates stay in range as data accumulates") {
        const CmdpModel m = make_tabular_random(4, 3, 4, 1.0, 3);
        TabularBackend backend(4, 3, 4, 1.0, 0.5);
        Rng rng(1);
        const Policy pi = Policy::uniform(4, 3, 4);
        for (int k = 0; k < 300; ++k) {
            const EvalEstimates est = backend.evaluate(pi);
            CHECK(count_range_violations(est) == 0);
            for (int h = 0; h < 4; ++h) {
                const Vector avg = est.q_reward[h].cwiseProduct(pi.step(h)).rowwise().sum();
                CHECK((avg - est.v_reward[h]).cwiseAbs().maxCoeff() <= 1e-10);
            }
            backend.observe(run_episode(m, pi, rng, k), est);
        }
        CHECK(backend.counters().conserved());
        CHECK(backend.counters().episodes() == 300);
    }
}
