#include "cmdp/envs.hpp"
#include "cmdp/errors.hpp"
#include "cmdp/hindsight.hpp"

#include "doctest.h"

#include <cmath>
#include <filesystem>

using namespace cmdp;

TEST_CASE("random tabular generator") {
    const CmdpModel a = make_tabular_random(4, 3, 4, 1.5, 11);
    const CmdpModel b = make_tabular_random(4, 3, 4, 1.5, 11);
    CHECK(a == b);
    CHECK(model_to_json(a).dump() == model_to_json(b).dump());
    CHECK_FALSE(a == make_tabular_random(4, 3, 4, 1.5, 12));
    for (std::uint64_t seed = 0; seed < 10; ++seed)
        CHECK(estimate_slater_gap(make_tabular_random(3, 2, 3, 1.0, seed)).gap >= kMinSlaterGap);
    CHECK_THROWS_AS(make_tabular_random(3, 2, 3, 3.0, 1), GenerationError);
    CHECK_THROWS_AS(make_tabular_random(3, 2, 3, 0.0, 1), ConfigError);
}

TEST_CASE("gridworld") {
    SUBCASE("no hazards: every policy earns utility H") {
        GridSpec g;
        g.width = 3;
        g.height = 2;
        g.goal = {2, 1};
        g.horizon = 4;
        g.offset = 3.0;
        const CmdpModel m = make_hazard_gridworld(g);
        CHECK(m.num_states() == 6);
        CHECK(m.num_actions() == 4);
        CHECK(estimate_slater_gap(m).gap == doctest::Approx(1.0).epsilon(1e-12));
        const ValueFunctions vf = evaluate_policy_exact(m, Policy::uniform(6, 4, 4));
        CHECK(vf.v_utility[0](0) == doctest::Approx(4.0));
    }
    SUBCASE("slip-free walled path by hand") {
        // 2x2: wall at (1,0), start (0,0), goal (1,1); the only path is down then right
        GridSpec g;
        g.width = 2;
        g.height = 2;
        g.horizon = 3;
        g.walls = {{1, 0}};
        g.start = {0, 0};
        g.goal = {1, 1};
        g.slip = 0.0;
        g.offset = 0.5;
        const CmdpModel m = make_hazard_gridworld(g);
        CHECK(m.transition(0, 0, 2, 2) == 1.0);  // down from (0,0)
        CHECK(m.transition(0, 0, 1, 0) == 1.0);  // right into the wall stays
        CHECK(m.transition(0, 2, 1, 3) == 1.0);  // right from (0,1) reaches the goal
        CHECK(m.transition(0, 3, 0, 3) == 1.0);  // goal absorbs
        // steps 1 and 2 move, step 3 is spent at the goal
        CHECK(solve_hindsight(m).optimal_value == doctest::Approx(1.0).epsilon(1e-12));
        g.horizon = 5;
        CHECK(solve_hindsight(make_hazard_gridworld(g)).optimal_value == doctest::Approx(3.0).epsilon(1e-12));
    }
    SUBCASE("a hazard makes the constrained optimum strictly worse") {
        // the only shortest path crosses the hazard; the detour costs two steps of reward
        GridSpec g;
        g.width = 3;
        g.height = 3;
        g.horizon = 5;
        g.start = {2, 0};
        g.goal = {2, 2};
        g.hazards = {{2, 1}};
        g.slip = 0.1;
        g.offset = 0.8 * 5;
        const CmdpModel m = make_hazard_gridworld(g);
        std::vector<Matrix> r;
        for (int h = 0; h < 5; ++h) r.push_back(m.reward(h));
        const double unconstrained = value_iteration(m, r).value;
        const HindsightSolution sol = solve_hindsight(m);
        CHECK(sol.optimal_value < unconstrained - 1e-6);
        CHECK(sol.optimal_dual > 0.0);
    }
    SUBCASE("slip rows") {
        GridSpec g;
        g.width = 3;
        g.height = 3;
        g.slip = 0.2;
        const CmdpModel m = make_hazard_gridworld(g);
        // centre cell (1,1) = state 4, action right -> (2,1) = state 5
        CHECK(m.transition(0, 4, 1, 5) == doctest::Approx(0.8 + 0.05));
        CHECK(m.transition(0, 4, 1, 1) == doctest::Approx(0.05));
        // corner (0,0) moving up stays with the intended mass plus two blocked slips
        CHECK(m.transition(0, 0, 0, 0) == doctest::Approx(0.8 + 0.1));
    }
    SUBCASE("errors") {
        GridSpec g;
        g.hazards = {{2, 2}};
        CHECK_THROWS_AS(make_hazard_gridworld(g), ConfigError);
        g.hazards = {{5, 0}};
        CHECK_THROWS_AS(make_hazard_gridworld(g), ConfigError);
        // start boxed in by hazards: slipping reaches one with positive probability,
        // so no policy keeps utility 1 at all six steps
        g.hazards = {{0, 1}, {1, 0}};
        g.slip = 0.5;
        g.offset = 6.0;
        try {
            make_hazard_gridworld(g);
            FAIL("expected InfeasibleConstraint");
        } catch (const InfeasibleConstraint& e) {
            CHECK(e.max_utility() < 6.0);
            CHECK(e.offset() == 6.0);
        }
    }
    SUBCASE("random hazards are seeded") {
        GridSpec g;
        g.width = 4;
        g.height = 4;
        g.random_hazards = 3;
        g.seed = 5;
        g.offset = 1.0;
        CHECK(make_hazard_gridworld(g) == make_hazard_gridworld(g));
    }
}

TEST_CASE("linear mixture generator") {
    SUBCASE("consistency and norms") {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const LinearInstance inst = make_linear_mixture(3, 4, 5, 3, 4, 3, 1.0, seed);
            const FeatureReport rep = check_feature_maps(inst.features, inst.model);
            CHECK(rep.consistent(1e-10));
            CHECK(rep.norms_ok(3, 4, 4));
            CHECK(estimate_slater_gap(inst.model).gap >= kMinSlaterGap);
        }
    }
    SUBCASE("a single base model is reproduced exactly") {
        const LinearInstance inst = make_linear_mixture(1, 2, 3, 2, 3, 1, 1.0, 4);
        CHECK(inst.features.theta_kernel[0](0) == 1.0);
        for (int h = 1; h < 3; ++h) CHECK(inst.model.transitions(h) == inst.model.transitions(0));
    }
    SUBCASE("layout mismatch") {
        CHECK_THROWS_AS(make_linear_mixture(3, 2, 3, 2, 2, 2, 1.0, 0), ConfigError);
    }
    SUBCASE("deterministic") {
        const LinearInstance a = make_linear_mixture(2, 2, 3, 2, 2, 2, 0.8, 9);
        const LinearInstance b = make_linear_mixture(2, 2, 3, 2, 2, 2, 0.8, 9);
        CHECK(a.model == b.model);
        CHECK(features_to_json(a.features).dump() == features_to_json(b.features).dump());
    }
}

TEST_CASE("canonical features") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const CmdpModel m = make_tabular_random(3 + seed % 3, 2 + seed % 2, 3, 1.0, seed);
        const int S = m.num_states(), A = m.num_actions();
        const FeatureMaps f = canonical_features(m);
        CHECK(f.kernel_dim() == S * S * A);
        CHECK(f.value_dim() == S * A);
        CHECK(f.dim() == S * S * A);
        const FeatureReport rep = check_feature_maps(f, m);
        CHECK(rep.kernel_error == 0.0);
        CHECK(rep.norms_ok(S * S * A, S * A, 3));
        CHECK(rep.integrated_norm <= std::sqrt(static_cast<double>(S)) * 3 + 1e-12);
    }
}

TEST_CASE("feature files round-trip") {
    const LinearInstance inst = make_linear_mixture(2, 3, 3, 2, 2, 2, 1.0, 1);
    const auto path = std::filesystem::temp_directory_path() / "cmdp_features_roundtrip.json";
    save_features(inst.features, path);
    const FeatureMaps back = load_features(path);
    std::filesystem::remove(path);
    CHECK(Matrix(back.kernel) == Matrix(inst.features.kernel));
    CHECK(Matrix(back.value) == Matrix(inst.features.value));
    CHECK(back.theta_kernel[1] == inst.features.theta_kernel[1]);
    CHECK(check_feature_maps(back, inst.model).consistent(1e-10));
}
