#include "cmdp/errors.hpp"
#include "cmdp/model.hpp"
#include "oracles.hpp"

#include "doctest.h"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <filesystem>

using namespace cmdp;

namespace {

CmdpModel one_step(const Matrix& r, const Matrix& g, double b = 0.5) {
    const int S = static_cast<int>(r.rows()), A = static_cast<int>(r.cols());
    Matrix P = Matrix::Zero(S * A, S);
    P.col(0).setOnes();
    return CmdpModel(S, A, 1, b, 0, {P}, {r}, {g});
}

} // namespace

TEST_CASE("one-step expectation under the uniform policy") {
    Matrix r(1, 2), g(1, 2);
    r << 1, 0;
    g << 0, 1;
    const CmdpModel m = one_step(r, g);
    const ValueFunctions vf = evaluate_policy_exact(m, Policy::uniform(1, 2, 1));
    CHECK(vf.v_reward[0](0) == doctest::Approx(0.5));
    CHECK(vf.v_reward[1](0) == 0.0);
}

TEST_CASE("bellman_apply") {
    Rng rng(5);
    const CmdpModel m = oracle::random_model(rng, 3, 2, 2, 1.0);
    SUBCASE("zero continuation returns the stage table") {
        CHECK(bellman_apply(m, 0, Vector::Zero(3), Signal::kReward) == m.reward(0));
    }
    SUBCASE("unit continuation adds one") {
        const Matrix q = bellman_apply(m, 1, Vector::Ones(3), Signal::kUtility);
        CHECK((q - (m.utility(1).array() + 1.0).matrix()).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("two-state hand example gives 3.25") {
        Matrix P(2, 2);
        P << 0.5, 0.5, 1.0, 0.0;
        Matrix r(2, 1), g = Matrix::Zero(2, 1);
        r << 0.25, 0.0;
        const CmdpModel hand(2, 1, 1, 0.5, 0, {P}, {r}, {g});
        Vector v(2);
        v << 2, 4;
        CHECK(bellman_apply(hand, 0, v, Signal::kReward)(0, 0) == doctest::Approx(3.25).epsilon(1e-15));
    }
}

TEST_CASE("exact evaluation agrees with forward propagation and respects the range bound") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const int S = 2 + trial % 4, A = 1 + trial % 3, H = 1 + trial % 5;
        const CmdpModel m = oracle::random_model(rng, S, A, H, 0.5);
        const Policy pi = oracle::random_policy(rng, S, A, H);
        const ValueFunctions vf = evaluate_policy_exact(m, pi);
        const auto [vr, vg] = oracle::forward_values(m, pi);
        CHECK(vf.v_reward[0](0) == doctest::Approx(vr).epsilon(1e-12));
        CHECK(vf.v_utility[0](0) == doctest::Approx(vg).epsilon(1e-12));
        for (int h = 0; h < H; ++h) {
            for (Signal s : {Signal::kReward, Signal::kUtility}) {
                CHECK(vf.q(s, h).minCoeff() >= 0.0);
                CHECK(vf.q(s, h).maxCoeff() <= H - h + 1e-12);
                const Vector avg = (vf.q(s, h).cwiseProduct(pi.step(h))).rowwise().sum();
                CHECK((avg - vf.v(s, h)).cwiseAbs().maxCoeff() < 1e-12);
            }
        }
        CHECK(vf.v_reward[H].isZero());
        CHECK(vf.v_utility[H].isZero());
    }
}

TEST_CASE("serial and parallel evaluation are identical") {
    Rng rng(23);
    const CmdpModel m = oracle::random_model(rng, 30, 4, 6, 1.0);
    const Policy pi = oracle::random_policy(rng, 30, 4, 6);
    const ValueFunctions a = evaluate_policy_exact(m, pi, kernels::Exec::kSerial);
    const ValueFunctions b = evaluate_policy_exact(m, pi, kernels::Exec::kParallel);
    for (int h = 0; h <= 6; ++h) CHECK(a.v_reward[h] == b.v_reward[h]);
}

TEST_CASE("Monte Carlo rollouts match the exact value within three standard errors") {
    Rng rng(101);
    const CmdpModel m = oracle::random_model(rng, 3, 2, 3, 1.0);
    const Policy pi = oracle::random_policy(rng, 3, 2, 3);
    const double exact = evaluate_policy_exact(m, pi).v_reward[0](0);
    Rng sim(7);
    const int n = 1'000'000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const Trajectory t = run_episode(m, pi, sim, i);
        double ret = 0.0;
        for (const auto& st : t.steps) ret += st.reward;
        sum += ret;
        sq += ret * ret;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    CHECK(std::abs(mean - exact) <= 3.0 * se);
}

TEST_CASE("run_episode") {
    SUBCASE("same seed, same trajectory") {
        Rng rng(3);
        const CmdpModel m = oracle::random_model(rng, 4, 3, 5, 1.0);
        const Policy pi = oracle::random_policy(rng, 4, 3, 5);
        const Trajectory a = run_episode(m, pi, std::uint64_t{42});
        const Trajectory b = run_episode(m, pi, std::uint64_t{42});
        REQUIRE(a.steps.size() == 5);
        for (int h = 0; h < 5; ++h) {
            CHECK(a.steps[h].state == b.steps[h].state);
            CHECK(a.steps[h].action == b.steps[h].action);
        }
        CHECK(a.terminal_state == b.terminal_state);
    }
    SUBCASE("deterministic single-action chain visits the unique path") {
        const int S = 4, H = 3;
        std::vector<Matrix> P(H, Matrix::Zero(S, S)), r(H, Matrix::Zero(S, 1)), g(H, Matrix::Ones(S, 1));
        for (int h = 0; h < H; ++h)
            for (int x = 0; x < S; ++x) P[h](x, (x + 1) % S) = 1.0;
        const CmdpModel chain(S, 1, H, 1.0, 0, P, r, g);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const Trajectory t = run_episode(chain, Policy::uniform(S, 1, H), seed);
            for (int h = 0; h <= H; ++h) CHECK(t.state_at(h) == h);
        }
    }
    SUBCASE("next-state frequencies follow the kernel") {
        Matrix P(2, 2), r = Matrix::Zero(2, 1), g = Matrix::Zero(2, 1);
        P << 0.3, 0.7, 0.3, 0.7;
        const CmdpModel m(2, 1, 1, 0.5, 0, {P}, {r}, {g});
        Rng sim(99);
        const int n = 100'000;
        int ones = 0;
        for (int i = 0; i < n; ++i) ones += run_episode(m, Policy::uniform(2, 1, 1), sim).terminal_state;
        const double se = std::sqrt(0.3 * 0.7 / n);
        CHECK(std::abs(static_cast<double>(ones) / n - 0.7) <= 3.0 * se);
    }
    SUBCASE("chi-square goodness of fit at the 0.01 level") {
        Rng rng(8);
        const CmdpModel m = oracle::random_model(rng, 6, 2, 1, 0.5);
        Policy pi(6, 2, 1);
        pi.step(0).setZero();
        pi.step(0)(0, 1) = 1.0;
        pi.step(0).rightCols(1).bottomRows(5).setOnes();
        Rng sim(4);
        const int n = 100'000;
        std::vector<int> counts(6, 0);
        for (int i = 0; i < n; ++i) ++counts[run_episode(m, pi, sim).terminal_state];
        double stat = 0.0;
        for (int y = 0; y < 6; ++y) {
            const double expected = n * m.transition(0, 0, 1, y);
            stat += (counts[y] - expected) * (counts[y] - expected) / expected;
        }
        const boost::math::chi_squared dist(5);
        CHECK(stat < boost::math::quantile(dist, 0.99));
    }
}

TEST_CASE("model validation") {
    Matrix P(1, 1);
    P << 1.0;
    const Matrix r = Matrix::Constant(1, 1, 0.5);
    CHECK_THROWS_AS(CmdpModel(1, 1, 1, 0.0, 0, {P}, {r}, {r}), ConfigError);
    CHECK_THROWS_AS(CmdpModel(1, 1, 1, 1.5, 0, {P}, {r}, {r}), ConfigError);
    CHECK_THROWS_AS(CmdpModel(1, 1, 1, 0.5, 1, {P}, {r}, {r}), StructuralError);
    CHECK_THROWS_AS(CmdpModel(1, 1, 2, 0.5, 0, {P}, {r}, {r}), StructuralError);
    const Matrix big = Matrix::Constant(1, 1, 1.5);
    CHECK_THROWS_AS(CmdpModel(1, 1, 1, 0.5, 0, {P}, {big}, {r}), ContractError);

    Matrix P2(1, 2);
    P2 << 0.5, 0.5 + 5e-10;
    const Matrix r2 = Matrix::Constant(2, 1, 0.5);
    Matrix P2full(2, 2);
    P2full << P2, P2;
    const CmdpModel fixed(2, 1, 1, 0.5, 0, {P2full}, {r2}, {r2});
    CHECK(std::abs(fixed.transitions(0).row(0).sum() - 1.0) <= 1e-15);

    P2full(0, 1) = 0.5 + 1e-6;
    CHECK_THROWS_AS(CmdpModel(2, 1, 1, 0.5, 0, {P2full}, {r2}, {r2}), ContractError);
    P2full(0, 0) = -0.1;
    P2full(0, 1) = 1.1;
    CHECK_THROWS_AS(CmdpModel(2, 1, 1, 0.5, 0, {P2full}, {r2}, {r2}), ContractError);
}

TEST_CASE("policy dimension mismatch is a structural error") {
    Rng rng(1);
    const CmdpModel m = oracle::random_model(rng, 3, 2, 2, 1.0);
    CHECK_THROWS_AS(evaluate_policy_exact(m, Policy::uniform(3, 3, 2)), StructuralError);
    CHECK_THROWS_AS(evaluate_policy_exact(m, Policy::uniform(3, 2, 3)), StructuralError);
}

TEST_CASE("model files round-trip exactly") {
    Rng rng(12);
    const CmdpModel m = oracle::random_model(rng, 3, 2, 2, 1.25);
    const auto path = std::filesystem::temp_directory_path() / "cmdp_roundtrip_model.json";
    save_model(m, path);
    CHECK(load_model(path) == m);
    std::filesystem::remove(path);

    nlohmann::json j = model_to_json(m);
    j["transitions"][0][0][0][0] = 0.1;
    j["transitions"][0][0][0][1] = 0.9;
    j["transitions"][0][0][0][2] = 0.0;
    const CmdpModel decimal = model_from_json(j);
    CHECK(decimal.transition(0, 0, 0, 0) == 0.1);
    CHECK(model_from_json(model_to_json(decimal)) == decimal);

    j.erase("reward");
    CHECK_THROWS_AS(model_from_json(j), StructuralError);
}
