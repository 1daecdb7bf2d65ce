#pragma once

#include "cmdp/lstd.hpp"

#include <filesystem>
#include <optional>
#include <utility>

namespace cmdp {

/// Smallest Slater gap a generated instance may have.
inline constexpr double kMinSlaterGap = 0.05;
inline constexpr int kMaxRejections = 100;

/// Dirichlet(1) transition rows and uniform [0, 1] rewards and utilities,
/// resampled until the Slater gap reaches kMinSlaterGap.
CmdpModel make_tabular_random(int num_states, int num_actions, int horizon, double offset,
                              std::uint64_t seed);

/// Grid cell (column, row); state index is row * width + column.
struct Cell {
    int col = 0;
    int row = 0;
    bool operator==(const Cell&) const = default;
};

/**
 * Four-action gridworld (up, right, down, left). With probability `slip` the
 * move goes in a uniformly random direction instead; moves into walls or off
 * the grid stay put and the goal is absorbing. Reward is 1 while at the goal,
 * utility is 0 on hazard cells and 1 elsewhere.
 */
struct GridSpec {
    int width = 3;
    int height = 3;
    int horizon = 6;
    std::vector<Cell> hazards;
    std::vector<Cell> walls;
    Cell start{0, 0};
    Cell goal{2, 2};
    double slip = 0.1;
    double offset = 1.0;
    int random_hazards = 0; ///< extra hazards placed uniformly at random from `seed`
    std::uint64_t seed = 0;
};

/// Throws ConfigError on overlapping or out-of-grid cells and InfeasibleConstraint
/// when no policy reaches the offset.
CmdpModel make_hazard_gridworld(const GridSpec& spec);

struct LinearInstance {
    CmdpModel model;
    FeatureMaps features;
};

/**
 * Linear mixture: psi(x, a, x') = (P^1(x'|x,a), ..., P^m(x'|x,a)) over m base
 * kernels with Dirichlet rows and P_h = sum_i theta_h,i P^i with theta_h on the
 * simplex. varphi(x, a) is a Dirichlet point of dimension d2 and the signal
 * parameters are uniform in [0, 1]^d2, so r and g stay in [0, 1].
 * Requires d1 == num_base_models.
 */
LinearInstance make_linear_mixture(int d1, int d2, int num_states, int num_actions, int horizon,
                                   int num_base_models, double offset, std::uint64_t seed);

/// psi(x, a, x') = e_(x,a,x'), varphi(x, a) = e_(x,a), theta_h = vec(P_h), theta_s,h = vec(s_h).
FeatureMaps canonical_features(const CmdpModel& model);

nlohmann::json features_to_json(const FeatureMaps& maps);
FeatureMaps features_from_json(const nlohmann::json& j);
FeatureMaps load_features(const std::filesystem::path& path);
void save_features(const FeatureMaps& maps, const std::filesystem::path& path);

} // namespace cmdp
