#pragma once

#include "cmdp/model.hpp"

#include <optional>

namespace cmdp {

/// Per-step state-action visitation probabilities mu_h(x, a), |S| x |A| per step.
struct OccupancyMeasure {
    std::vector<Matrix> mass;

    /// Largest violation of flow conservation (including the initial-state row).
    double flow_residual(const CmdpModel& model) const;
    /// pi_h(a|x) = mu_h(x,a) / sum_a mu_h(x,a); uniform where the state carries no mass.
    Policy to_policy(double zero_mass_tol = 1e-12) const;
    /// sum_h sum_{x,a} mu_h(x,a) * signal_h(x,a)
    double value(const CmdpModel& model, Signal which) const;
};

/// Optimal constrained policy in hindsight together with its dual certificate.
struct HindsightSolution {
    Policy optimal_policy;
    OccupancyMeasure occupancy;
    double optimal_value = 0.0;   ///< V_r,1 of the optimal policy at x_1
    double optimal_utility = 0.0; ///< V_g,1 of the optimal policy at x_1
    double optimal_dual = 0.0;    ///< Y* >= 0, LP multiplier of the utility row
    double slater_gap = 0.0;      ///< gamma = max_pi V_g,1 - b, clamped at 0
    Policy slater_policy;         ///< maximizer of V_g,1
    double duality_gap = 0.0;
    /// 2H / gamma; empty when the Slater gap is zero.
    std::optional<double> dual_cap;
};

struct SlaterGap {
    double gap = 0.0;
    double max_utility = 0.0;
    Policy policy;
};

/// Duality-gap threshold certifying the LP optimum.
inline constexpr double kDualityGapTol = 1e-8;

/// Maximizes V_r,1(x_1) subject to V_g,1(x_1) >= b over occupancy measures.
/// Throws InfeasibleConstraint when no policy reaches b.
HindsightSolution solve_hindsight(const CmdpModel& model);
/// Same, with the threshold taken from `offset` instead of the model (no (0, H] check).
HindsightSolution solve_hindsight(const CmdpModel& model, double offset);

/// Maximizes V_g,1(x_1) by LP and reports gamma = max(0, max V_g,1 - b).
SlaterGap estimate_slater_gap(const CmdpModel& model);
SlaterGap estimate_slater_gap(const CmdpModel& model, double offset);

/// Unconstrained optimum of sum_h stage_h by backward induction.
struct DpSolution {
    double value = 0.0; ///< optimal value at the initial state
    std::vector<Vector> v;
    Policy greedy;
};

DpSolution value_iteration(const CmdpModel& model, const std::vector<Matrix>& stage);

/// Scalar fields plus the optimal policy as nested [h][x][a] arrays.
nlohmann::json hindsight_to_json(const HindsightSolution& sol);

/// D(Y) = max_pi V_r,1 + Y (V_g,1 - b), computed on the reward r + Y g.
double dual_function(const CmdpModel& model, double dual);

} // namespace cmdp
