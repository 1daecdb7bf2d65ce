#pragma once

#include "cmdp/kernels.hpp"
#include "cmdp/rng.hpp"

#include <Eigen/Dense>
#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace cmdp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Which per-step signal a value function accumulates.
enum class Signal { kReward, kUtility };

inline const char* to_string(Signal s) { return s == Signal::kReward ? "reward" : "utility"; }

/// Simplex tolerance for transition rows and policy rows.
inline constexpr double kSimplexTol = 1e-12;
/// Rows off by more than kSimplexTol but within this are renormalized on construction.
inline constexpr double kRenormalizeTol = 1e-9;

/**
 * Episodic constrained MDP with finite state and action sets.
 *
 * Steps are 0-based internally: h = 0 is the first decision step and
 * h = horizon() - 1 the last. Transition tables are stored per step as an
 * (|S||A|) x |S| matrix whose row x * |A| + a is P_h(. | x, a). Reward and
 * utility tables are |S| x |A|.
 *
 * The object is immutable once constructed.
 */
class CmdpModel {
  public:
    CmdpModel(int num_states, int num_actions, int horizon, double offset, int initial_state,
              std::vector<Matrix> transitions, std::vector<Matrix> reward,
              std::vector<Matrix> utility);

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    int horizon() const { return horizon_; }
    /// Constraint threshold b in (0, H].
    double offset() const { return offset_; }
    int initial_state() const { return initial_state_; }

    const Matrix& transitions(int h) const { return transitions_.at(h); }
    double transition(int h, int x, int a, int next) const {
        return transitions_[h](x * num_actions_ + a, next);
    }
    auto transition_row(int h, int x, int a) const {
        return transitions_[h].row(x * num_actions_ + a);
    }
    const Matrix& reward(int h) const { return reward_.at(h); }
    const Matrix& utility(int h) const { return utility_.at(h); }
    const Matrix& signal(Signal s, int h) const {
        return s == Signal::kReward ? reward(h) : utility(h);
    }

    /// Copy with a different constraint threshold.
    CmdpModel with_offset(double offset) const;

    bool operator==(const CmdpModel& other) const;

  private:
    int num_states_;
    int num_actions_;
    int horizon_;
    double offset_;
    int initial_state_;
    std::vector<Matrix> transitions_;
    std::vector<Matrix> reward_;
    std::vector<Matrix> utility_;
};

/// Per-step action distributions pi_h(. | x), one |S| x |A| table per step.
class Policy {
  public:
    Policy() = default;
    Policy(int num_states, int num_actions, int horizon);

    static Policy uniform(int num_states, int num_actions, int horizon);

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    int horizon() const { return static_cast<int>(tables_.size()); }

    const Matrix& step(int h) const { return tables_.at(h); }
    Matrix& step(int h) { return tables_.at(h); }
    double prob(int h, int x, int a) const { return tables_[h](x, a); }

    /// Number of rows that are not probability vectors within tol.
    int count_simplex_violations(double tol = kSimplexTol) const;
    /// Throws StructuralError unless every row is a probability vector.
    void validate(double tol = kSimplexTol) const;
    void check_dims(const CmdpModel& model) const;

  private:
    int num_states_ = 0;
    int num_actions_ = 0;
    std::vector<Matrix> tables_;
};

struct Transition {
    int state;
    int action;
    double reward;
    double utility;
};

/// One episode of bandit feedback: signals only at visited pairs.
struct Trajectory {
    int episode = 0;
    std::vector<Transition> steps;
    int terminal_state = 0;

    /// State observed at 0-based step h, including h = H (terminal).
    int state_at(int h) const {
        return h < static_cast<int>(steps.size()) ? steps[h].state : terminal_state;
    }
};

/// Q and V tables for reward and utility. v_* has horizon + 1 entries and
/// v_*[horizon] is identically zero.
struct ValueFunctions {
    std::vector<Matrix> q_reward;
    std::vector<Matrix> q_utility;
    std::vector<Vector> v_reward;
    std::vector<Vector> v_utility;

    const Matrix& q(Signal s, int h) const { return s == Signal::kReward ? q_reward[h] : q_utility[h]; }
    const Vector& v(Signal s, int h) const { return s == Signal::kReward ? v_reward[h] : v_utility[h]; }
};

/// diamond_h(x, a) + sum_x' P_h(x' | x, a) v_next(x') for every (x, a).
Matrix bellman_apply(const CmdpModel& model, int h, const Vector& v_next, Signal which,
                     kernels::Exec exec = kernels::Exec::kParallel);

/// Exact V/Q of a policy by backward recursion.
ValueFunctions evaluate_policy_exact(const CmdpModel& model, const Policy& policy,
                                     kernels::Exec exec = kernels::Exec::kParallel);

/// Samples one episode from the model's fixed initial state.
Trajectory run_episode(const CmdpModel& model, const Policy& policy, Rng& rng, int episode = 0);
Trajectory run_episode(const CmdpModel& model, const Policy& policy, std::uint64_t seed);

nlohmann::json model_to_json(const CmdpModel& model);
CmdpModel model_from_json(const nlohmann::json& j);
CmdpModel load_model(const std::filesystem::path& path);
void save_model(const CmdpModel& model, const std::filesystem::path& path);

} // namespace cmdp
