#pragma once

#include "cmdp/model.hpp"

#include <memory>

namespace cmdp {

enum class Backend { kLstd, kTabular };

inline const char* to_string(Backend b) { return b == Backend::kLstd ? "lstd" : "tabular"; }
Backend backend_from_string(const std::string& name);

/// Optimistic Q/V estimates for one episode. `bonus_*[h](x, a)` is the total
/// exploration bonus that entered Q before truncation; the optimism band for
/// the model prediction error is [-2 * bonus, 0].
struct EvalEstimates {
    Backend backend = Backend::kTabular;
    std::vector<Matrix> q_reward;
    std::vector<Matrix> q_utility;
    std::vector<Vector> v_reward;  ///< horizon + 1 entries, last is zero
    std::vector<Vector> v_utility; ///< horizon + 1 entries, last is zero
    std::vector<Matrix> bonus_reward;
    std::vector<Matrix> bonus_utility;

    /// Q = 0, V = 0, zero bonus: the state before any episode.
    static EvalEstimates zeros(int num_states, int num_actions, int horizon, Backend backend);

    const Matrix& q(Signal s, int h) const { return s == Signal::kReward ? q_reward[h] : q_utility[h]; }
    const Vector& v(Signal s, int h) const { return s == Signal::kReward ? v_reward[h] : v_utility[h]; }
    const Matrix& bonus(Signal s, int h) const {
        return s == Signal::kReward ? bonus_reward[h] : bonus_utility[h];
    }
    Matrix& q(Signal s, int h) { return s == Signal::kReward ? q_reward[h] : q_utility[h]; }
    Vector& v(Signal s, int h) { return s == Signal::kReward ? v_reward[h] : v_utility[h]; }
    Matrix& bonus(Signal s, int h) { return s == Signal::kReward ? bonus_reward[h] : bonus_utility[h]; }

    int horizon() const { return static_cast<int>(q_reward.size()); }
};

/// Number of Q or V entries outside [0, H - h] (0-based h).
int count_range_violations(const EvalEstimates& est, double tol = 1e-12);

/**
 * Optimistic policy-evaluation backend driven by the episode loop.
 *
 * Episode k calls evaluate(pi^k), which may only use data from episodes
 * before k, then observe(trajectory k, estimates k) to archive that episode.
 */
class PolicyEvaluator {
  public:
    virtual ~PolicyEvaluator() = default;
    virtual Backend backend() const = 0;
    virtual EvalEstimates evaluate(const Policy& policy) = 0;
    virtual void observe(const Trajectory& traj, const EvalEstimates& est) = 0;
};

} // namespace cmdp
