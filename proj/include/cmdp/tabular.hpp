#pragma once

#include "cmdp/evaluation.hpp"

#include <cstdint>

namespace cmdp {

/// Visit counts n_h(x, a) and n_h(x, a, x') over the episodes seen so far.
class VisitCounters {
  public:
    VisitCounters() = default;
    VisitCounters(int num_states, int num_actions, int horizon);

    std::int64_t pair(int h, int x, int a) const { return pair_[pair_index(h, x, a)]; }
    std::int64_t transition(int h, int x, int a, int next) const {
        return transition_[pair_index(h, x, a) * num_states_ + next];
    }
    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    int horizon() const { return horizon_; }
    int episodes() const { return episodes_; }

    /// Both conservation laws: rows of n(x, a, .) sum to n(x, a), and every step
    /// has exactly one visit per recorded episode.
    bool conserved() const;

  private:
    friend void update_counters(VisitCounters&, const Trajectory&);
    std::size_t pair_index(int h, int x, int a) const {
        return (static_cast<std::size_t>(h) * num_states_ + x) * num_actions_ + a;
    }

    int num_states_ = 0;
    int num_actions_ = 0;
    int horizon_ = 0;
    int episodes_ = 0;
    std::vector<std::int64_t> pair_;
    std::vector<std::int64_t> transition_;
};

/// Increments n_h(x_h, a_h) and n_h(x_h, a_h, x_{h+1}) for every step of traj.
void update_counters(VisitCounters& counters, const Trajectory& traj);

/// Last observed reward/utility per (h, x, a). Signals are deterministic, so
/// the sum over visits in the shrunk estimator equals n times this value.
struct FeedbackArchive {
    std::vector<Matrix> reward;
    std::vector<Matrix> utility;

    FeedbackArchive() = default;
    FeedbackArchive(int num_states, int num_actions, int horizon);
    void record(const Trajectory& traj);
};

/// Regularized count-based model: P_hat = n(x,a,x') / (n(x,a) + lambda),
/// r_hat = sum r / (n(x,a) + lambda), Gamma = beta (n(x,a) + lambda)^{-1/2}.
struct EmpiricalModel {
    int num_states = 0;
    int num_actions = 0;
    std::vector<Matrix> transitions; ///< (|S||A|) x |S| per step, rows are subprobabilities
    std::vector<Matrix> reward;
    std::vector<Matrix> utility;
    std::vector<Matrix> bonus; ///< Gamma_h(x, a)

    int horizon() const { return static_cast<int>(transitions.size()); }
    const Matrix& signal(Signal s, int h) const { return s == Signal::kReward ? reward[h] : utility[h]; }

    /// The true model with zero bonus; evaluates exactly like the ground truth.
    static EmpiricalModel from_truth(const CmdpModel& model);
};

EmpiricalModel estimate_model(const VisitCounters& counters, const FeedbackArchive& archive,
                              double ridge, double beta);

/// Backward optimistic evaluation with bonus 2 Gamma, truncated to [0, H - h].
EvalEstimates evaluate_tabular(const EmpiricalModel& emp, const Policy& policy,
                               kernels::Exec exec = kernels::Exec::kParallel);

class TabularBackend final : public PolicyEvaluator {
  public:
    TabularBackend(int num_states, int num_actions, int horizon, double ridge, double beta,
                   kernels::Exec exec = kernels::Exec::kParallel);

    Backend backend() const override { return Backend::kTabular; }
    EvalEstimates evaluate(const Policy& policy) override;
    void observe(const Trajectory& traj, const EvalEstimates& est) override;

    const VisitCounters& counters() const { return counters_; }
    const FeedbackArchive& archive() const { return archive_; }

  private:
    double ridge_;
    double beta_;
    kernels::Exec exec_;
    VisitCounters counters_;
    FeedbackArchive archive_;
};

} // namespace cmdp
