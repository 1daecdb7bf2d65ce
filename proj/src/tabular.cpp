#include "cmdp/tabular.hpp"

#include "cmdp/errors.hpp"

#include <cmath>

namespace cmdp {

VisitCounters::VisitCounters(int num_states, int num_actions, int horizon)
    : num_states_(num_states), num_actions_(num_actions), horizon_(horizon),
      pair_(static_cast<std::size_t>(horizon) * num_states * num_actions, 0),
      transition_(static_cast<std::size_t>(horizon) * num_states * num_actions * num_states, 0) {}

bool VisitCounters::conserved() const {
    for (int h = 0; h < horizon_; ++h) {
        std::int64_t per_step = 0;
        for (int x = 0; x < num_states_; ++x)
            for (int a = 0; a < num_actions_; ++a) {
                std::int64_t row = 0;
                for (int y = 0; y < num_states_; ++y) row += transition(h, x, a, y);
                if (row != pair(h, x, a)) return false;
                per_step += pair(h, x, a);
            }
        if (per_step != episodes_) return false;
    }
    return true;
}

void update_counters(VisitCounters& c, const Trajectory& traj) {
    if (static_cast<int>(traj.steps.size()) != c.horizon_)
        throw StructuralError("update_counters: trajectory length differs from the horizon");
    auto in_range = [&](int v, int n) { return v >= 0 && v < n; };
    for (int h = 0; h < c.horizon_; ++h) {
        const auto& st = traj.steps[h];
        const int next = traj.state_at(h + 1);
        if (!in_range(st.state, c.num_states_) || !in_range(st.action, c.num_actions_) ||
            !in_range(next, c.num_states_))
            throw StructuralError("update_counters: state or action index out of range");
    }
    for (int h = 0; h < c.horizon_; ++h) {
        const auto& st = traj.steps[h];
        const std::size_t idx = c.pair_index(h, st.state, st.action);
        ++c.pair_[idx];
        ++c.transition_[idx * c.num_states_ + traj.state_at(h + 1)];
    }
    ++c.episodes_;
}

FeedbackArchive::FeedbackArchive(int S, int A, int H)
    : reward(H, Matrix::Zero(S, A)), utility(H, Matrix::Zero(S, A)) {}

void FeedbackArchive::record(const Trajectory& traj) {
    for (int h = 0; h < static_cast<int>(traj.steps.size()); ++h) {
        const auto& st = traj.steps[h];
        reward.at(h)(st.state, st.action) = st.reward;
        utility.at(h)(st.state, st.action) = st.utility;
    }
}

EmpiricalModel EmpiricalModel::from_truth(const CmdpModel& model) {
    EmpiricalModel emp;
    emp.num_states = model.num_states();
    emp.num_actions = model.num_actions();
    for (int h = 0; h < model.horizon(); ++h) {
        emp.transitions.push_back(model.transitions(h));
        emp.reward.push_back(model.reward(h));
        emp.utility.push_back(model.utility(h));
        emp.bonus.push_back(Matrix::Zero(model.num_states(), model.num_actions()));
    }
    return emp;
}

EmpiricalModel estimate_model(const VisitCounters& c, const FeedbackArchive& archive, double ridge,
                              double beta) {
    if (ridge <= 0.0) throw ConfigError("estimate_model: ridge must be positive");
    const int S = c.num_states(), A = c.num_actions(), H = c.horizon();
    EmpiricalModel emp;
    emp.num_states = S;
    emp.num_actions = A;
    emp.transitions.assign(H, Matrix::Zero(S * A, S));
    emp.reward.assign(H, Matrix::Zero(S, A));
    emp.utility.assign(H, Matrix::Zero(S, A));
    emp.bonus.assign(H, Matrix::Zero(S, A));
    for (int h = 0; h < H; ++h) {
        for (int x = 0; x < S; ++x) {
            for (int a = 0; a < A; ++a) {
                const double n = static_cast<double>(c.pair(h, x, a));
                const double denom = n + ridge;
                for (int y = 0; y < S; ++y)
                    emp.transitions[h](x * A + a, y) = static_cast<double>(c.transition(h, x, a, y)) / denom;
                emp.reward[h](x, a) = n * archive.reward[h](x, a) / denom;
                emp.utility[h](x, a) = n * archive.utility[h](x, a) / denom;
                emp.bonus[h](x, a) = beta / std::sqrt(denom);
            }
        }
    }
    return emp;
}

EvalEstimates evaluate_tabular(const EmpiricalModel& emp, const Policy& policy, kernels::Exec exec) {
    const int S = emp.num_states, A = emp.num_actions, H = emp.horizon();
    if (policy.num_states() != S || policy.num_actions() != A || policy.horizon() != H)
        throw StructuralError("evaluate_tabular: policy dimensions do not match the model");
    EvalEstimates est = EvalEstimates::zeros(S, A, H, Backend::kTabular);
    for (int h = H - 1; h >= 0; --h) {
        const double cap = H - h;
        const Matrix twice_bonus = 2.0 * emp.bonus[h];
        for (Signal s : {Signal::kReward, Signal::kUtility}) {
            Matrix q;
            kernels::backup(exec, emp.transitions[h], emp.signal(s, h) + twice_bonus,
                            est.v(s, h + 1), q);
            est.q(s, h) = q.cwiseMax(0.0).cwiseMin(cap);
            est.bonus(s, h) = twice_bonus;
            kernels::policy_average(exec, est.q(s, h), policy.step(h), est.v(s, h));
        }
    }
    return est;
}

TabularBackend::TabularBackend(int S, int A, int H, double ridge, double beta, kernels::Exec exec)
    : ridge_(ridge), beta_(beta), exec_(exec), counters_(S, A, H), archive_(S, A, H) {
    if (ridge <= 0.0) throw ConfigError("ridge parameter must be positive");
    if (beta < 0.0) throw ConfigError("bonus scale beta must be nonnegative");
}

EvalEstimates TabularBackend::evaluate(const Policy& policy) {
    return evaluate_tabular(estimate_model(counters_, archive_, ridge_, beta_), policy, exec_);
}

void TabularBackend::observe(const Trajectory& traj, const EvalEstimates&) {
    update_counters(counters_, traj);
    archive_.record(traj);
}

} // namespace cmdp
