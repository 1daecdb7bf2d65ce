#pragma once

#include "cmdp/evaluation.hpp"
#include "cmdp/hindsight.hpp"
#include "cmdp/ledger.hpp"

#include <array>
#include <memory>
#include <optional>

namespace cmdp {

struct FeatureMaps;

struct OpdopConfig {
    double step_size = 0.0;  ///< alpha
    double bonus_scale = 0.0; ///< beta
    double dual_step = 0.0;  ///< eta
    double mixing = 1.0;     ///< theta
    double ridge = 1.0;      ///< lambda
    double dual_cap = 0.0;   ///< chi
    int episodes = 0;        ///< K
    double failure_prob = 0.1;

    /// Throws ConfigError unless alpha, eta, lambda, chi > 0, beta >= 0,
    /// theta in (0, 1], p in (0, 1) and K >= 0.
    void validate() const;
};

/// Step-size rule for alpha. kTheorem is sqrt(log|A|) / (H^2 K); kAnalysis is
/// sqrt(log|A|) / (H^2 sqrt(K)), the rate the regret proof actually balances.
enum class AlphaRule { kTheorem, kAnalysis };

const char* to_string(AlphaRule r);
AlphaRule alpha_rule_from_string(const std::string& name);

struct ScheduleInputs {
    int num_states = 0;
    int num_actions = 0;
    int horizon = 0;
    int episodes = 0;
    int dim = 0; ///< d = max(d1, d2), linear backend only
    double failure_prob = 0.1;
    double slater_gap = 0.0;
    double c1 = 1.0;
    Backend backend = Backend::kLstd;
    AlphaRule alpha_rule = AlphaRule::kTheorem;
    std::optional<double> dual_cap; ///< overrides 2H / gamma
};

/// alpha, eta = 1/sqrt(K), theta = 1/K, lambda = 1, chi = 2H/gamma, and
/// beta = C1 sqrt(d H^2 log(dT/p)) (linear) or C1 H sqrt(|S| log(|S||A|T/p))
/// (tabular) with T = HK. K = 0 is scheduled as K = 1. Throws ConfigError
/// when gamma = 0 and no explicit chi is given, or when |A| < 2.
OpdopConfig default_schedule(const ScheduleInputs& in);

/// (1 - theta) pi + theta Unif(A) at every step and state.
Policy mix_policy(const Policy& policy, double theta);

/// pi(a|x) proportional to mixed(a|x) exp(alpha (Q_r + Y Q_g)(x, a)) at every
/// step. Throws NumericError on a non-finite Q entry.
Policy policy_improve(const Policy& mixed, const EvalEstimates& est, double dual, double alpha,
                      kernels::Exec exec = kernels::Exec::kParallel);

struct DualRecord {
    int k;
    double value;
    double signal; ///< b - V_g,1 estimate used for this step
};

struct DualState {
    double value = 0.0;
    std::vector<DualRecord> history;
};

/// Y <- clamp(Y + eta (b - v_g1), 0, chi), with the step appended to the history.
void dual_update(DualState& state, double offset, double v_g1, double eta, double chi);

/// Counters the acceptance suite audits on every run.
struct RunDiagnostics {
    /// Visited (k, h) triples per signal (reward, utility) and how many fell in the optimism band.
    std::array<long, 2> optimism_total{0, 0};
    std::array<long, 2> optimism_in_band{0, 0};
    int dual_violations = 0;
    int simplex_violations = 0;
    int range_violations = 0;
    double min_action_prob = 1.0;
    /// Linear backend only: per-step elliptical potential, its bound and the factor drift.
    std::vector<double> elliptical_potential;
    double elliptical_bound = 0.0;
    double max_factor_drift = 0.0;
    DualState dual;

    double optimism_rate(Signal s) const;
    bool elliptical_ok() const;
};

/// Builds the evaluator for a backend. The linear backend requires features.
std::unique_ptr<PolicyEvaluator> make_backend(Backend backend, const CmdpModel& model,
                                              const FeatureMaps* features, const OpdopConfig& config,
                                              kernels::Exec exec = kernels::Exec::kParallel);

/**
 * Episodes k = 1 .. K + 1 of the primal-dual loop: mix and improve with the
 * previous estimates and dual, act, step the dual on the previous utility
 * estimate, evaluate pi^k from episodes before k, archive episode k. Each
 * pi^k with k <= K is scored by exact evaluation against the hindsight value.
 */
RegretLedger run_opdop(const CmdpModel& model, const OpdopConfig& config, PolicyEvaluator& backend,
                       std::uint64_t seed, const HindsightSolution& hindsight,
                       RunDiagnostics* diagnostics = nullptr,
                       kernels::Exec exec = kernels::Exec::kParallel);

RegretLedger run_opdop(const CmdpModel& model, const OpdopConfig& config, Backend backend,
                       const FeatureMaps* features, std::uint64_t seed,
                       const HindsightSolution& hindsight, RunDiagnostics* diagnostics = nullptr);

} // namespace cmdp
