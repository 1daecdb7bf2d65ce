#include "cmdp/opdop.hpp"

#include "cmdp/errors.hpp"
#include "cmdp/lstd.hpp"
#include "cmdp/rng.hpp"
#include "cmdp/tabular.hpp"

#include <algorithm>
#include <cmath>

namespace cmdp {

void OpdopConfig::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(what);
    };
    need(std::isfinite(step_size) && step_size > 0.0, "step size alpha must be positive");
    need(std::isfinite(bonus_scale) && bonus_scale >= 0.0, "bonus scale beta must be nonnegative");
    need(std::isfinite(dual_step) && dual_step > 0.0, "dual step eta must be positive");
    need(mixing > 0.0 && mixing <= 1.0, "mixing theta must lie in (0, 1]");
    need(std::isfinite(ridge) && ridge > 0.0, "ridge lambda must be positive");
    need(std::isfinite(dual_cap) && dual_cap > 0.0, "dual cap chi must be positive");
    need(episodes >= 0, "episode count must be nonnegative");
    need(failure_prob > 0.0 && failure_prob < 1.0, "failure probability must lie in (0, 1)");
}

const char* to_string(AlphaRule r) { return r == AlphaRule::kTheorem ? "theorem" : "analysis"; }

AlphaRule alpha_rule_from_string(const std::string& name) {
    if (name == "theorem") return AlphaRule::kTheorem;
    if (name == "analysis") return AlphaRule::kAnalysis;
    throw ConfigError("unknown alpha rule '" + name + "' (expected theorem or analysis)");
}

OpdopConfig default_schedule(const ScheduleInputs& in) {
    if (in.num_states <= 0 || in.num_actions <= 0 || in.horizon <= 0 || in.episodes < 0)
        throw ConfigError("schedule dimensions must be positive");
    if (in.num_actions < 2) throw ConfigError("a single action gives a zero step size; need |A| >= 2");
    if (in.backend == Backend::kLstd && in.dim <= 0) throw ConfigError("linear schedule needs d > 0");
    if (!(in.failure_prob > 0.0 && in.failure_prob < 1.0))
        throw ConfigError("failure probability must lie in (0, 1)");
    const double H = in.horizon;
    const double K = std::max(1, in.episodes);
    const double T = H * K;
    OpdopConfig c;
    c.episodes = in.episodes;
    c.failure_prob = in.failure_prob;
    const double root_log_a = std::sqrt(std::log(static_cast<double>(in.num_actions)));
    c.step_size = in.alpha_rule == AlphaRule::kTheorem ? root_log_a / (H * H * K)
                                                       : root_log_a / (H * H * std::sqrt(K));
    c.dual_step = 1.0 / std::sqrt(K);
    c.mixing = 1.0 / K;
    c.ridge = 1.0;
    if (in.backend == Backend::kLstd) {
        const double d = in.dim;
        c.bonus_scale = in.c1 * std::sqrt(d * H * H * std::log(d * T / in.failure_prob));
    } else {
        const double S = in.num_states, A = in.num_actions;
        c.bonus_scale = in.c1 * H * std::sqrt(S * std::log(S * A * T / in.failure_prob));
    }
    if (in.dual_cap) {
        c.dual_cap = *in.dual_cap;
    } else {
        if (!(in.slater_gap > 0.0))
            throw ConfigError("Slater gap is zero; pass an explicit dual cap chi");
        c.dual_cap = 2.0 * H / in.slater_gap;
    }
    c.validate();
    return c;
}

Policy mix_policy(const Policy& policy, double theta) {
    if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("mixing theta must lie in (0, 1]");
    Policy out = policy;
    const double floor = theta / policy.num_actions();
    for (int h = 0; h < policy.horizon(); ++h) {
        if (theta == 1.0)
            out.step(h).setConstant(floor);
        else
            out.step(h) = ((1.0 - theta) * policy.step(h)).array() + floor;
    }
    return out;
}

Policy policy_improve(const Policy& mixed, const EvalEstimates& est, double dual, double alpha,
                      kernels::Exec exec) {
    if (est.horizon() != mixed.horizon()) throw StructuralError("policy_improve: horizon mismatch");
    Policy out = mixed;
    for (int h = 0; h < mixed.horizon(); ++h) {
        if (!est.q_reward[h].allFinite() || !est.q_utility[h].allFinite())
            throw NumericError("policy_improve: non-finite Q entry at step " + std::to_string(h));
        kernels::mirror_step(exec, mixed.step(h), est.q_reward[h], est.q_utility[h], dual, alpha, out.step(h));
    }
    return out;
}

void dual_update(DualState& state, double offset, double v_g1, double eta, double chi) {
    const double signal = offset - v_g1;
    state.value = std::clamp(state.value + eta * signal, 0.0, chi);
    const int k = state.history.empty() ? 1 : state.history.back().k + 1;
    state.history.push_back({k, state.value, signal});
}

double RunDiagnostics::optimism_rate(Signal s) const {
    const int i = s == Signal::kReward ? 0 : 1;
    return optimism_total[i] == 0 ? 1.0
                                  : static_cast<double>(optimism_in_band[i]) / optimism_total[i];
}

bool RunDiagnostics::elliptical_ok() const {
    return std::all_of(elliptical_potential.begin(), elliptical_potential.end(),
                       [&](double v) { return v <= elliptical_bound; });
}

std::unique_ptr<PolicyEvaluator> make_backend(Backend backend, const CmdpModel& model,
                                              const FeatureMaps* features, const OpdopConfig& config,
                                              kernels::Exec exec) {
    if (backend == Backend::kTabular)
        return std::make_unique<TabularBackend>(model.num_states(), model.num_actions(), model.horizon(),
                                                config.ridge, config.bonus_scale, exec);
    if (features == nullptr) throw ConfigError("the lstd backend needs a feature map");
    if (features->num_states != model.num_states() || features->num_actions != model.num_actions())
        throw StructuralError("feature map dimensions do not match the model");
    return std::make_unique<LstdBackend>(*features, model.horizon(), config.ridge, config.bonus_scale, exec);
}

namespace {

constexpr double kBandTol = 1e-9;

void tally_optimism(const CmdpModel& model, const EvalEstimates& est, const Trajectory& traj,
                    RunDiagnostics& diag) {
    for (int h = 0; h < model.horizon(); ++h) {
        const int x = traj.steps[h].state, a = traj.steps[h].action;
        const auto row = model.transition_row(h, x, a);
        for (Signal s : {Signal::kReward, Signal::kUtility}) {
            const int i = s == Signal::kReward ? 0 : 1;
            const double iota = model.signal(s, h)(x, a) + row.dot(est.v(s, h + 1)) - est.q(s, h)(x, a);
            const double band = 2.0 * est.bonus(s, h)(x, a);
            ++diag.optimism_total[i];
            if (iota <= kBandTol && iota >= -band - kBandTol) ++diag.optimism_in_band[i];
        }
    }
}

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what);
}

} // namespace

RegretLedger run_opdop(const CmdpModel& model, const OpdopConfig& config, PolicyEvaluator& backend,
                       std::uint64_t seed, const HindsightSolution& hindsight, RunDiagnostics* diagnostics,
                       kernels::Exec exec) {
    config.validate();
    const int S = model.num_states(), A = model.num_actions(), H = model.horizon();
    const int x1 = model.initial_state();
    const double b = model.offset();
    RunDiagnostics local;
    RunDiagnostics& diag = diagnostics ? *diagnostics : local;
    diag = RunDiagnostics{};

    RegretLedger ledger(hindsight.optimal_value, b);
    Rng rng(seed);
    Policy policy = Policy::uniform(S, A, H);
    EvalEstimates prev = EvalEstimates::zeros(S, A, H, backend.backend());
    double v_g_prev = b;

    for (int k = 1; k <= config.episodes + 1; ++k) {
        const double dual_used = diag.dual.value;
        policy = policy_improve(mix_policy(policy, config.mixing), prev, dual_used, config.step_size, exec);
        diag.simplex_violations += policy.count_simplex_violations(1e-10);
        for (int h = 0; h < H; ++h) diag.min_action_prob = std::min(diag.min_action_prob, policy.step(h).minCoeff());

        const Trajectory traj = run_episode(model, policy, rng, k);

        dual_update(diag.dual, b, v_g_prev, config.dual_step, config.dual_cap);
        if (diag.dual.value < 0.0 || diag.dual.value > config.dual_cap) ++diag.dual_violations;

        EvalEstimates est = backend.evaluate(policy);
        diag.range_violations += count_range_violations(est, 1e-9);
        tally_optimism(model, est, traj, diag);
        backend.observe(traj, est);

        const double v_r_est = est.v_reward[0](x1);
        const double v_g_est = est.v_utility[0](x1);
        check_finite(v_r_est, "reward estimate");
        check_finite(v_g_est, "utility estimate");

        if (k <= config.episodes) {
            const ValueFunctions truth = evaluate_policy_exact(model, policy, exec);
            double bonus_sum = 0.0;
            for (int h = 0; h < H; ++h) bonus_sum += est.bonus_reward[h](traj.steps[h].state, traj.steps[h].action);
            const LedgerRow& row = ledger.score_episode(truth.v_reward[0](x1), truth.v_utility[0](x1), v_r_est,
                                                        v_g_est, diag.dual.value, bonus_sum);
            check_finite(row.regret_cum, "regret");
            check_finite(row.violation_cum, "violation");
        }
        prev = std::move(est);
        v_g_prev = v_g_est;
    }

    if (const auto* lstd = dynamic_cast<const LstdBackend*>(&backend)) {
        diag.elliptical_potential = lstd->elliptical_potential();
        diag.elliptical_bound = lstd->elliptical_bound();
        diag.max_factor_drift = lstd->max_factor_drift();
    }
    return ledger;
}

RegretLedger run_opdop(const CmdpModel& model, const OpdopConfig& config, Backend backend,
                       const FeatureMaps* features, std::uint64_t seed, const HindsightSolution& hindsight,
                       RunDiagnostics* diagnostics) {
    auto evaluator = make_backend(backend, model, features, config);
    return run_opdop(model, config, *evaluator, seed, hindsight, diagnostics);
}

} // namespace cmdp
