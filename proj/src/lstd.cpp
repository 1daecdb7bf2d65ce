#include "cmdp/lstd.hpp"

#include "cmdp/errors.hpp"

#include <cmath>

namespace cmdp {

bool FeatureReport::norms_ok(int d1, int d2, int horizon) const {
    constexpr double slack = 1e-12;
    return theta_kernel_norm <= std::sqrt(d1) + slack &&
           theta_signal_norm <= std::sqrt(d2) + slack && value_norm <= 1.0 + slack &&
           integrated_norm <= std::sqrt(d1) * horizon + slack;
}

FeatureReport check_feature_maps(const FeatureMaps& maps, const CmdpModel& model) {
    const int S = model.num_states(), A = model.num_actions(), H = model.horizon();
    if (maps.num_states != S || maps.num_actions != A ||
        static_cast<int>(maps.theta_kernel.size()) != H ||
        static_cast<int>(maps.theta_reward.size()) != H ||
        static_cast<int>(maps.theta_utility.size()) != H)
        throw StructuralError("feature maps do not match the model dimensions");

    FeatureReport rep;
    for (int h = 0; h < H; ++h) {
        const Vector kernel_vals = maps.kernel * maps.theta_kernel[h];
        const Vector reward_vals = maps.value * maps.theta_reward[h];
        const Vector utility_vals = maps.value * maps.theta_utility[h];
        for (int x = 0; x < S; ++x) {
            for (int a = 0; a < A; ++a) {
                for (int y = 0; y < S; ++y)
                    rep.kernel_error =
                        std::max(rep.kernel_error, std::abs(kernel_vals(maps.kernel_row(x, a, y)) -
                                                            model.transition(h, x, a, y)));
                const Eigen::Index row = x * A + a;
                rep.reward_error =
                    std::max(rep.reward_error, std::abs(reward_vals(row) - model.reward(h)(x, a)));
                rep.utility_error = std::max(rep.utility_error,
                                             std::abs(utility_vals(row) - model.utility(h)(x, a)));
            }
        }
        rep.theta_kernel_norm = std::max(rep.theta_kernel_norm, maps.theta_kernel[h].norm());
        rep.theta_signal_norm = std::max({rep.theta_signal_norm, maps.theta_reward[h].norm(),
                                          maps.theta_utility[h].norm()});
    }

    for (int row = 0; row < S * A; ++row) rep.value_norm = std::max(rep.value_norm, maps.value.row(row).norm());

    // ||sum_x' psi V|| is convex in V, so its maximum over the box sits at a vertex
    auto probe = [&](const Vector& v) {
        const Matrix integrated = integrate_value_feature(maps, v, H);
        rep.integrated_norm = std::max(rep.integrated_norm, integrated.rowwise().norm().maxCoeff());
    };
    if (S <= 12) {
        for (long mask = 0; mask < (1L << S); ++mask) {
            Vector v(S);
            for (int y = 0; y < S; ++y) v(y) = (mask >> y & 1) ? H : 0.0;
            probe(v);
        }
    } else {
        probe(Vector::Constant(S, H));
        Rng rng(0x5eed);
        for (int i = 0; i < 256; ++i) {
            Vector v(S);
            for (int y = 0; y < S; ++y) v(y) = rng.uniform() < 0.5 ? 0.0 : H;
            probe(v);
        }
    }
    return rep;
}

Matrix integrate_value_feature(const FeatureMaps& maps, const Vector& v_next, double value_cap) {
    const int S = maps.num_states, A = maps.num_actions;
    if (v_next.size() != S) throw StructuralError("integrate_value_feature: wrong value length");
    if (!v_next.allFinite() || v_next.minCoeff() < -1e-9 || v_next.maxCoeff() > value_cap + 1e-9)
        throw ContractError("integrate_value_feature: continuation value outside [0, H]");
    Matrix out = Matrix::Zero(S * A, maps.kernel_dim());
    const int rows = S * A;
#pragma omp parallel for schedule(static)
    for (int row = 0; row < rows; ++row) {
        for (int y = 0; y < S; ++y) {
            const double v = v_next(y);
            if (v == 0.0) continue;
            for (SparseRows::InnerIterator it(maps.kernel, static_cast<Eigen::Index>(row) * S + y); it;
                 ++it)
                out(row, it.col()) += it.value() * v;
        }
    }
    return out;
}

RidgeSystem::RidgeSystem(int dim, double ridge, int num_targets)
    : dim_(dim), ridge_(ridge), rhs_(Matrix::Zero(dim, num_targets)),
      gram_sum_(ridge * Matrix::Identity(dim, dim)) {
    if (ridge <= 0.0) throw ConfigError("ridge parameter must be positive");
    llt_.compute(gram_sum_);
}

void RidgeSystem::add(const Vector& feature, const Vector& targets) {
    if (feature.size() != dim_ || targets.size() != rhs_.cols())
        throw StructuralError("RidgeSystem::add: dimension mismatch");
    features_.push_back(feature);
    targets_.push_back(targets);
    rhs_.noalias() += feature * targets.transpose();
    gram_sum_.noalias() += feature * feature.transpose();
    llt_.rankUpdate(feature, 1.0);
    if (llt_.info() != Eigen::Success) healthy_ = false;
}

Vector RidgeSystem::solve(int target) {
    if (!healthy_) {
        rebuild();
        if (!healthy_) throw NumericError("ridge system is not positive definite after rebuild");
    }
    Vector w = llt_.solve(rhs_.col(target));
    if (!w.allFinite()) {
        rebuild();
        w = llt_.solve(rhs_.col(target));
        if (!healthy_ || !w.allFinite()) throw NumericError("ridge solve produced non-finite weights");
    }
    return w;
}

double RidgeSystem::quad_form(const Vector& feature) const {
    const Vector z = llt_.matrixL().solve(feature);
    return z.squaredNorm();
}

Matrix RidgeSystem::gram() const {
    const Matrix L = llt_.matrixL();
    return L * L.transpose();
}

Matrix RidgeSystem::gram_from_archive() const {
    Matrix g = ridge_ * Matrix::Identity(dim_, dim_);
    for (const auto& f : features_) g.noalias() += f * f.transpose();
    return g;
}

double RidgeSystem::factor_drift() const {
    // gram_sum_ accumulates the archive in insertion order, so it equals
    // gram_from_archive() bit for bit at O(d^2) cost per sample
    Eigen::LLT<Matrix> scratch(gram_sum_);
    if (scratch.info() != Eigen::Success) return INFINITY;
    const Matrix Ls = scratch.matrixL();
    const Matrix Li = llt_.matrixL();
    return (Li - Ls).cwiseAbs().maxCoeff() / std::max(1.0, Ls.cwiseAbs().maxCoeff());
}

void RidgeSystem::rebuild() {
    gram_sum_ = gram_from_archive();
    llt_.compute(gram_sum_);
    healthy_ = llt_.info() == Eigen::Success;
}

LstdState::LstdState(const FeatureMaps& maps, int horizon, double ridge) {
    for (int h = 0; h < horizon; ++h) {
        value.emplace_back(maps.value_dim(), ridge, 2);
        kernel.push_back({RidgeSystem(maps.kernel_dim(), ridge, 1),
                          RidgeSystem(maps.kernel_dim(), ridge, 1)});
    }
}

Vector ridge_solve(LstdState& state, int h, Signal s) { return state.kernel_system(h, s).solve(0); }

Vector ridge_solve_signal(LstdState& state, int h, Signal s) {
    return state.value.at(h).solve(s == Signal::kReward ? 0 : 1);
}

BonusPair ucb_bonus(const LstdState& state, int h, Signal s, const Vector& value_feature,
                    const Vector& integrated_feature, double beta) {
    return {beta * std::sqrt(state.value.at(h).quad_form(value_feature)),
            beta * std::sqrt(state.kernel_system(h, s).quad_form(integrated_feature))};
}

LstdEvaluation evaluate_lstd(LstdState& state, const FeatureMaps& maps, const Policy& policy,
                             double beta, const ValueIntegrator& integrate, kernels::Exec exec) {
    const int S = maps.num_states, A = maps.num_actions;
    const int H = static_cast<int>(state.value.size());
    if (policy.num_states() != S || policy.num_actions() != A || policy.horizon() != H)
        throw StructuralError("evaluate_lstd: policy dimensions do not match the features");

    LstdEvaluation out;
    out.estimates = EvalEstimates::zeros(S, A, H, Backend::kLstd);
    out.integrated.resize(H);
    EvalEstimates& est = out.estimates;
    const Matrix value_rows = Matrix(maps.value);

    for (int h = H - 1; h >= 0; --h) {
        const double cap = H - h;
        RidgeSystem& value_sys = state.value[h];
        Vector quad;
        kernels::quadratic_forms(exec, value_sys.lower(), value_rows, quad);
        const Vector gamma_value = beta * quad.cwiseSqrt();

        for (Signal s : {Signal::kReward, Signal::kUtility}) {
            const int si = s == Signal::kReward ? 0 : 1;
            const Vector& v_next = est.v(s, h + 1);
            Matrix phi = integrate ? integrate(maps, v_next) : integrate_value_feature(maps, v_next, H);
            RidgeSystem& kernel_sys = state.kernel_system(h, s);
            const Vector w = kernel_sys.solve(0);
            const Vector u = value_sys.solve(si);
            Vector quad_s;
            kernels::quadratic_forms(exec, kernel_sys.lower(), phi, quad_s);
            const Vector bonus = gamma_value + beta * quad_s.cwiseSqrt();
            const Vector raw = value_rows * u + phi * w + bonus;
            if (!raw.allFinite()) throw NumericError("evaluate_lstd: non-finite Q estimate");

            Matrix& q = est.q(s, h);
            Matrix& b = est.bonus(s, h);
            for (int x = 0; x < S; ++x)
                for (int a = 0; a < A; ++a) {
                    q(x, a) = std::clamp(raw(x * A + a), 0.0, cap);
                    b(x, a) = bonus(x * A + a);
                }
            kernels::policy_average(exec, q, policy.step(h), est.v(s, h));
            out.integrated[h][si] = std::move(phi);
        }
    }
    return out;
}

LstdBackend::LstdBackend(FeatureMaps maps, int horizon, double ridge, double beta,
                         kernels::Exec exec)
    : maps_(std::move(maps)), horizon_(horizon), ridge_(ridge), beta_(beta), exec_(exec),
      state_(maps_, horizon, ridge), value_rows_(Matrix(maps_.value)),
      elliptical_(horizon, 0.0) {
    if (beta < 0.0) throw ConfigError("bonus scale beta must be nonnegative");
}

EvalEstimates LstdBackend::evaluate(const Policy& policy) {
    auto result = evaluate_lstd(state_, maps_, policy, beta_, integrate_, exec_);
    last_integrated_ = std::move(result.integrated);
    return std::move(result.estimates);
}

void LstdBackend::observe(const Trajectory& traj, const EvalEstimates& est) {
    if (static_cast<int>(last_integrated_.size()) != horizon_ ||
        static_cast<int>(traj.steps.size()) != horizon_)
        throw StructuralError("LstdBackend::observe called without a matching evaluate");
    const int A = maps_.num_actions;
    for (int h = 0; h < horizon_; ++h) {
        const auto& step = traj.steps[h];
        const int row = step.state * A + step.action;
        const int next = traj.state_at(h + 1);
        const Vector phi = value_rows_.row(row).transpose();
        RidgeSystem& value_sys = state_.value[h];
        elliptical_[h] += std::min(1.0, value_sys.quad_form(phi));
        Vector signals(2);
        signals << step.reward, step.utility;
        value_sys.add(phi, signals);
        for (Signal s : {Signal::kReward, Signal::kUtility}) {
            const int si = s == Signal::kReward ? 0 : 1;
            const double target = est.v(s, h + 1)(next);
            state_.kernel_system(h, s).add(last_integrated_[h][si].row(row).transpose(), target);
        }
    }
    last_integrated_.clear();

    if (++episodes_ % kAuditPeriod == 0) {
        ++audits_;
        auto audit = [&](RidgeSystem& sys) {
            const double drift = sys.factor_drift();
            max_drift_ = std::max(max_drift_, drift);
            if (drift > kDriftTol) sys.rebuild();
        };
        for (int h = 0; h < horizon_; ++h) {
            audit(state_.value[h]);
            audit(state_.kernel[h][0]);
            audit(state_.kernel[h][1]);
        }
    }
}

double LstdBackend::elliptical_bound() const {
    const double d = maps_.dim();
    return 2.0 * d * std::log((d * episodes_ + ridge_) / ridge_);
}

} // namespace cmdp
