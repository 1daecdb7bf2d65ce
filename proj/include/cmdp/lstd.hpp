#pragma once

#include "cmdp/evaluation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCore>

#include <array>
#include <functional>

namespace cmdp {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/**
 * Linear kernel features of a finite CMDP.
 *
 * `kernel` holds psi(x, a, x') in row (x * |A| + a) * |S| + x' and has d1
 * columns; `value` holds varphi(x, a) in row x * |A| + a and has d2 columns.
 * The theta vectors are the ground-truth parameters that reproduce the
 * wrapped model; the learner never reads them.
 */
struct FeatureMaps {
    int num_states = 0;
    int num_actions = 0;
    SparseRows kernel;
    SparseRows value;
    std::vector<Vector> theta_kernel;  ///< per step, length d1
    std::vector<Vector> theta_reward;  ///< per step, length d2
    std::vector<Vector> theta_utility; ///< per step, length d2

    int kernel_dim() const { return static_cast<int>(kernel.cols()); }
    int value_dim() const { return static_cast<int>(value.cols()); }
    int dim() const { return std::max(kernel_dim(), value_dim()); }
    Eigen::Index kernel_row(int x, int a, int next) const {
        return (static_cast<Eigen::Index>(x) * num_actions + a) * num_states + next;
    }
};

/// Worst-case deviations of a FeatureMaps object from the model it claims to represent.
struct FeatureReport {
    double kernel_error = 0.0;  ///< max |<psi, theta_h> - P_h|
    double reward_error = 0.0;  ///< max |<varphi, theta_r,h> - r_h|
    double utility_error = 0.0; ///< max |<varphi, theta_g,h> - g_h|
    double theta_kernel_norm = 0.0;  ///< max_h ||theta_h||
    double theta_signal_norm = 0.0;  ///< max_h max(||theta_r,h||, ||theta_g,h||)
    double integrated_norm = 0.0;    ///< max ||sum_x' psi V|| over probed V in [0, H]^S
    double value_norm = 0.0;         ///< max ||varphi(x, a)||

    bool consistent(double tol = 1e-10) const {
        return kernel_error <= tol && reward_error <= tol && utility_error <= tol;
    }
    /// Norm conditions of the linear kernel assumption for dimensions (d1, d2).
    bool norms_ok(int d1, int d2, int horizon) const;
};

/// Exhaustive consistency check at every (h, x, a, x'). Integrated-feature
/// norms are probed at every vertex of [0, H]^S when |S| <= 12, otherwise at
/// the all-H vector plus 256 random vertices.
FeatureReport check_feature_maps(const FeatureMaps& maps, const CmdpModel& model);

/// Integration of psi against a continuation value: row x * |A| + a of the
/// result is sum_x' psi(x, a, x') v_next(x').
using ValueIntegrator = std::function<Matrix(const FeatureMaps&, const Vector&)>;

/// Exact finite sum. Throws ContractError if v_next leaves [0, value_cap].
Matrix integrate_value_feature(const FeatureMaps& maps, const Vector& v_next, double value_cap);

/**
 * Ridge system Lambda = lambda I + sum_t f_t f_t^T with right-hand sides
 * sum_t f_t y_t (one column per target), kept as a Cholesky factor updated
 * by rank-one steps. Every sample is archived so the factor can be rebuilt.
 */
class RidgeSystem {
  public:
    RidgeSystem() = default;
    RidgeSystem(int dim, double ridge, int num_targets);

    void add(const Vector& feature, const Vector& targets);
    void add(const Vector& feature, double target) { add(feature, Vector::Constant(1, target)); }

    /// Lambda^{-1} * rhs(:, target). Rebuilds once from the archive on a
    /// failed factor, then throws NumericError.
    Vector solve(int target = 0);
    /// f^T Lambda^{-1} f
    double quad_form(const Vector& feature) const;

    Matrix lower() const { return llt_.matrixL(); }
    Matrix gram() const;              ///< from the incremental factor
    Matrix gram_from_archive() const; ///< lambda I + sum f f^T recomputed
    /// max |L_incremental - L_scratch| / max(1, max |L_scratch|)
    double factor_drift() const;
    void rebuild();

    int dim() const { return dim_; }
    int samples() const { return static_cast<int>(features_.size()); }
    double ridge() const { return ridge_; }
    const Matrix& rhs() const { return rhs_; }

  private:
    int dim_ = 0;
    double ridge_ = 1.0;
    Eigen::LLT<Matrix> llt_;
    Matrix rhs_;
    Matrix gram_sum_;
    std::vector<Vector> features_;
    std::vector<Vector> targets_;
    bool healthy_ = true;
};

/// Gram state of the least-squares evaluator: one value-feature system per
/// step (targets r and g) and one integrated-feature system per step and signal.
struct LstdState {
    std::vector<RidgeSystem> value;                 ///< Lambda_h, targets (r, g)
    std::vector<std::array<RidgeSystem, 2>> kernel; ///< Lambda_{r,h}, Lambda_{g,h}

    LstdState() = default;
    LstdState(const FeatureMaps& maps, int horizon, double ridge);

    RidgeSystem& kernel_system(int h, Signal s) { return kernel[h][s == Signal::kReward ? 0 : 1]; }
    const RidgeSystem& kernel_system(int h, Signal s) const {
        return kernel[h][s == Signal::kReward ? 0 : 1];
    }
};

/// w_{s,h} for the integrated-feature regression.
Vector ridge_solve(LstdState& state, int h, Signal s);
/// u_{s,h} for the value-feature regression of the immediate signal.
Vector ridge_solve_signal(LstdState& state, int h, Signal s);

struct BonusPair {
    double value;      ///< Gamma_h = beta * sqrt(varphi^T Lambda_h^{-1} varphi)
    double integrated; ///< Gamma_{s,h} = beta * sqrt(phi_s^T Lambda_{s,h}^{-1} phi_s)
};

BonusPair ucb_bonus(const LstdState& state, int h, Signal s, const Vector& value_feature,
                    const Vector& integrated_feature, double beta);

struct LstdEvaluation {
    EvalEstimates estimates;
    /// integrated[h][s]: (|S||A|) x d1 features built from V_{s,h+1} of this episode.
    std::vector<std::array<Matrix, 2>> integrated;
};

/// Backward least-squares evaluation with UCB bonuses, truncated to [0, H - h].
LstdEvaluation evaluate_lstd(LstdState& state, const FeatureMaps& maps, const Policy& policy,
                             double beta, const ValueIntegrator& integrate = {},
                             kernels::Exec exec = kernels::Exec::kParallel);

/// PolicyEvaluator over an LstdState, with the running diagnostics the
/// acceptance suite audits.
class LstdBackend final : public PolicyEvaluator {
  public:
    LstdBackend(FeatureMaps maps, int horizon, double ridge, double beta,
                kernels::Exec exec = kernels::Exec::kParallel);

    Backend backend() const override { return Backend::kLstd; }
    EvalEstimates evaluate(const Policy& policy) override;
    void observe(const Trajectory& traj, const EvalEstimates& est) override;

    void set_integrator(ValueIntegrator f) { integrate_ = std::move(f); }

    const LstdState& state() const { return state_; }
    const FeatureMaps& maps() const { return maps_; }
    int episodes_observed() const { return episodes_; }

    /// Per step: sum over observed episodes of min(1, varphi^T Lambda_h^{-1} varphi)
    /// at the visited pair, taken before that episode's update.
    const std::vector<double>& elliptical_potential() const { return elliptical_; }
    /// 2 d log((d K + lambda) / lambda) for the episodes observed so far.
    double elliptical_bound() const;
    /// Largest factor drift seen at the periodic audits (every 64 episodes).
    double max_factor_drift() const { return max_drift_; }
    int drift_audits() const { return audits_; }

    static constexpr int kAuditPeriod = 64;
    static constexpr double kDriftTol = 1e-8;

  private:
    FeatureMaps maps_;
    int horizon_;
    double ridge_;
    double beta_;
    kernels::Exec exec_;
    LstdState state_;
    ValueIntegrator integrate_;
    Matrix value_rows_; ///< dense varphi, (|S||A|) x d2
    std::vector<std::array<Matrix, 2>> last_integrated_;
    std::vector<double> elliptical_;
    int episodes_ = 0;
    double max_drift_ = 0.0;
    int audits_ = 0;
};

} // namespace cmdp
