#pragma once

// Per-row sweeps shared by the exact evaluator, the policy update and the
// least-squares evaluator. Every kernel exists twice: a plain serial loop kept
// as the reference, and an OpenMP version. Rows are independent and each row
// is reduced by one thread, so both variants produce bit-identical output.

#include <Eigen/Dense>

namespace cmdp::kernels {

enum class Exec { kSerial, kParallel };

namespace serial {

/// q(x, a) = stage(x, a) + transitions.row(x * A + a) . v_next
void backup(const Eigen::MatrixXd& transitions, const Eigen::MatrixXd& stage,
            const Eigen::VectorXd& v_next, Eigen::MatrixXd& q);

/// v(x) = sum_a q(x, a) * pi(x, a)
void policy_average(const Eigen::MatrixXd& q, const Eigen::MatrixXd& pi, Eigen::VectorXd& v);

/// out(x, .) proportional to base(x, .) * exp(alpha * (q_r + dual * q_g)(x, .)),
/// evaluated in log space with max subtraction.
void mirror_step(const Eigen::MatrixXd& base, const Eigen::MatrixXd& q_r,
                 const Eigen::MatrixXd& q_g, double dual, double alpha, Eigen::MatrixXd& out);

/// out(i) = rows.row(i) * (L L^T)^{-1} * rows.row(i)^T for lower-triangular L.
void quadratic_forms(const Eigen::MatrixXd& lower, const Eigen::MatrixXd& rows,
                     Eigen::VectorXd& out);

} // namespace serial

namespace parallel {

void backup(const Eigen::MatrixXd& transitions, const Eigen::MatrixXd& stage,
            const Eigen::VectorXd& v_next, Eigen::MatrixXd& q);
void policy_average(const Eigen::MatrixXd& q, const Eigen::MatrixXd& pi, Eigen::VectorXd& v);
void mirror_step(const Eigen::MatrixXd& base, const Eigen::MatrixXd& q_r,
                 const Eigen::MatrixXd& q_g, double dual, double alpha, Eigen::MatrixXd& out);
void quadratic_forms(const Eigen::MatrixXd& lower, const Eigen::MatrixXd& rows,
                     Eigen::VectorXd& out);

} // namespace parallel

inline void backup(Exec e, const Eigen::MatrixXd& transitions, const Eigen::MatrixXd& stage,
                   const Eigen::VectorXd& v_next, Eigen::MatrixXd& q) {
    e == Exec::kSerial ? serial::backup(transitions, stage, v_next, q)
                       : parallel::backup(transitions, stage, v_next, q);
}

inline void policy_average(Exec e, const Eigen::MatrixXd& q, const Eigen::MatrixXd& pi,
                           Eigen::VectorXd& v) {
    e == Exec::kSerial ? serial::policy_average(q, pi, v) : parallel::policy_average(q, pi, v);
}

inline void mirror_step(Exec e, const Eigen::MatrixXd& base, const Eigen::MatrixXd& q_r,
                        const Eigen::MatrixXd& q_g, double dual, double alpha,
                        Eigen::MatrixXd& out) {
    e == Exec::kSerial ? serial::mirror_step(base, q_r, q_g, dual, alpha, out)
                       : parallel::mirror_step(base, q_r, q_g, dual, alpha, out);
}

inline void quadratic_forms(Exec e, const Eigen::MatrixXd& lower, const Eigen::MatrixXd& rows,
                            Eigen::VectorXd& out) {
    e == Exec::kSerial ? serial::quadratic_forms(lower, rows, out)
                       : parallel::quadratic_forms(lower, rows, out);
}

} // namespace cmdp::kernels
