#include "cmdp/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace cmdp::kernels::serial {

void backup(const Eigen::MatrixXd& transitions, const Eigen::MatrixXd& stage,
            const Eigen::VectorXd& v_next, Eigen::MatrixXd& q) {
    const Eigen::Index S = stage.rows(), A = stage.cols(), N = transitions.cols();
    q.resize(S, A);
    for (Eigen::Index x = 0; x < S; ++x) {
        for (Eigen::Index a = 0; a < A; ++a) {
            const Eigen::Index row = x * A + a;
            double acc = 0.0;
            for (Eigen::Index y = 0; y < N; ++y) acc += transitions(row, y) * v_next(y);
            q(x, a) = stage(x, a) + acc;
        }
    }
}

void policy_average(const Eigen::MatrixXd& q, const Eigen::MatrixXd& pi, Eigen::VectorXd& v) {
    const Eigen::Index S = q.rows(), A = q.cols();
    v.resize(S);
    for (Eigen::Index x = 0; x < S; ++x) {
        double acc = 0.0;
        for (Eigen::Index a = 0; a < A; ++a) acc += q(x, a) * pi(x, a);
        v(x) = acc;
    }
}

void mirror_step(const Eigen::MatrixXd& base, const Eigen::MatrixXd& q_r,
                 const Eigen::MatrixXd& q_g, double dual, double alpha, Eigen::MatrixXd& out) {
    const Eigen::Index S = base.rows(), A = base.cols();
    out.resize(S, A);
    for (Eigen::Index x = 0; x < S; ++x) {
        double top = -INFINITY;
        for (Eigen::Index a = 0; a < A; ++a) {
            const double logit = std::log(base(x, a)) + alpha * (q_r(x, a) + dual * q_g(x, a));
            out(x, a) = logit;
            top = std::max(top, logit);
        }
        double norm = 0.0;
        for (Eigen::Index a = 0; a < A; ++a) {
            out(x, a) = std::exp(out(x, a) - top);
            norm += out(x, a);
        }
        for (Eigen::Index a = 0; a < A; ++a) out(x, a) /= norm;
    }
}

void quadratic_forms(const Eigen::MatrixXd& lower, const Eigen::MatrixXd& rows,
                     Eigen::VectorXd& out) {
    const Eigen::Index n = rows.rows(), d = rows.cols();
    out.resize(n);
    Eigen::VectorXd z(d);
    for (Eigen::Index i = 0; i < n; ++i) {
        // forward substitution L z = row
        double acc = 0.0;
        for (Eigen::Index r = 0; r < d; ++r) {
            double s = rows(i, r);
            for (Eigen::Index c = 0; c < r; ++c) s -= lower(r, c) * z(c);
            z(r) = s / lower(r, r);
            acc += z(r) * z(r);
        }
        out(i) = acc;
    }
}

} // namespace cmdp::kernels::serial
