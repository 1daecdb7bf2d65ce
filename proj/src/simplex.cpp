#include "cmdp/simplex.hpp"

#include "cmdp/errors.hpp"

#include <limits>
#include <vector>

namespace cmdp::lp {

namespace {

class Tableau {
  public:
    Tableau(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Options& opt)
        : opt_(opt), m_(A.rows()), n_(A.cols()), A_(m_, n_ + m_), b_(b) {
        // flip rows so b >= 0, then append one artificial per row
        row_sign_ = Eigen::VectorXd::Ones(m_);
        A_.leftCols(n_) = A;
        A_.rightCols(m_).setIdentity();
        for (Eigen::Index i = 0; i < m_; ++i) {
            if (b_(i) < 0.0) {
                row_sign_(i) = -1.0;
                A_.row(i).head(n_) *= -1.0;
                b_(i) = -b_(i);
            }
        }
        basis_.resize(m_);
        is_basic_.assign(n_ + m_, false);
        for (Eigen::Index i = 0; i < m_; ++i) {
            basis_[i] = n_ + i;
            is_basic_[n_ + i] = true;
        }
        binv_.setIdentity(m_, m_);
        xb_ = b_;
    }

    /// Runs simplex iterations for cost vector `cost` (length n + m). Returns
    /// false if unbounded.
    bool optimize(const Eigen::VectorXd& cost, bool allow_artificial_entry, int& iterations) {
        while (true) {
            if (++iterations > opt_.max_iterations)
                throw NumericError("simplex: iteration limit reached");
            const Eigen::VectorXd y = duals(cost);
            // Bland: lowest-index improving column
            Eigen::Index entering = -1;
            const Eigen::Index limit = allow_artificial_entry ? n_ + m_ : n_;
            for (Eigen::Index j = 0; j < limit; ++j) {
                if (is_basic_[j]) continue;
                if (cost(j) - A_.col(j).dot(y) > opt_.cost_tol) {
                    entering = j;
                    break;
                }
            }
            if (entering < 0) return true;

            const Eigen::VectorXd u = binv_ * A_.col(entering);
            Eigen::Index leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < m_; ++i) {
                if (u(i) <= opt_.pivot_tol) continue;
                const double ratio = std::max(0.0, xb_(i)) / u(i);
                // ties go to the smallest basic variable index (Bland)
                if (ratio < best - 1e-14 ||
                    (ratio <= best + 1e-14 && leave >= 0 && basis_[i] < basis_[leave])) {
                    best = ratio;
                    leave = i;
                }
            }
            if (leave < 0) return false;
            pivot(leave, entering, u);
        }
    }

    /// After phase one: swap zero-level artificials out of the basis where a
    /// structural column can replace them.
    void expel_artificials() {
        for (Eigen::Index i = 0; i < m_; ++i) {
            if (basis_[i] < n_) continue;
            const Eigen::RowVectorXd row = binv_.row(i) * A_.leftCols(n_);
            for (Eigen::Index j = 0; j < n_; ++j) {
                if (is_basic_[j] || std::abs(row(j)) <= 1e-9) continue;
                pivot(i, j, binv_ * A_.col(j));
                break;
            }
        }
    }

    Eigen::VectorXd duals(const Eigen::VectorXd& cost) const {
        Eigen::VectorXd cb(m_);
        for (Eigen::Index i = 0; i < m_; ++i) cb(i) = cost(basis_[i]);
        return binv_.transpose() * cb;
    }

    Eigen::VectorXd solution() const {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n_ + m_);
        for (Eigen::Index i = 0; i < m_; ++i) x(basis_[i]) = std::max(0.0, xb_(i));
        return x;
    }

    const Eigen::VectorXd& row_sign() const { return row_sign_; }
    Eigen::Index structural() const { return n_; }

  private:
    void pivot(Eigen::Index leave, Eigen::Index entering, const Eigen::VectorXd& u) {
        const double piv = u(leave);
        const double step = xb_(leave) / piv;
        xb_ -= step * u;
        xb_(leave) = step;
        // eta update of the explicit inverse
        const Eigen::RowVectorXd prow = binv_.row(leave) / piv;
        for (Eigen::Index i = 0; i < m_; ++i) {
            if (i == leave) continue;
            if (u(i) != 0.0) binv_.row(i) -= u(i) * prow;
        }
        binv_.row(leave) = prow;
        is_basic_[basis_[leave]] = false;
        is_basic_[entering] = true;
        basis_[leave] = entering;
        if (++since_refactor_ >= opt_.refactor_every) refactor();
    }

    void refactor() {
        since_refactor_ = 0;
        Eigen::MatrixXd B(m_, m_);
        for (Eigen::Index i = 0; i < m_; ++i) B.col(i) = A_.col(basis_[i]);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
        binv_ = lu.inverse();
        xb_ = binv_ * b_;
    }

    Options opt_;
    Eigen::Index m_, n_;
    Eigen::MatrixXd A_;
    Eigen::VectorXd b_;
    Eigen::VectorXd row_sign_;
    std::vector<Eigen::Index> basis_;
    std::vector<bool> is_basic_;
    Eigen::MatrixXd binv_;
    Eigen::VectorXd xb_;
    int since_refactor_ = 0;
};

} // namespace

Result solve(const StandardForm& p, const Options& options) {
    const Eigen::Index m = p.A.rows(), n = p.A.cols();
    if (p.b.size() != m || p.c.size() != n)
        throw StructuralError("simplex: inconsistent problem dimensions");

    Result res;
    Tableau tab(p.A, p.b, options);

    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + m);
    phase1.tail(m).setConstant(-1.0);
    tab.optimize(phase1, true, res.iterations);
    const double infeasibility = tab.solution().tail(m).sum();
    if (infeasibility > options.feasibility_tol) {
        res.status = Status::kInfeasible;
        return res;
    }
    tab.expel_artificials();

    Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n + m);
    phase2.head(n) = p.c;
    if (!tab.optimize(phase2, false, res.iterations)) {
        res.status = Status::kUnbounded;
        return res;
    }

    res.status = Status::kOptimal;
    res.x = tab.solution().head(n);
    res.duals = tab.duals(phase2).cwiseProduct(tab.row_sign());
    res.objective = p.c.dot(res.x);
    res.dual_objective = p.b.dot(res.duals);
    const Eigen::VectorXd reduced = p.c - p.A.transpose() * res.duals;
    res.dual_infeasibility = std::max(0.0, reduced.maxCoeff());
    res.primal_residual = (p.A * res.x - p.b).cwiseAbs().maxCoeff();
    return res;
}

} // namespace cmdp::lp
