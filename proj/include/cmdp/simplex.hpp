#pragma once

#include <Eigen/Dense>

namespace cmdp::lp {

/// maximize c^T x  subject to  A x = b, x >= 0.
struct StandardForm {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::VectorXd c;
};

enum class Status { kOptimal, kInfeasible, kUnbounded };

struct Result {
    Status status = Status::kInfeasible;
    Eigen::VectorXd x;     ///< primal solution
    Eigen::VectorXd duals; ///< one multiplier per equality row, A^T y >= c at optimality
    double objective = 0.0;
    double dual_objective = 0.0;
    /// Largest positive reduced cost c_j - A_j^T y; <= 0 up to rounding at optimality.
    double dual_infeasibility = 0.0;
    /// Largest |A x - b| entry.
    double primal_residual = 0.0;
    int iterations = 0;

    double duality_gap() const { return std::abs(objective - dual_objective); }
};

struct Options {
    double pivot_tol = 1e-10;
    double cost_tol = 1e-10;
    double feasibility_tol = 1e-9;
    int refactor_every = 50;
    int max_iterations = 200000;
};

/**
 * Dense two-phase revised simplex with Bland's anti-cycling rule.
 *
 * The basis inverse is kept explicitly and updated by a rank-one pivot per
 * iteration; it is rebuilt from an LU factorization every
 * Options::refactor_every pivots. Redundant equality rows are tolerated: their
 * artificial stays basic at level zero.
 */
Result solve(const StandardForm& problem, const Options& options = {});

} // namespace cmdp::lp
