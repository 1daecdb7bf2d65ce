#include "cmdp/hindsight.hpp"

#include "cmdp/errors.hpp"
#include "cmdp/simplex.hpp"

#include <cmath>

namespace cmdp {

namespace {

struct OccupancyLp {
    lp::StandardForm form;
    int utility_row = -1;
};

Eigen::Index var_index(const CmdpModel& m, int h, int x, int a) {
    return (static_cast<Eigen::Index>(h) * m.num_states() + x) * m.num_actions() + a;
}

// Flow-conservation rows h*S + x; an optional utility row with slack appended last.
OccupancyLp build_lp(const CmdpModel& m, const std::vector<Matrix>& objective,
                     std::optional<double> utility_floor) {
    const int S = m.num_states(), A = m.num_actions(), H = m.horizon();
    const Eigen::Index flow_vars = static_cast<Eigen::Index>(H) * S * A;
    const Eigen::Index n = flow_vars + (utility_floor ? 1 : 0);
    const Eigen::Index rows = static_cast<Eigen::Index>(H) * S + (utility_floor ? 1 : 0);

    OccupancyLp out;
    auto& f = out.form;
    f.A = Matrix::Zero(rows, n);
    f.b = Vector::Zero(rows);
    f.c = Vector::Zero(n);
    for (int h = 0; h < H; ++h) {
        for (int x = 0; x < S; ++x) {
            const Eigen::Index row = static_cast<Eigen::Index>(h) * S + x;
            for (int a = 0; a < A; ++a) f.A(row, var_index(m, h, x, a)) = 1.0;
            if (h == 0) {
                f.b(row) = (x == m.initial_state()) ? 1.0 : 0.0;
            } else {
                for (int px = 0; px < S; ++px)
                    for (int pa = 0; pa < A; ++pa)
                        f.A(row, var_index(m, h - 1, px, pa)) -= m.transition(h - 1, px, pa, x);
            }
        }
        for (int x = 0; x < S; ++x)
            for (int a = 0; a < A; ++a) f.c(var_index(m, h, x, a)) = objective[h](x, a);
    }
    if (utility_floor) {
        out.utility_row = static_cast<int>(rows - 1);
        for (int h = 0; h < H; ++h)
            for (int x = 0; x < S; ++x)
                for (int a = 0; a < A; ++a)
                    f.A(rows - 1, var_index(m, h, x, a)) = m.utility(h)(x, a);
        f.A(rows - 1, n - 1) = -1.0; // surplus
        f.b(rows - 1) = *utility_floor;
    }
    return out;
}

OccupancyMeasure extract_occupancy(const CmdpModel& m, const Vector& x) {
    const int S = m.num_states(), A = m.num_actions(), H = m.horizon();
    OccupancyMeasure occ;
    occ.mass.assign(H, Matrix::Zero(S, A));
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) occ.mass[h](s, a) = std::max(0.0, x(var_index(m, h, s, a)));
    return occ;
}

std::vector<Matrix> signal_tables(const CmdpModel& m, Signal which) {
    std::vector<Matrix> t;
    for (int h = 0; h < m.horizon(); ++h) t.push_back(m.signal(which, h));
    return t;
}

void certify(const lp::Result& res, const char* what) {
    if (res.duality_gap() > kDualityGapTol || res.dual_infeasibility > 1e-9)
        throw NumericError(std::string(what) + ": LP optimum not certified (duality gap " +
                           std::to_string(res.duality_gap()) + ", dual infeasibility " +
                           std::to_string(res.dual_infeasibility) + ")");
}

} // namespace

double OccupancyMeasure::flow_residual(const CmdpModel& m) const {
    const int S = m.num_states(), H = m.horizon();
    double worst = 0.0;
    for (int h = 0; h < H; ++h) {
        Vector inflow = Vector::Zero(S);
        if (h == 0) {
            inflow(m.initial_state()) = 1.0;
        } else {
            for (int x = 0; x < S; ++x)
                for (int a = 0; a < m.num_actions(); ++a)
                    inflow += mass[h - 1](x, a) * m.transition_row(h - 1, x, a).transpose();
        }
        worst = std::max(worst, (mass[h].rowwise().sum() - inflow).cwiseAbs().maxCoeff());
        worst = std::max(worst, std::abs(mass[h].sum() - 1.0));
    }
    return worst;
}

Policy OccupancyMeasure::to_policy(double zero_mass_tol) const {
    const int H = static_cast<int>(mass.size());
    const int S = static_cast<int>(mass.front().rows()), A = static_cast<int>(mass.front().cols());
    Policy pi(S, A, H);
    for (int h = 0; h < H; ++h) {
        for (int x = 0; x < S; ++x) {
            const double total = mass[h].row(x).sum();
            if (total <= zero_mass_tol)
                pi.step(h).row(x).setConstant(1.0 / A);
            else
                pi.step(h).row(x) = mass[h].row(x) / total;
        }
    }
    return pi;
}

double OccupancyMeasure::value(const CmdpModel& m, Signal which) const {
    double v = 0.0;
    for (int h = 0; h < m.horizon(); ++h) v += mass[h].cwiseProduct(m.signal(which, h)).sum();
    return v;
}

SlaterGap estimate_slater_gap(const CmdpModel& model) {
    return estimate_slater_gap(model, model.offset());
}

SlaterGap estimate_slater_gap(const CmdpModel& model, double offset) {
    const auto problem = build_lp(model, signal_tables(model, Signal::kUtility), std::nullopt);
    const auto res = lp::solve(problem.form);
    if (res.status != lp::Status::kOptimal)
        throw NumericError("slater LP: flow polytope reported empty or unbounded");
    certify(res, "slater LP");
    SlaterGap out;
    out.max_utility = res.objective;
    out.gap = std::max(0.0, res.objective - offset);
    out.policy = extract_occupancy(model, res.x).to_policy();
    return out;
}

HindsightSolution solve_hindsight(const CmdpModel& model) {
    return solve_hindsight(model, model.offset());
}

HindsightSolution solve_hindsight(const CmdpModel& model, double offset) {
    const SlaterGap slater = estimate_slater_gap(model, offset);
    if (slater.max_utility < offset - 1e-9) throw InfeasibleConstraint(slater.max_utility, offset);

    const auto problem = build_lp(model, signal_tables(model, Signal::kReward), offset);
    const auto res = lp::solve(problem.form);
    if (res.status == lp::Status::kInfeasible) throw InfeasibleConstraint(slater.max_utility, offset);
    if (res.status == lp::Status::kUnbounded)
        throw NumericError("hindsight LP reported unbounded on a compact polytope");
    certify(res, "hindsight LP");

    HindsightSolution sol;
    sol.occupancy = extract_occupancy(model, res.x);
    sol.optimal_policy = sol.occupancy.to_policy();
    sol.optimal_value = res.objective;
    sol.optimal_utility = sol.occupancy.value(model, Signal::kUtility);
    sol.optimal_dual = std::max(0.0, -res.duals(problem.utility_row));
    sol.slater_gap = slater.gap;
    sol.slater_policy = slater.policy;
    sol.duality_gap = res.duality_gap();
    if (slater.gap > 0.0) sol.dual_cap = 2.0 * model.horizon() / slater.gap;
    return sol;
}

DpSolution value_iteration(const CmdpModel& model, const std::vector<Matrix>& stage) {
    const int S = model.num_states(), A = model.num_actions(), H = model.horizon();
    if (static_cast<int>(stage.size()) != H) throw StructuralError("value_iteration: stage count");
    DpSolution out;
    out.v.assign(H + 1, Vector::Zero(S));
    out.greedy = Policy(S, A, H);
    for (int h = H - 1; h >= 0; --h) {
        Matrix q;
        kernels::backup(kernels::Exec::kSerial, model.transitions(h), stage[h], out.v[h + 1], q);
        for (int x = 0; x < S; ++x) {
            Eigen::Index best;
            out.v[h](x) = q.row(x).maxCoeff(&best);
            out.greedy.step(h)(x, best) = 1.0;
        }
    }
    out.value = out.v[0](model.initial_state());
    return out;
}

double dual_function(const CmdpModel& model, double dual) {
    std::vector<Matrix> stage;
    for (int h = 0; h < model.horizon(); ++h)
        stage.push_back(model.reward(h) + dual * model.utility(h));
    return value_iteration(model, stage).value - dual * model.offset();
}


nlohmann::json hindsight_to_json(const HindsightSolution& sol) {
    nlohmann::json policy = nlohmann::json::array();
    for (int h = 0; h < sol.optimal_policy.horizon(); ++h) {
        nlohmann::json step = nlohmann::json::array();
        const Matrix& t = sol.optimal_policy.step(h);
        for (int x = 0; x < t.rows(); ++x) {
            std::vector<double> row(t.cols());
            for (int a = 0; a < t.cols(); ++a) row[a] = t(x, a);
            step.push_back(row);
        }
        policy.push_back(step);
    }
    nlohmann::json j = {{"optimal_value", sol.optimal_value}, {"optimal_utility", sol.optimal_utility},
                        {"optimal_dual", sol.optimal_dual},   {"slater_gap", sol.slater_gap},
                        {"duality_gap", sol.duality_gap},     {"policy", policy}};
    j["dual_cap"] = sol.dual_cap ? nlohmann::json(*sol.dual_cap) : nlohmann::json(nullptr);
    return j;
}

} // namespace cmdp
