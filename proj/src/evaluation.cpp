#include "cmdp/evaluation.hpp"

#include "cmdp/errors.hpp"

namespace cmdp {

Backend backend_from_string(const std::string& name) {
    if (name == "lstd") return Backend::kLstd;
    if (name == "tabular") return Backend::kTabular;
    throw ConfigError("unknown backend '" + name + "' (expected lstd or tabular)");
}

EvalEstimates EvalEstimates::zeros(int S, int A, int H, Backend backend) {
    EvalEstimates e;
    e.backend = backend;
    e.q_reward.assign(H, Matrix::Zero(S, A));
    e.q_utility.assign(H, Matrix::Zero(S, A));
    e.bonus_reward.assign(H, Matrix::Zero(S, A));
    e.bonus_utility.assign(H, Matrix::Zero(S, A));
    e.v_reward.assign(H + 1, Vector::Zero(S));
    e.v_utility.assign(H + 1, Vector::Zero(S));
    return e;
}

int count_range_violations(const EvalEstimates& est, double tol) {
    const int H = est.horizon();
    int bad = 0;
    for (int h = 0; h < H; ++h) {
        const double cap = H - h + tol;
        for (Signal s : {Signal::kReward, Signal::kUtility}) {
            const Matrix& q = est.q(s, h);
            const Vector& v = est.v(s, h);
            bad += static_cast<int>((q.array() < -tol).count() + (q.array() > cap).count());
            bad += static_cast<int>((v.array() < -tol).count() + (v.array() > cap).count());
        }
    }
    return bad;
}

} // namespace cmdp
