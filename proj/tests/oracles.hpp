#pragma once

// Reference computations that share no code path with the library routines
// they check.

#include "cmdp/model.hpp"

#include <utility>

namespace oracle {

using cmdp::Matrix;
using cmdp::Vector;

/// (V_r, V_g) at the initial state by forward propagation of the state distribution.
inline std::pair<double, double> forward_values(const cmdp::CmdpModel& m, const cmdp::Policy& pi) {
    const int S = m.num_states(), A = m.num_actions();
    std::vector<double> dist(S, 0.0), next(S);
    dist[m.initial_state()] = 1.0;
    double vr = 0.0, vg = 0.0;
    for (int h = 0; h < m.horizon(); ++h) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int x = 0; x < S; ++x) {
            for (int a = 0; a < A; ++a) {
                const double w = dist[x] * pi.prob(h, x, a);
                vr += w * m.reward(h)(x, a);
                vg += w * m.utility(h)(x, a);
                for (int y = 0; y < S; ++y) next[y] += w * m.transition(h, x, a, y);
            }
        }
        dist.swap(next);
    }
    return {vr, vg};
}

/// Rows drawn from a flat Dirichlet with a few exact zeros mixed in.
inline cmdp::Policy random_policy(cmdp::Rng& rng, int S, int A, int H) {
    cmdp::Policy pi(S, A, H);
    for (int h = 0; h < H; ++h)
        for (int x = 0; x < S; ++x) {
            Vector row = rng.dirichlet(A);
            if (A > 1 && rng.uniform() < 0.2) {
                row(static_cast<int>(rng.uniform() * A)) = 0.0;
                if (row.sum() <= 0.0) row(0) = 1.0;
                row /= row.sum();
            }
            pi.step(h).row(x) = row.transpose();
        }
    return pi;
}

/// Small hand-sized CMDP with arbitrary tables (no Slater requirement).
inline cmdp::CmdpModel random_model(cmdp::Rng& rng, int S, int A, int H, double b) {
    std::vector<Matrix> P, r, g;
    for (int h = 0; h < H; ++h) {
        Matrix p(S * A, S);
        for (int i = 0; i < S * A; ++i) p.row(i) = rng.dirichlet(S).transpose();
        Matrix rr(S, A), gg(S, A);
        for (int x = 0; x < S; ++x)
            for (int a = 0; a < A; ++a) {
                rr(x, a) = rng.uniform();
                gg(x, a) = rng.uniform();
            }
        P.push_back(p);
        r.push_back(rr);
        g.push_back(gg);
    }
    return cmdp::CmdpModel(S, A, H, b, 0, P, r, g);
}

/// Ridge estimate by forming and solving the dense normal equations directly.
inline Vector normal_equations(const std::vector<Vector>& f, const std::vector<double>& y, double ridge) {
    const int d = static_cast<int>(f.front().size());
    Matrix G = ridge * Matrix::Identity(d, d);
    Vector rhs = Vector::Zero(d);
    for (std::size_t i = 0; i < f.size(); ++i) {
        G += f[i] * f[i].transpose();
        rhs += f[i] * y[i];
    }
    return G.fullPivLu().solve(rhs);
}

} // namespace oracle
