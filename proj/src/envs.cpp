#include "cmdp/envs.hpp"

#include "cmdp/errors.hpp"
#include "cmdp/hindsight.hpp"
#include "cmdp/rng.hpp"

#include <algorithm>
#include <array>
#include <fstream>

namespace cmdp {

namespace {

bool slater_ok(const CmdpModel& model) { return estimate_slater_gap(model).gap >= kMinSlaterGap; }

[[noreturn]] void give_up(double offset) {
    throw GenerationError("no instance with Slater gap >= 0.05 after " + std::to_string(kMaxRejections) +
                          " draws at b = " + std::to_string(offset) + "; try a smaller b");
}

Matrix uniform_table(Rng& rng, int S, int A) {
    Matrix m(S, A);
    for (int x = 0; x < S; ++x)
        for (int a = 0; a < A; ++a) m(x, a) = rng.uniform();
    return m;
}

Matrix dirichlet_rows(Rng& rng, int rows, int cols) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) m.row(i) = rng.dirichlet(cols).transpose();
    return m;
}

SparseRows to_sparse(const Matrix& dense) { return dense.sparseView(0.0, 0.0).eval(); }

} // namespace

CmdpModel make_tabular_random(int S, int A, int H, double offset, std::uint64_t seed) {
    if (S <= 0 || A <= 0 || H <= 0) throw ConfigError("dimensions must be positive");
    if (!(offset > 0.0 && offset <= H)) throw ConfigError("offset b must lie in (0, H]");
    Rng rng(seed);
    for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
        std::vector<Matrix> P, r, g;
        for (int h = 0; h < H; ++h) {
            P.push_back(dirichlet_rows(rng, S * A, S));
            r.push_back(uniform_table(rng, S, A));
            g.push_back(uniform_table(rng, S, A));
        }
        CmdpModel model(S, A, H, offset, 0, std::move(P), std::move(r), std::move(g));
        if (slater_ok(model)) return model;
    }
    give_up(offset);
}

CmdpModel make_hazard_gridworld(const GridSpec& spec) {
    const int W = spec.width, Ht = spec.height, H = spec.horizon;
    if (W <= 0 || Ht <= 0 || H <= 0) throw ConfigError("grid dimensions and horizon must be positive");
    if (!(spec.slip >= 0.0 && spec.slip <= 1.0)) throw ConfigError("slip must lie in [0, 1]");
    if (!(spec.offset > 0.0 && spec.offset <= H)) throw ConfigError("offset b must lie in (0, H]");
    const int S = W * Ht;
    auto inside = [&](Cell c) { return c.col >= 0 && c.col < W && c.row >= 0 && c.row < Ht; };
    auto index = [&](Cell c) { return c.row * W + c.col; };

    std::vector<char> wall(S, 0), hazard(S, 0);
    for (Cell c : spec.walls) {
        if (!inside(c)) throw ConfigError("wall outside the grid");
        wall[index(c)] = 1;
    }
    if (!inside(spec.start) || !inside(spec.goal)) throw ConfigError("start or goal outside the grid");
    if (wall[index(spec.start)] || wall[index(spec.goal)]) throw ConfigError("start or goal is a wall");
    for (Cell c : spec.hazards) {
        if (!inside(c)) throw ConfigError("hazard outside the grid");
        if (c == spec.goal) throw ConfigError("hazard on the goal cell");
        if (wall[index(c)]) throw ConfigError("hazard on a wall");
        hazard[index(c)] = 1;
    }
    if (spec.random_hazards > 0) {
        std::vector<int> free;
        for (int s = 0; s < S; ++s)
            if (!wall[s] && !hazard[s] && s != index(spec.goal) && s != index(spec.start)) free.push_back(s);
        if (spec.random_hazards > static_cast<int>(free.size()))
            throw ConfigError("not enough free cells for the requested random hazards");
        Rng rng(spec.seed);
        for (int i = 0; i < spec.random_hazards; ++i) {
            const int j = i + static_cast<int>(rng.uniform() * (free.size() - i));
            std::swap(free[i], free[j]);
            hazard[free[i]] = 1;
        }
    }

    constexpr int A = 4;
    constexpr std::array<int, A> dcol{0, 1, 0, -1};
    constexpr std::array<int, A> drow{-1, 0, 1, 0};
    const int goal = index(spec.goal);
    auto move = [&](int s, int dir) {
        const Cell next{s % W + dcol[dir], s / W + drow[dir]};
        return inside(next) && !wall[index(next)] ? index(next) : s;
    };

    Matrix P = Matrix::Zero(S * A, S);
    Matrix r = Matrix::Zero(S, A), g = Matrix::Zero(S, A);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            const int row = s * A + a;
            if (s == goal) {
                P(row, s) = 1.0;
            } else {
                P(row, move(s, a)) += 1.0 - spec.slip;
                for (int dir = 0; dir < A; ++dir) P(row, move(s, dir)) += spec.slip / A;
            }
            r(s, a) = s == goal ? 1.0 : 0.0;
            g(s, a) = hazard[s] ? 0.0 : 1.0;
        }
    }
    CmdpModel model(S, A, H, spec.offset, index(spec.start), std::vector<Matrix>(H, P),
                    std::vector<Matrix>(H, r), std::vector<Matrix>(H, g));
    const SlaterGap sg = estimate_slater_gap(model);
    if (sg.max_utility < spec.offset - 1e-12) throw InfeasibleConstraint(sg.max_utility, spec.offset);
    return model;
}

LinearInstance make_linear_mixture(int d1, int d2, int S, int A, int H, int m, double offset,
                                   std::uint64_t seed) {
    if (d1 <= 0 || d2 <= 0 || S <= 0 || A <= 0 || H <= 0 || m <= 0)
        throw ConfigError("dimensions must be positive");
    if (d1 != m) throw ConfigError("the mixture layout needs d1 == number of base models");
    if (!(offset > 0.0 && offset <= H)) throw ConfigError("offset b must lie in (0, H]");
    Rng rng(seed);
    for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
        FeatureMaps maps;
        maps.num_states = S;
        maps.num_actions = A;
        Matrix psi(S * A * S, d1);
        for (int i = 0; i < m; ++i) {
            const Matrix base = dirichlet_rows(rng, S * A, S);
            for (int row = 0; row < S * A; ++row)
                for (int y = 0; y < S; ++y) psi(row * S + y, i) = base(row, y);
        }
        const Matrix phi = dirichlet_rows(rng, S * A, d2);
        std::vector<Matrix> P, r, g;
        for (int h = 0; h < H; ++h) {
            maps.theta_kernel.push_back(rng.dirichlet(m));
            Vector tr(d2), tg(d2);
            for (int j = 0; j < d2; ++j) tr(j) = rng.uniform();
            for (int j = 0; j < d2; ++j) tg(j) = rng.uniform();
            maps.theta_reward.push_back(tr);
            maps.theta_utility.push_back(tg);

            const Vector flat = psi * maps.theta_kernel[h];
            P.push_back(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                flat.data(), S * A, S));
            const Vector rv = phi * tr, gv = phi * tg;
            r.push_back(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                rv.data(), S, A));
            g.push_back(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                gv.data(), S, A));
            // convex combinations can round a hair outside [0, 1]
            r.back() = r.back().cwiseMax(0.0).cwiseMin(1.0);
            g.back() = g.back().cwiseMax(0.0).cwiseMin(1.0);
        }
        maps.kernel = to_sparse(psi);
        maps.value = to_sparse(phi);
        CmdpModel model(S, A, H, offset, 0, std::move(P), std::move(r), std::move(g));
        if (slater_ok(model)) return {std::move(model), std::move(maps)};
    }
    give_up(offset);
}

FeatureMaps canonical_features(const CmdpModel& model) {
    const int S = model.num_states(), A = model.num_actions(), H = model.horizon();
    const int d1 = S * A * S, d2 = S * A;
    FeatureMaps maps;
    maps.num_states = S;
    maps.num_actions = A;
    maps.kernel.resize(d1, d1);
    maps.kernel.setIdentity();
    maps.value.resize(d2, d2);
    maps.value.setIdentity();
    for (int h = 0; h < H; ++h) {
        Vector tk(d1), tr(d2), tg(d2);
        for (int x = 0; x < S; ++x) {
            for (int a = 0; a < A; ++a) {
                for (int y = 0; y < S; ++y) tk(maps.kernel_row(x, a, y)) = model.transition(h, x, a, y);
                tr(x * A + a) = model.reward(h)(x, a);
                tg(x * A + a) = model.utility(h)(x, a);
            }
        }
        maps.theta_kernel.push_back(std::move(tk));
        maps.theta_reward.push_back(std::move(tr));
        maps.theta_utility.push_back(std::move(tg));
    }
    return maps;
}

namespace {

nlohmann::json sparse_to_json(const SparseRows& m) {
    nlohmann::json entries = nlohmann::json::array();
    for (int i = 0; i < m.outerSize(); ++i)
        for (SparseRows::InnerIterator it(m, i); it; ++it) entries.push_back({it.row(), it.col(), it.value()});
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"entries", entries}};
}

SparseRows sparse_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
    std::vector<Eigen::Triplet<double>> trips;
    for (const auto& e : j.at("entries")) {
        const auto r = e.at(0).get<Eigen::Index>(), c = e.at(1).get<Eigen::Index>();
        if (r < 0 || r >= rows || c < 0 || c >= cols) throw StructuralError("feature entry out of range");
        trips.emplace_back(r, c, e.at(2).get<double>());
    }
    SparseRows m(rows, cols);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

nlohmann::json vectors_to_json(const std::vector<Vector>& vs) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& v : vs) out.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    return out;
}

std::vector<Vector> vectors_from_json(const nlohmann::json& j) {
    std::vector<Vector> out;
    for (const auto& item : j) {
        const auto v = item.get<std::vector<double>>();
        out.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    return out;
}

} // namespace

nlohmann::json features_to_json(const FeatureMaps& maps) {
    return {{"num_states", maps.num_states},
            {"num_actions", maps.num_actions},
            {"kernel", sparse_to_json(maps.kernel)},
            {"value", sparse_to_json(maps.value)},
            {"theta_kernel", vectors_to_json(maps.theta_kernel)},
            {"theta_reward", vectors_to_json(maps.theta_reward)},
            {"theta_utility", vectors_to_json(maps.theta_utility)}};
}

FeatureMaps features_from_json(const nlohmann::json& j) {
    try {
        FeatureMaps maps;
        maps.num_states = j.at("num_states").get<int>();
        maps.num_actions = j.at("num_actions").get<int>();
        maps.kernel = sparse_from_json(j.at("kernel"));
        maps.value = sparse_from_json(j.at("value"));
        maps.theta_kernel = vectors_from_json(j.at("theta_kernel"));
        maps.theta_reward = vectors_from_json(j.at("theta_reward"));
        maps.theta_utility = vectors_from_json(j.at("theta_utility"));
        const Eigen::Index S = maps.num_states, A = maps.num_actions;
        if (S <= 0 || A <= 0 || maps.kernel.rows() != S * A * S || maps.value.rows() != S * A)
            throw StructuralError("feature map shapes do not match the declared dimensions");
        return maps;
    } catch (const nlohmann::json::exception& e) {
        throw StructuralError(std::string("malformed feature file: ") + e.what());
    }
}

FeatureMaps load_features(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot read feature file " + path.string());
    try {
        return features_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw StructuralError(std::string("malformed feature file: ") + e.what());
    }
}

void save_features(const FeatureMaps& maps, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw StructuralError("cannot write feature file " + path.string());
    out << features_to_json(maps).dump() << '\n';
}

} // namespace cmdp
