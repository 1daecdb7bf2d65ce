#include "cmdp/model.hpp"

#include "cmdp/errors.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace cmdp {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw StructuralError(what);
}

void check_signal_table(const std::vector<Matrix>& tables, int S, int A, int H, const char* name) {
    require(static_cast<int>(tables.size()) == H, std::string(name) + ": expected one table per step");
    for (int h = 0; h < H; ++h) {
        require(tables[h].rows() == S && tables[h].cols() == A,
                std::string(name) + ": table at step " + std::to_string(h) + " has wrong shape");
        if (!tables[h].allFinite() || tables[h].minCoeff() < 0.0 || tables[h].maxCoeff() > 1.0)
            throw ContractError(std::string(name) + " entries must lie in [0, 1]");
    }
}

} // namespace

CmdpModel::CmdpModel(int num_states, int num_actions, int horizon, double offset,
                     int initial_state, std::vector<Matrix> transitions,
                     std::vector<Matrix> reward, std::vector<Matrix> utility)
    : num_states_(num_states), num_actions_(num_actions), horizon_(horizon), offset_(offset),
      initial_state_(initial_state), transitions_(std::move(transitions)),
      reward_(std::move(reward)), utility_(std::move(utility)) {
    if (num_states <= 0 || num_actions <= 0 || horizon <= 0)
        throw ConfigError("num_states, num_actions and horizon must be positive");
    if (!(offset > 0.0 && offset <= horizon))
        throw ConfigError("constraint offset b must lie in (0, H], got " + std::to_string(offset));
    if (initial_state < 0 || initial_state >= num_states)
        throw StructuralError("initial_state out of range");

    const int S = num_states, A = num_actions, H = horizon;
    require(static_cast<int>(transitions_.size()) == H, "transitions: expected one kernel per step");
    for (int h = 0; h < H; ++h) {
        Matrix& P = transitions_[h];
        require(P.rows() == S * A && P.cols() == S, "transitions: kernel has wrong shape");
        for (int row = 0; row < S * A; ++row) {
            if (!P.row(row).allFinite() || P.row(row).minCoeff() < 0.0)
                throw ContractError("transition probabilities must be finite and nonnegative");
            const double sum = P.row(row).sum();
            const double err = std::abs(sum - 1.0);
            if (err <= kSimplexTol) continue;
            if (err > kRenormalizeTol)
                throw ContractError("transition row (h=" + std::to_string(h) + ", x=" +
                                    std::to_string(row / A) + ", a=" + std::to_string(row % A) +
                                    ") sums to " + std::to_string(sum));
            P.row(row) /= sum;
        }
    }
    check_signal_table(reward_, S, A, H, "reward");
    check_signal_table(utility_, S, A, H, "utility");
}

CmdpModel CmdpModel::with_offset(double offset) const {
    return CmdpModel(num_states_, num_actions_, horizon_, offset, initial_state_, transitions_,
                     reward_, utility_);
}

bool CmdpModel::operator==(const CmdpModel& o) const {
    return num_states_ == o.num_states_ && num_actions_ == o.num_actions_ &&
           horizon_ == o.horizon_ && offset_ == o.offset_ && initial_state_ == o.initial_state_ &&
           transitions_ == o.transitions_ && reward_ == o.reward_ && utility_ == o.utility_;
}

Policy::Policy(int num_states, int num_actions, int horizon)
    : num_states_(num_states), num_actions_(num_actions),
      tables_(horizon, Matrix::Zero(num_states, num_actions)) {}

Policy Policy::uniform(int num_states, int num_actions, int horizon) {
    Policy p(num_states, num_actions, horizon);
    for (auto& t : p.tables_) t.setConstant(1.0 / num_actions);
    return p;
}

int Policy::count_simplex_violations(double tol) const {
    int bad = 0;
    for (const auto& t : tables_)
        for (int x = 0; x < t.rows(); ++x) {
            const auto row = t.row(x);
            if (!row.allFinite() || row.minCoeff() < 0.0 || std::abs(row.sum() - 1.0) > tol) ++bad;
        }
    return bad;
}

void Policy::validate(double tol) const {
    if (const int bad = count_simplex_violations(tol); bad > 0)
        throw StructuralError(std::to_string(bad) + " policy rows are not probability vectors");
}

void Policy::check_dims(const CmdpModel& model) const {
    if (num_states_ != model.num_states() || num_actions_ != model.num_actions() ||
        horizon() != model.horizon())
        throw StructuralError("policy dimensions do not match the model");
}

Matrix bellman_apply(const CmdpModel& model, int h, const Vector& v_next, Signal which,
                     kernels::Exec exec) {
    if (v_next.size() != model.num_states())
        throw StructuralError("bellman_apply: continuation value has wrong length");
    Matrix q;
    kernels::backup(exec, model.transitions(h), model.signal(which, h), v_next, q);
    return q;
}

ValueFunctions evaluate_policy_exact(const CmdpModel& model, const Policy& policy,
                                     kernels::Exec exec) {
    policy.check_dims(model);
    const int S = model.num_states(), H = model.horizon();
    ValueFunctions vf;
    vf.q_reward.resize(H);
    vf.q_utility.resize(H);
    vf.v_reward.assign(H + 1, Vector::Zero(S));
    vf.v_utility.assign(H + 1, Vector::Zero(S));
    for (int h = H - 1; h >= 0; --h) {
        vf.q_reward[h] = bellman_apply(model, h, vf.v_reward[h + 1], Signal::kReward, exec);
        vf.q_utility[h] = bellman_apply(model, h, vf.v_utility[h + 1], Signal::kUtility, exec);
        kernels::policy_average(exec, vf.q_reward[h], policy.step(h), vf.v_reward[h]);
        kernels::policy_average(exec, vf.q_utility[h], policy.step(h), vf.v_utility[h]);
    }
    return vf;
}

Trajectory run_episode(const CmdpModel& model, const Policy& policy, Rng& rng, int episode) {
    policy.check_dims(model);
    Trajectory traj;
    traj.episode = episode;
    traj.steps.reserve(model.horizon());
    int x = model.initial_state();
    for (int h = 0; h < model.horizon(); ++h) {
        const int a = rng.categorical(policy.step(h).row(x));
        traj.steps.push_back({x, a, model.reward(h)(x, a), model.utility(h)(x, a)});
        x = rng.categorical(model.transition_row(h, x, a));
    }
    traj.terminal_state = x;
    return traj;
}

Trajectory run_episode(const CmdpModel& model, const Policy& policy, std::uint64_t seed) {
    Rng rng(seed);
    return run_episode(model, policy, rng);
}

nlohmann::json model_to_json(const CmdpModel& m) {
    using nlohmann::json;
    const int S = m.num_states(), A = m.num_actions(), H = m.horizon();
    json P = json::array(), r = json::array(), g = json::array();
    for (int h = 0; h < H; ++h) {
        json Ph = json::array(), rh = json::array(), gh = json::array();
        for (int x = 0; x < S; ++x) {
            json Px = json::array(), rx = json::array(), gx = json::array();
            for (int a = 0; a < A; ++a) {
                json row = json::array();
                for (int y = 0; y < S; ++y) row.push_back(m.transition(h, x, a, y));
                Px.push_back(std::move(row));
                rx.push_back(m.reward(h)(x, a));
                gx.push_back(m.utility(h)(x, a));
            }
            Ph.push_back(std::move(Px));
            rh.push_back(std::move(rx));
            gh.push_back(std::move(gx));
        }
        P.push_back(std::move(Ph));
        r.push_back(std::move(rh));
        g.push_back(std::move(gh));
    }
    return json{{"num_states", S},         {"num_actions", A}, {"horizon", H},
                {"b", m.offset()},         {"initial_state", m.initial_state()},
                {"transitions", std::move(P)}, {"reward", std::move(r)},
                {"utility", std::move(g)}};
}

CmdpModel model_from_json(const nlohmann::json& j) {
    try {
        const int S = j.at("num_states").get<int>();
        const int A = j.at("num_actions").get<int>();
        const int H = j.at("horizon").get<int>();
        if (S <= 0 || A <= 0 || H <= 0)
            throw ConfigError("num_states, num_actions and horizon must be positive");
        const auto& P = j.at("transitions");
        const auto& r = j.at("reward");
        const auto& g = j.at("utility");
        require(P.size() == static_cast<size_t>(H) && r.size() == static_cast<size_t>(H) &&
                    g.size() == static_cast<size_t>(H),
                "model file: per-step arrays must have length horizon");
        std::vector<Matrix> Pm(H, Matrix(S * A, S)), rm(H, Matrix(S, A)), gm(H, Matrix(S, A));
        for (int h = 0; h < H; ++h) {
            require(P[h].size() == static_cast<size_t>(S) && r[h].size() == static_cast<size_t>(S) &&
                        g[h].size() == static_cast<size_t>(S),
                    "model file: per-state arrays must have length num_states");
            for (int x = 0; x < S; ++x) {
                require(P[h][x].size() == static_cast<size_t>(A) &&
                            r[h][x].size() == static_cast<size_t>(A) &&
                            g[h][x].size() == static_cast<size_t>(A),
                        "model file: per-action arrays must have length num_actions");
                for (int a = 0; a < A; ++a) {
                    require(P[h][x][a].size() == static_cast<size_t>(S),
                            "model file: transition rows must have length num_states");
                    for (int y = 0; y < S; ++y) Pm[h](x * A + a, y) = P[h][x][a][y].get<double>();
                    rm[h](x, a) = r[h][x][a].get<double>();
                    gm[h](x, a) = g[h][x][a].get<double>();
                }
            }
        }
        return CmdpModel(S, A, H, j.at("b").get<double>(), j.value("initial_state", 0),
                         std::move(Pm), std::move(rm), std::move(gm));
    } catch (const nlohmann::json::exception& e) {
        throw StructuralError(std::string("model file: ") + e.what());
    }
}

CmdpModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw StructuralError("model file " + path.string() + ": " + e.what());
    }
    return model_from_json(j);
}

void save_model(const CmdpModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file " + path.string());
    out << model_to_json(model).dump() << '\n';
}

} // namespace cmdp
