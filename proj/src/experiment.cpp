#include "cmdp/experiment.hpp"

#include "cmdp/envs.hpp"
#include "cmdp/errors.hpp"
#include "cmdp/plot.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>

namespace cmdp {

namespace fs = std::filesystem;

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j = {{"model", model.string()},
                        {"backend", cmdp::to_string(backend)},
                        {"episodes", episodes},
                        {"seeds", seeds},
                        {"seed_base", seed_base},
                        {"c1", c1},
                        {"p", failure_prob},
                        {"alpha_rule", cmdp::to_string(alpha_rule)},
                        {"parallel_seeds", parallel_seeds}};
    j["features"] = features ? nlohmann::json(features->string()) : nlohmann::json(nullptr);
    j["b"] = offset ? nlohmann::json(*offset) : nlohmann::json(nullptr);
    j["dual_cap"] = dual_cap ? nlohmann::json(*dual_cap) : nlohmann::json(nullptr);
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    static const std::set<std::string> known{"model", "features", "backend", "episodes", "seeds",
                                             "seed_base", "b", "c1", "p", "alpha_rule", "dual_cap",
                                             "parallel_seeds"};
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
    try {
        ExperimentConfig c;
        c.model = j.at("model").get<std::string>();
        if (j.contains("features") && !j["features"].is_null()) c.features = j["features"].get<std::string>();
        if (j.contains("backend")) c.backend = backend_from_string(j["backend"].get<std::string>());
        if (j.contains("episodes")) c.episodes = j["episodes"].get<int>();
        if (j.contains("seeds")) c.seeds = j["seeds"].get<int>();
        if (j.contains("seed_base")) c.seed_base = j["seed_base"].get<std::uint64_t>();
        if (j.contains("b") && !j["b"].is_null()) c.offset = j["b"].get<double>();
        if (j.contains("c1")) c.c1 = j["c1"].get<double>();
        if (j.contains("p")) c.failure_prob = j["p"].get<double>();
        if (j.contains("alpha_rule")) c.alpha_rule = alpha_rule_from_string(j["alpha_rule"].get<std::string>());
        if (j.contains("dual_cap") && !j["dual_cap"].is_null()) c.dual_cap = j["dual_cap"].get<double>();
        if (j.contains("parallel_seeds")) c.parallel_seeds = j["parallel_seeds"].get<bool>();
        if (c.episodes < 0) throw ConfigError("episodes must be nonnegative");
        if (c.seeds < 1) throw ConfigError("need at least one seed");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad experiment config: ") + e.what());
    }
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
}

bool RunManifest::complete() const {
    return std::all_of(seeds.begin(), seeds.end(), [](const SeedOutcome& s) { return s.status == "ok"; });
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json seed_list = nlohmann::json::array();
    for (const auto& s : seeds)
        seed_list.push_back({{"seed", s.seed},
                             {"status", s.status},
                             {"ledger", s.ledger.string()},
                             {"wall_seconds", s.wall_seconds},
                             {"regret", s.regret},
                             {"violation", s.violation}});
    return {{"config", config},       {"model_sha256", model_sha256}, {"offset", offset}, {"schedule", schedule},
            {"hindsight", hindsight}, {"seeds", seed_list},           {"wall_seconds", wall_seconds},
            {"complete", complete()}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    try {
        RunManifest m;
        m.config = j.at("config");
        m.model_sha256 = j.at("model_sha256").get<std::string>();
        m.offset = j.at("offset").get<double>();
        m.schedule = j.at("schedule");
        m.hindsight = j.at("hindsight");
        m.wall_seconds = j.at("wall_seconds").get<double>();
        for (const auto& s : j.at("seeds")) {
            SeedOutcome o;
            o.seed = s.at("seed").get<std::uint64_t>();
            o.status = s.at("status").get<std::string>();
            o.ledger = s.at("ledger").get<std::string>();
            o.wall_seconds = s.at("wall_seconds").get<double>();
            o.regret = s.at("regret").get<double>();
            o.violation = s.at("violation").get<double>();
            m.seeds.push_back(o);
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw StructuralError(std::string("malformed manifest: ") + e.what());
    }
}

std::string file_sha256(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StructuralError("cannot read " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    char buf[1 << 15];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, in.gcount());
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest, &len);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

namespace {

nlohmann::json schedule_to_json(const OpdopConfig& c) {
    return {{"alpha", c.step_size}, {"beta", c.bonus_scale}, {"eta", c.dual_step}, {"theta", c.mixing},
            {"lambda", c.ridge},    {"chi", c.dual_cap},     {"K", c.episodes},    {"p", c.failure_prob}};
}

struct Band {
    std::vector<double> mean, lower, upper;
};

/// Seed mean with a one-standard-error band.
Band band_of(const std::vector<RegretLedger>& ledgers, double LedgerRow::*field) {
    Band b;
    b.mean = mean_curve(ledgers, field);
    const double n = static_cast<double>(ledgers.size());
    for (std::size_t i = 0; i < b.mean.size(); ++i) {
        double ss = 0.0;
        for (const auto& l : ledgers) ss += std::pow(l.rows()[i].*field - b.mean[i], 2);
        const double se = n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
        b.lower.push_back(b.mean[i] - se);
        b.upper.push_back(b.mean[i] + se);
    }
    return b;
}

nlohmann::json aggregate_and_plot(const std::vector<RegretLedger>& ledgers, const fs::path& dir,
                                  const std::string& backend) {
    nlohmann::json agg = {{"seeds", ledgers.size()}};
    const int K = ledgers.empty() ? 0 : ledgers.front().episodes();
    agg["episodes"] = K;
    std::vector<double> ks(K);
    for (int k = 0; k < K; ++k) ks[k] = k + 1;

    const Band regret = band_of(ledgers, &LedgerRow::regret_cum);
    const Band violation = band_of(ledgers, &LedgerRow::violation_cum);
    Band rate = regret;
    for (int k = 0; k < K; ++k) {
        rate.mean[k] /= ks[k];
        rate.lower[k] /= ks[k];
        rate.upper[k] /= ks[k];
    }
    auto band_json = [](const Band& b) {
        return nlohmann::json{{"mean", b.mean}, {"stderr_lower", b.lower}, {"stderr_upper", b.upper}};
    };
    agg["regret_cum"] = band_json(regret);
    agg["violation_cum"] = band_json(violation);
    agg["final_regret"] = K ? regret.mean.back() : 0.0;
    agg["final_violation"] = K ? violation.mean.back() : 0.0;
    agg["regret_slope"] = K >= 100 ? nlohmann::json(fit_regret_slope(ledgers)) : nlohmann::json(nullptr);

    std::ofstream(dir / "aggregate.json") << agg.dump(1) << '\n';

    const std::string tag = " (" + backend + ", " + std::to_string(ledgers.size()) + " seeds)";
    auto chart = [&](const char* file, const std::string& title, const char* ylabel, const Band& b) {
        plot::write_line_chart(dir / file, {title + tag, "episode k", ylabel},
                               {{"mean +/- 1 s.e.", ks, b.mean, b.lower, b.upper}});
    };
    chart("regret.svg", "Cumulative regret", "Regret(k)", regret);
    chart("violation.svg", "Cumulative constraint violation", "Violation(k)", violation);
    chart("regret_rate.svg", "Average regret", "Regret(k) / k", rate);
    return agg;
}

} // namespace

RunManifest run_experiment(const ExperimentConfig& config, const fs::path& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(out_dir);

    const CmdpModel base = load_model(config.model);
    const double b = config.offset.value_or(base.offset());
    // checks b against the achievable utility first so b > H reports as infeasible
    const HindsightSolution hindsight = solve_hindsight(base, b);
    const CmdpModel model = base.with_offset(b);

    std::optional<FeatureMaps> features;
    if (config.backend == Backend::kLstd)
        features = config.features ? load_features(*config.features) : canonical_features(model);

    ScheduleInputs in;
    in.num_states = model.num_states();
    in.num_actions = model.num_actions();
    in.horizon = model.horizon();
    in.episodes = config.episodes;
    in.dim = features ? features->dim() : 0;
    in.failure_prob = config.failure_prob;
    in.slater_gap = hindsight.slater_gap;
    in.c1 = config.c1;
    in.backend = config.backend;
    in.alpha_rule = config.alpha_rule;
    in.dual_cap = config.dual_cap;
    const OpdopConfig schedule = default_schedule(in);

    RunManifest manifest;
    manifest.config = config.to_json();
    manifest.model_sha256 = file_sha256(config.model);
    manifest.offset = b;
    manifest.schedule = schedule_to_json(schedule);
    manifest.hindsight = hindsight_to_json(hindsight);
    manifest.seeds.resize(config.seeds);

    std::vector<RegretLedger> ledgers(config.seeds);
    std::vector<std::exception_ptr> errors(config.seeds);

#pragma omp parallel for schedule(dynamic) if (config.parallel_seeds)
    for (int i = 0; i < config.seeds; ++i) {
        SeedOutcome& out = manifest.seeds[i];
        out.seed = config.seed_base + static_cast<std::uint64_t>(i);
        out.ledger = "seed_" + std::to_string(out.seed) + ".csv";
        const auto s0 = std::chrono::steady_clock::now();
        try {
            ledgers[i] = run_opdop(model, schedule, config.backend, features ? &*features : nullptr, out.seed,
                                   hindsight);
            ledgers[i].write_csv(out_dir / out.ledger);
            out.status = "ok";
            out.regret = ledgers[i].regret();
            out.violation = ledgers[i].violation();
        } catch (const std::exception& e) {
            out.status = std::string("failed: ") + e.what();
            errors[i] = std::current_exception();
        }
        out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - s0).count();
    }

    std::vector<RegretLedger> finished;
    for (int i = 0; i < config.seeds; ++i)
        if (!errors[i]) finished.push_back(ledgers[i]);
    aggregate_and_plot(finished, out_dir, to_string(config.backend));

    manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream(out_dir / "manifest.json") << manifest.to_json().dump(1) << '\n';
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return manifest;
}

nlohmann::json report(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw StructuralError("no manifest.json in " + dir.string());
    nlohmann::json raw;
    try {
        raw = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw StructuralError(std::string("manifest is not valid JSON: ") + e.what());
    }
    const RunManifest m = RunManifest::from_json(raw);
    const double v_star = m.hindsight.at("optimal_value").get<double>();
    const double b = m.offset;
    std::vector<RegretLedger> ledgers;
    for (const auto& s : m.seeds)
        if (s.status == "ok") ledgers.push_back(RegretLedger::read_csv(dir / s.ledger, v_star, b));
    return aggregate_and_plot(ledgers, dir, m.config.value("backend", std::string("?")));
}

} // namespace cmdp
