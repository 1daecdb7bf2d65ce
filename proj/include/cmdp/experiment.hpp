#pragma once

#include "cmdp/opdop.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace cmdp {

/// Everything a run needs; the JSON form uses the CLI flag names.
struct ExperimentConfig {
    std::filesystem::path model;
    std::optional<std::filesystem::path> features; ///< lstd only; canonical features when absent
    Backend backend = Backend::kTabular;
    int episodes = 1000;
    int seeds = 10;
    std::uint64_t seed_base = 1;
    std::optional<double> offset; ///< overrides the model's b
    double c1 = 1.0;
    double failure_prob = 0.1;
    AlphaRule alpha_rule = AlphaRule::kTheorem;
    std::optional<double> dual_cap;
    bool parallel_seeds = true;

    nlohmann::json to_json() const;
    /// Unknown keys are rejected so a typo cannot silently fall back to a default.
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::filesystem::path& path);
};

struct SeedOutcome {
    std::uint64_t seed = 0;
    std::string status = "pending"; ///< "ok" or "failed: <reason>"
    std::filesystem::path ledger;
    double wall_seconds = 0.0;
    double regret = 0.0;
    double violation = 0.0;
};

struct RunManifest {
    nlohmann::json config;
    std::string model_sha256;
    double offset = 0.0; ///< effective b
    nlohmann::json schedule;
    nlohmann::json hindsight;
    std::vector<SeedOutcome> seeds;
    double wall_seconds = 0.0;

    bool complete() const;
    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

/// Hex SHA-256 of a file's bytes.
std::string file_sha256(const std::filesystem::path& path);

/// Solves hindsight once, runs every seed, and writes seed_<s>.csv,
/// aggregate.json, manifest.json and the SVG plots into out_dir. A failing
/// seed is recorded in the manifest, which is written before the first
/// failure is rethrown.
RunManifest run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Re-reads the ledgers named in dir/manifest.json and rewrites the aggregate and plots.
nlohmann::json report(const std::filesystem::path& dir);

} // namespace cmdp
