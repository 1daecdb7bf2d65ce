#include "cmdp/envs.hpp"
#include "cmdp/errors.hpp"
#include "cmdp/experiment.hpp"
#include "cmdp/hindsight.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

using namespace cmdp;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kInfeasible = 2, kNumeric = 3 };

/// "c,r;c,r" -> cells
std::vector<Cell> parse_cells(const std::string& text) {
    std::vector<Cell> cells;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        if (item.empty()) continue;
        Cell c;
        char comma = 0;
        std::stringstream is(item);
        if (!(is >> c.col >> comma >> c.row) || comma != ',')
            throw ConfigError("bad cell '" + item + "' (expected col,row)");
        cells.push_back(c);
    }
    return cells;
}

Cell parse_cell(const std::string& text) {
    const auto cells = parse_cells(text);
    if (cells.size() != 1) throw ConfigError("expected one cell, got '" + text + "'");
    return cells.front();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimistic primal-dual policy optimization for episodic constrained MDPs"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "write a generated environment to disk");
    gen->require_subcommand(1);

    int states = 5, actions = 3, horizon = 5;
    double offset = 1.0;
    std::uint64_t seed = 0;
    std::string out;

    auto* gen_random = gen->add_subcommand("random", "Dirichlet transitions, uniform signals");
    gen_random->add_option("--states", states)->check(CLI::PositiveNumber);
    gen_random->add_option("--actions", actions)->check(CLI::PositiveNumber);
    gen_random->add_option("--horizon", horizon)->check(CLI::PositiveNumber);
    gen_random->add_option("--b", offset, "constraint threshold");
    gen_random->add_option("--seed", seed);
    gen_random->add_option("--out", out, "model file")->required();

    GridSpec grid;
    std::string hazards, walls, start = "0,0", goal;
    auto* gen_grid = gen->add_subcommand("grid", "hazard gridworld");
    gen_grid->add_option("--width", grid.width)->check(CLI::PositiveNumber);
    gen_grid->add_option("--height", grid.height)->check(CLI::PositiveNumber);
    gen_grid->add_option("--horizon", grid.horizon)->check(CLI::PositiveNumber);
    gen_grid->add_option("--hazards", hazards, "cells as col,row;col,row");
    gen_grid->add_option("--walls", walls, "cells as col,row;col,row");
    gen_grid->add_option("--start", start);
    gen_grid->add_option("--goal", goal, "default: opposite corner");
    gen_grid->add_option("--slip", grid.slip);
    gen_grid->add_option("--random-hazards", grid.random_hazards);
    gen_grid->add_option("--b", grid.offset);
    gen_grid->add_option("--seed", grid.seed);
    gen_grid->add_option("--out", out, "model file")->required();

    int d1 = 3, d2 = 3;
    std::string features_out;
    auto* gen_mixture = gen->add_subcommand("mixture", "linear mixture of base kernels with features");
    gen_mixture->add_option("--d1", d1, "number of base kernels")->check(CLI::PositiveNumber);
    gen_mixture->add_option("--d2", d2, "value feature dimension")->check(CLI::PositiveNumber);
    gen_mixture->add_option("--states", states)->check(CLI::PositiveNumber);
    gen_mixture->add_option("--actions", actions)->check(CLI::PositiveNumber);
    gen_mixture->add_option("--horizon", horizon)->check(CLI::PositiveNumber);
    gen_mixture->add_option("--b", offset);
    gen_mixture->add_option("--seed", seed);
    gen_mixture->add_option("--out", out, "model file")->required();
    gen_mixture->add_option("--features-out", features_out, "feature file")->required();

    std::string model_path;
    auto* gen_canonical = gen->add_subcommand("canonical", "canonical tabular features of a model");
    gen_canonical->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    gen_canonical->add_option("--out", out, "feature file")->required();

    // solve-hindsight
    std::optional<double> solve_offset;
    auto* solve = app.add_subcommand("solve-hindsight", "print the optimal constrained policy as JSON");
    solve->add_option("model", model_path)->required()->check(CLI::ExistingFile);
    solve->add_option("--b", solve_offset, "override the model threshold");

    // run
    ExperimentConfig cfg;
    std::string config_path, backend = "tabular", alpha_rule = "theorem", features_path;
    std::optional<double> run_offset, dual_cap;
    bool serial_seeds = false;
    auto* run = app.add_subcommand("run", "run the learner over several seeds");
    run->add_option("--config", config_path, "JSON config; explicit flags override it")->check(CLI::ExistingFile);
    auto* o_model = run->add_option("--model", model_path)->check(CLI::ExistingFile);
    auto* o_features = run->add_option("--features", features_path, "feature file for the lstd backend")
                           ->check(CLI::ExistingFile);
    auto* o_backend = run->add_option("--backend", backend)->check(CLI::IsMember({"lstd", "tabular"}));
    auto* o_episodes = run->add_option("--episodes", cfg.episodes)->check(CLI::NonNegativeNumber);
    auto* o_seeds = run->add_option("--seeds", cfg.seeds)->check(CLI::PositiveNumber);
    auto* o_seed_base = run->add_option("--seed-base", cfg.seed_base);
    auto* o_b = run->add_option("--b", run_offset, "override the model threshold");
    auto* o_c1 = run->add_option("--c1", cfg.c1, "bonus constant");
    auto* o_p = run->add_option("--p", cfg.failure_prob, "failure probability");
    auto* o_alpha = run->add_option("--alpha-rule", alpha_rule)->check(CLI::IsMember({"theorem", "analysis"}));
    auto* o_cap = run->add_option("--dual-cap", dual_cap, "explicit chi");
    auto* o_serial = run->add_flag("--serial-seeds", serial_seeds, "run seeds one after another");
    std::string out_dir;
    auto* o_out = run->add_option("--out", out_dir, "output directory");

    // report
    auto* rep = app.add_subcommand("report", "re-aggregate a run directory and redraw its plots");
    rep->add_option("dir", out_dir)->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen_random->parsed()) {
            save_model(make_tabular_random(states, actions, horizon, offset, seed), out);
        } else if (gen_grid->parsed()) {
            grid.hazards = parse_cells(hazards);
            grid.walls = parse_cells(walls);
            grid.start = parse_cell(start);
            grid.goal = goal.empty() ? Cell{grid.width - 1, grid.height - 1} : parse_cell(goal);
            save_model(make_hazard_gridworld(grid), out);
        } else if (gen_mixture->parsed()) {
            const auto inst = make_linear_mixture(d1, d2, states, actions, horizon, d1, offset, seed);
            save_model(inst.model, out);
            save_features(inst.features, features_out);
        } else if (gen_canonical->parsed()) {
            save_features(canonical_features(load_model(model_path)), out);
        } else if (solve->parsed()) {
            const CmdpModel model = load_model(model_path);
            const HindsightSolution sol = solve_offset ? solve_hindsight(model, *solve_offset) : solve_hindsight(model);
            std::cout << hindsight_to_json(sol).dump(2) << '\n';
        } else if (run->parsed()) {
            if (!config_path.empty()) {
                const ExperimentConfig base = ExperimentConfig::load(config_path);
                const ExperimentConfig flags = cfg;
                cfg = base;
                if (o_episodes->count()) cfg.episodes = flags.episodes;
                if (o_seeds->count()) cfg.seeds = flags.seeds;
                if (o_seed_base->count()) cfg.seed_base = flags.seed_base;
                if (o_c1->count()) cfg.c1 = flags.c1;
                if (o_p->count()) cfg.failure_prob = flags.failure_prob;
            }
            if (o_model->count()) cfg.model = model_path;
            if (o_features->count()) cfg.features = features_path;
            if (o_backend->count() || config_path.empty()) cfg.backend = backend_from_string(backend);
            if (o_alpha->count() || config_path.empty()) cfg.alpha_rule = alpha_rule_from_string(alpha_rule);
            if (o_b->count()) cfg.offset = run_offset;
            if (o_cap->count()) cfg.dual_cap = dual_cap;
            if (o_serial->count()) cfg.parallel_seeds = false;
            if (cfg.model.empty()) throw ConfigError("run needs --model or a config naming one");
            if (!o_out->count()) throw ConfigError("run needs --out");
            const RunManifest m = run_experiment(cfg, out_dir);
            const nlohmann::json agg = nlohmann::json::parse(std::ifstream(std::filesystem::path(out_dir) / "aggregate.json"));
            std::cout << "seeds " << m.seeds.size() << ", K = " << cfg.episodes
                      << ", mean Regret(K) = " << agg["final_regret"].get<double>()
                      << ", mean Violation(K) = " << agg["final_violation"].get<double>() << '\n';
        } else if (rep->parsed()) {
            const nlohmann::json agg = report(out_dir);
            std::cout << nlohmann::json{{"seeds", agg["seeds"]},
                                        {"episodes", agg["episodes"]},
                                        {"final_regret", agg["final_regret"]},
                                        {"final_violation", agg["final_violation"]},
                                        {"regret_slope", agg["regret_slope"]}}
                             .dump(2)
                      << '\n';
        }
    } catch (const InfeasibleConstraint& e) {
        std::cerr << "infeasible constraint: " << e.what() << '\n';
        return kInfeasible;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kOk;
}
