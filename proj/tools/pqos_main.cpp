// Command-line front end: train, evaluate, sweep, validate configs, or run
// the built-in oracle selftest. Identical invocations (config, overrides,
// seeds) produce byte-identical CSVs and checkpoints.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pqos/pqos.hpp"
#include "pqos/selftest.hpp"

namespace {

constexpr int kExitCliError = 2;
constexpr int kExitConfigError = 3;
constexpr int kExitIoError = 4;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    std::vector<std::uint64_t> seeds;
    int jobs = 1;
    int checkpoint_every = 0;
    bool kpi_trace = false;
    bool train_steps_csv = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool wants_seeds) {
    cmd->add_option("--config", opts.config_path, "key = value config file (defaults when omitted)");
    cmd->add_option("--set", opts.overrides, "override a config key, e.g. --set num_vehicles=5")
        ->take_all();
    const char* env_out = std::getenv("PQOS_OUT_DIR");
    opts.out_dir = env_out ? env_out : "runs";
    cmd->add_option("--out", opts.out_dir, "output directory (env PQOS_OUT_DIR)");
    if (wants_seeds) {
        cmd->add_option("--seed", opts.seeds, "run seed; repeat for several runs")->take_all();
    }
}

pqos::Configs resolve_config(const CommonOpts& opts) {
    pqos::Configs cfg = opts.config_path.empty() ? pqos::Configs{} : pqos::load_config(opts.config_path);
    for (const auto& o : opts.overrides) pqos::apply_override(cfg, o);
    pqos::validate(cfg);
    for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
    return cfg;
}

std::vector<std::uint64_t> seeds_or_default(const CommonOpts& opts) {
    return opts.seeds.empty() ? std::vector<std::uint64_t>{1} : opts.seeds;
}

pqos::RunPlan make_plan(const pqos::Configs& cfg, const CommonOpts& opts, std::uint64_t seed) {
    pqos::RunPlan plan;
    plan.cfg = cfg;
    plan.seed = seed;
    plan.out_dir = opts.out_dir;
    plan.run_id = pqos::default_run_id(cfg, seed);
    plan.checkpoint_interval_episodes = opts.checkpoint_every;
    plan.write_kpi_trace = opts.kpi_trace;
    plan.write_train_steps = opts.train_steps_csv;
    return plan;
}

void print_summary(const std::string& label, const pqos::EpisodeSummary& s) {
    std::printf("%s: norm_reward=%.4f qos=%.4f qoe=%.4f kpi_match=%.4f mean_q=%.4f\n",
                label.c_str(), s.mean_norm_reward, s.qos_metric, s.qoe_metric, s.kpi_match_prob,
                s.mean_q);
}

int cmd_train(const CommonOpts& opts) {
    const auto cfg = resolve_config(opts);
    for (auto seed : seeds_or_default(opts)) {
        auto plan = make_plan(cfg, opts, seed);
        const auto result = pqos::train(plan);
        std::printf("trained %s (%d episodes) -> %s\n", plan.run_id.c_str(),
                    cfg.learning.train_episodes, plan.run_dir().string().c_str());
        if (result.last_episode) print_summary("  last episode", *result.last_episode);
    }
    return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& from_dir) {
    const auto cfg = resolve_config(opts);
    const bool constant = cfg.federation.scheme.kind == pqos::SchemeKind::kConstant;
    if (!constant && from_dir.empty()) {
        std::cerr << "error: eval of a learning scheme needs --from <run_dir> with checkpoints\n";
        return kExitCliError;
    }
    std::vector<pqos::ModelParams> params;
    if (!from_dir.empty()) params = pqos::load_latest_checkpoints(from_dir);
    for (auto seed : seeds_or_default(opts)) {
        auto plan = make_plan(cfg, opts, seed);
        pqos::write_manifest(plan);
        const auto summary = pqos::evaluate(params, plan);
        print_summary("eval " + plan.run_id, summary);
    }
    return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& axis_name, const std::string& values_csv) {
    const auto cfg = resolve_config(opts);
    const auto axis = pqos::parse_sweep_axis(axis_name);
    if (!axis) {
        std::cerr << "error: unknown sweep axis '" << axis_name << "' (use n, upsilon, rho, scheme)\n";
        return kExitCliError;
    }
    std::vector<std::string> values;
    std::string tok;
    std::stringstream ss(values_csv);
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) values.push_back(tok);
    }
    if (values.empty()) {
        std::cerr << "error: --values must list at least one value\n";
        return kExitCliError;
    }
    auto base = make_plan(cfg, opts, seeds_or_default(opts).front());
    const auto result = pqos::sweep(*axis, values, base, seeds_or_default(opts), opts.jobs);
    std::printf("sweep over %s wrote %zu rows -> %s\n", pqos::sweep_axis_key(*axis),
                result.rows.size(), (base.out_dir / "sweep.csv").string().c_str());
    for (const auto& r : result.rows) {
        print_summary("  " + r.axis + "=" + r.value + " seed=" + std::to_string(r.seed), r.eval);
    }
    return 0;
}

int cmd_validate(const CommonOpts& opts) {
    const auto cfg = resolve_config(opts);
    std::cout << pqos::serialize_config(cfg);
    std::cout << "# configuration valid\n";
    return 0;
}

int cmd_selftest() {
    bool all_ok = true;
    for (const auto& check : pqos::selftest::run_all()) {
        std::printf("[%s] %s: %s\n", check.passed ? "PASS" : "FAIL", check.name.c_str(),
                    check.detail.c_str());
        all_ok = all_ok && check.passed;
    }
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pqos-sim: RL-driven LiDAR compression control over a simulated uplink"};
    app.require_subcommand(1);

    CommonOpts train_opts, eval_opts, sweep_opts, validate_opts;
    std::string eval_from, sweep_axis, sweep_values;

    auto* train_cmd = app.add_subcommand("train", "train agents and write checkpoints + CSV logs");
    add_common(train_cmd, train_opts, true);
    train_cmd->add_option("--checkpoint-every", train_opts.checkpoint_every,
                          "checkpoint cadence in episodes (0 = final only)");
    train_cmd->add_flag("--kpi-trace", train_opts.kpi_trace, "dump per-step KPI rows");
    train_cmd->add_flag("--step-csv", train_opts.train_steps_csv, "dump per-step training scores");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained run (or a constant scheme)");
    add_common(eval_cmd, eval_opts, true);
    eval_cmd->add_option("--from", eval_from, "run directory holding agent_*/ep*.ckpt");
    eval_cmd->add_flag("--kpi-trace", eval_opts.kpi_trace, "dump per-step KPI rows");

    auto* sweep_cmd = app.add_subcommand("sweep", "train+eval across an axis of values");
    add_common(sweep_cmd, sweep_opts, true);
    sweep_cmd->add_option("--axis", sweep_axis, "one of: n, upsilon, rho, scheme")->required();
    sweep_cmd->add_option("--values", sweep_values, "comma-separated axis values")->required();
    sweep_cmd->add_option("--jobs", sweep_opts.jobs, "parallel runs (default 1)");

    auto* validate_cmd = app.add_subcommand("validate", "check a config file and print it resolved");
    add_common(validate_cmd, validate_opts, false);

    app.add_subcommand("selftest", "run the built-in oracle suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitCliError;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_opts);
        if (eval_cmd->parsed()) return cmd_eval(eval_opts, eval_from);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_opts, sweep_axis, sweep_values);
        if (validate_cmd->parsed()) return cmd_validate(validate_opts);
        return cmd_selftest();
    } catch (const pqos::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIoError;
    }
}
