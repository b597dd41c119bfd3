#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pqos/orchestrator.hpp"

using namespace pqos;
namespace fs = std::filesystem;

namespace {

Configs desk_cfg(const std::string& scheme, int n, int train_episodes = 3) {
    Configs cfg;
    apply_override(cfg, "scheme=" + scheme);
    apply_override(cfg, "num_vehicles=" + std::to_string(n));
    cfg.learning.train_episodes = train_episodes;
    cfg.learning.train_steps_per_episode = 10;
    cfg.learning.test_episodes = 2;
    cfg.learning.test_steps_per_episode = 12;
    cfg.learning.replay_capacity_transitions = 64;
    cfg.learning.batch_size = 8;
    cfg.learning.learning_rate = 1e-3;
    cfg.learning.target_sync_interval_steps = 10;
    validate(cfg);
    return cfg;
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ostringstream ss;
    ss << std::ifstream(p).rdbuf();
    return ss.str();
}

RunPlan plan_for(const Configs& cfg, std::uint64_t seed, const fs::path& out,
                 const std::string& id) {
    RunPlan plan;
    plan.cfg = cfg;
    plan.seed = seed;
    plan.out_dir = out;
    plan.run_id = id;
    return plan;
}

}  // namespace

TEST_CASE("constant topology runs without agents", "[orchestrator]") {
    const auto cfg = desk_cfg("constant(C-R)", 2);
    Rng rng = Rng::from(1, 8);
    Topology topo = Topology::create(cfg, rng);
    CHECK(topo.agent_count() == 0);
    CHECK_FALSE(topo.learning());

    World world(cfg.scenario);
    const auto summary = run_episode(world, topo, RunMode::kTrain, 0, cfg, rng);
    // Every step used C-R, so the QoE metric equals the C-R score exactly.
    const double sigma_e = qoe_score(cfg.scenario.cd_for(CompressionAction::kRaw),
                                     cfg.scenario.max_cd, cfg.learning.penalty);
    CHECK(summary.qoe_metric == Catch::Approx(1.0 - sigma_e).margin(1e-12));
    CHECK(summary.mean_q == 0.0);
}

TEST_CASE("evaluation leaves agents untouched", "[orchestrator]") {
    const auto cfg = desk_cfg("federated", 2);
    Rng rng = Rng::from(2, 8);
    Topology topo = Topology::create(cfg, rng);
    const auto before = topo.snapshots();
    const auto counter_before = topo.agent(0).learn_step_counter();

    World world(cfg.scenario);
    Rng eval_rng = Rng::from(3, 8);
    run_episode(world, topo, RunMode::kEval, 0, cfg, eval_rng);

    const auto after = topo.snapshots();
    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].values == after[i].values);
    CHECK(topo.agent(0).learn_step_counter() == counter_before);
    CHECK(topo.agent(0).buffer().size() == 0);
}

TEST_CASE("training runs are deterministic per seed", "[orchestrator]") {
    const auto cfg = desk_cfg("centralized", 2);
    const auto out = fresh_dir("pqos_orch_det");
    auto plan_a = plan_for(cfg, 42, out, "det_a");
    auto plan_b = plan_for(cfg, 42, out, "det_b");

    const auto res_a = train(plan_a);
    const auto res_b = train(plan_b);
    REQUIRE(res_a.params.size() == res_b.params.size());
    for (std::size_t i = 0; i < res_a.params.size(); ++i) {
        CHECK(res_a.params[i].values == res_b.params[i].values);
    }
    const auto csv_a = slurp(plan_a.run_dir() / "train_episodes.csv");
    auto csv_b = slurp(plan_b.run_dir() / "train_episodes.csv");
    // Only the run_id column differs between the two runs.
    std::string::size_type pos;
    while ((pos = csv_b.find("det_b")) != std::string::npos) csv_b.replace(pos, 5, "det_a");
    CHECK(csv_a == csv_b);

    const auto eval_a = evaluate(res_a.params, plan_a);
    const auto eval_b = evaluate(res_b.params, plan_b);
    CHECK(eval_a.mean_norm_reward == eval_b.mean_norm_reward);
    CHECK(eval_a.qos_metric == eval_b.qos_metric);
}

TEST_CASE("zero training episodes returns the initial parameters", "[orchestrator]") {
    auto cfg = desk_cfg("distributed", 2, 0);
    const auto out = fresh_dir("pqos_orch_zero");
    auto plan = plan_for(cfg, 7, out, "zero");
    const auto result = train(plan);

    Rng rng = Rng::from(7, kTrainStream);
    Topology reference = Topology::create(cfg, rng);
    const auto expected = reference.snapshots();
    REQUIRE(result.params.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(result.params[i].values == expected[i].values);
    }

    const auto csv = slurp(plan.run_dir() / "train_episodes.csv");
    CHECK(csv.find('\n') == csv.size() - 1);  // header only
    CHECK(fs::exists(plan.run_dir() / "agent_0" / "ep0.ckpt"));
}

TEST_CASE("distributed training returns one parameter set per vehicle", "[orchestrator]") {
    const auto cfg = desk_cfg("distributed", 3);
    const auto out = fresh_dir("pqos_orch_dist");
    const auto result = train(plan_for(cfg, 5, out, "dist3"));
    REQUIRE(result.params.size() == 3);
    CHECK(result.params[0].values != result.params[1].values);
    CHECK(result.params[1].values != result.params[2].values);
}

TEST_CASE("federated agents are bitwise equal right after a sync", "[orchestrator]") {
    auto cfg = desk_cfg("federated", 3);
    // Sync every step; the final step of the episode ends on a boundary, so
    // the returned parameters must match across agents.
    cfg.federation.fed_sync_interval_s = cfg.scenario.step_duration_s;
    const auto out = fresh_dir("pqos_orch_fed");
    const auto result = train(plan_for(cfg, 11, out, "fed3"));
    REQUIRE(result.params.size() == 3);
    CHECK(result.params[0].values == result.params[1].values);
    CHECK(result.params[1].values == result.params[2].values);
}

TEST_CASE("federated n=1 with per-step syncs matches distributed n=1", "[orchestrator]") {
    // With the target refreshed every learning step in both schemes,
    // aggregating a single client is the identity and the trajectories must
    // coincide bitwise.
    auto fed = desk_cfg("federated", 1, 4);
    fed.learning.target_sync_interval_steps = 1;
    fed.federation.fed_sync_interval_s = fed.scenario.step_duration_s;
    auto dist = fed;
    apply_override(dist, "scheme=distributed");

    const auto out = fresh_dir("pqos_orch_fed1");
    const auto fed_result = train(plan_for(fed, 21, out, "fed1"));
    const auto dist_result = train(plan_for(dist, 21, out, "dist1"));
    REQUIRE(fed_result.params.size() == 1);
    REQUIRE(dist_result.params.size() == 1);
    CHECK(fed_result.params[0].values == dist_result.params[0].values);
}

TEST_CASE("constant schemes evaluate without parameters", "[orchestrator]") {
    auto cfg = desk_cfg("constant(C-SA)", 1);
    cfg.scenario.shadowing_enabled = false;  // deterministic channel: 17 kB always clears
    const auto out = fresh_dir("pqos_orch_const");
    auto plan = plan_for(cfg, 3, out, "const_csa");
    const auto summary = evaluate({}, plan);
    CHECK(summary.kpi_match_prob == 1.0);

    const auto again = evaluate({}, plan);
    CHECK(again.mean_norm_reward == summary.mean_norm_reward);
    CHECK(slurp(plan.run_dir() / "eval_steps.csv").size() > 0);
}

TEST_CASE("checkpoints reload into the same parameters", "[orchestrator]") {
    const auto cfg = desk_cfg("centralized", 2);
    const auto out = fresh_dir("pqos_orch_ckpt");
    auto plan = plan_for(cfg, 9, out, "ckpt");
    plan.checkpoint_interval_episodes = 2;
    const auto result = train(plan);
    const auto loaded = load_latest_checkpoints(plan.run_dir());
    REQUIRE(loaded.size() == result.params.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].values == result.params[i].values);
    }
    CHECK(fs::exists(plan.run_dir() / "agent_0" / "ep2.ckpt"));
    CHECK(fs::exists(plan.run_dir() / "agent_0" / "ep3.ckpt"));
    CHECK(fs::exists(plan.run_dir() / "manifest.cfg"));
}

TEST_CASE("a single-value sweep equals one train+evaluate", "[orchestrator]") {
    const auto cfg = desk_cfg("centralized", 1);
    const auto out = fresh_dir("pqos_orch_sweep");
    auto base = plan_for(cfg, 13, out, "unused");

    const auto result = sweep(SweepAxis::kNumVehicles, {"1"}, base, {13});
    REQUIRE(result.rows.size() == 1);

    auto direct_plan = plan_for(cfg, 13, fresh_dir("pqos_orch_sweep_direct"), "direct");
    const auto trained = train(direct_plan);
    const auto direct_eval = evaluate(trained.params, direct_plan);
    CHECK(result.rows[0].eval.mean_norm_reward == direct_eval.mean_norm_reward);
    CHECK(result.rows[0].eval.qos_metric == direct_eval.qos_metric);
    CHECK(fs::exists(out / "sweep.csv"));

    CHECK_THROWS_AS(sweep(SweepAxis::kPenalty, {}, base, {13}), std::invalid_argument);
}

TEST_CASE("sweeps cover the paper-style axes", "[orchestrator]") {
    auto cfg = desk_cfg("constant(C-SA)", 1);
    cfg.learning.test_episodes = 1;
    const auto out = fresh_dir("pqos_orch_sweep_axes");
    auto base = plan_for(cfg, 2, out, "unused");
    const auto res = sweep(SweepAxis::kScheme, {"constant(C-R)", "constant(C-SA)"}, base, {2, 3}, 2);
    REQUIRE(res.rows.size() == 4);
    CHECK(res.rows[0].value == "constant(C-R)");
    CHECK(res.rows[0].seed == 2);
    CHECK(res.rows[3].value == "constant(C-SA)");
    CHECK(res.rows[3].seed == 3);

    // QoE ordering between the two constants is structural.
    CHECK(res.rows[0].eval.qoe_metric > res.rows[2].eval.qoe_metric);
}
