#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "pqos/config.hpp"
#include "pqos/federation.hpp"
#include "pqos/metrics.hpp"
#include "pqos/rl.hpp"
#include "pqos/simcore.hpp"

namespace pqos {

inline constexpr const char* kArtifactVersion = "0.1.0";

// RNG streams: one per phase so training and evaluation of the same seed
// stay independent.
inline constexpr std::uint64_t kTrainStream = 1;
inline constexpr std::uint64_t kEvalStream = 2;

struct RunPlan {
    Configs cfg;
    std::uint64_t seed = 1;
    std::string run_id;
    std::filesystem::path out_dir = "runs";
    int checkpoint_interval_episodes = 0;  // 0 = final checkpoint only
    bool write_train_steps = false;
    bool write_kpi_trace = false;

    std::filesystem::path run_dir() const { return out_dir / run_id; }
};

inline std::string default_run_id(const Configs& cfg, std::uint64_t seed) {
    std::string id = scheme_label(cfg.federation.scheme);
    for (auto& ch : id) {
        if (ch == '(' || ch == ')') ch = '-';
    }
    while (!id.empty() && id.back() == '-') id.pop_back();
    return id + "-n" + std::to_string(cfg.scenario.num_vehicles) + "-seed" + std::to_string(seed);
}

// Who owns which agent: one shared agent (centralized), one per vehicle
// (distributed / federated), or none (constant action).
class Topology {
public:
    static Topology create(const Configs& cfg, Rng& init_rng) {
        Topology t;
        t.scheme_ = cfg.federation.scheme;
        t.num_vehicles_ = cfg.scenario.num_vehicles;
        const int agents = t.agent_count_for(t.scheme_.kind, t.num_vehicles_);
        for (int i = 0; i < agents; ++i) {
            t.agents_.push_back(std::make_unique<DdqnAgent>(kStateDim, cfg.learning, init_rng));
        }
        return t;
    }

    const Scheme& scheme() const { return scheme_; }
    bool learning() const { return scheme_.kind != SchemeKind::kConstant; }
    int agent_count() const { return static_cast<int>(agents_.size()); }

    DdqnAgent& agent_for_vehicle(int vehicle) {
        if (scheme_.kind == SchemeKind::kCentralized) return *agents_.at(0);
        return *agents_.at(vehicle);
    }
    DdqnAgent& agent(int idx) { return *agents_.at(idx); }
    const DdqnAgent& agent(int idx) const { return *agents_.at(idx); }

    std::vector<ModelParams> snapshots() const {
        std::vector<ModelParams> out;
        for (const auto& a : agents_) out.push_back(a->snapshot());
        return out;
    }

    void load_params(const std::vector<ModelParams>& params) {
        if (static_cast<int>(params.size()) != agent_count()) {
            throw std::invalid_argument("load_params: expected " + std::to_string(agent_count()) +
                                        " parameter sets, got " + std::to_string(params.size()));
        }
        for (std::size_t i = 0; i < agents_.size(); ++i) agents_[i]->load_snapshot(params[i]);
    }

    // Synchronous federated round: weighted-average every client, then hand
    // the global model back to all of them.
    void federated_round() {
        std::vector<ClientUpdate> updates;
        updates.reserve(agents_.size());
        for (std::size_t i = 0; i < agents_.size(); ++i) {
            updates.push_back({static_cast<int>(i), agents_[i]->snapshot(), agents_[i]->steps_since_sync()});
        }
        const ModelParams global = fed_aggregate(updates);
        for (auto& a : agents_) apply_global(*a, global);
    }

private:
    int agent_count_for(SchemeKind kind, int n) const {
        switch (kind) {
            case SchemeKind::kCentralized: return 1;
            case SchemeKind::kDistributed:
            case SchemeKind::kFederated: return n;
            case SchemeKind::kConstant: return 0;
        }
        return 0;
    }

    Scheme scheme_;
    int num_vehicles_ = 0;
    std::vector<std::unique_ptr<DdqnAgent>> agents_;
};

enum class RunMode { kTrain, kEval };

struct StepSinks {
    StepCsvWriter* steps = nullptr;
    KpiCsvWriter* kpi = nullptr;
    ScoreAccumulator* aggregate = nullptr;  // fed the same stream as the CSV
};

// One episode: per step, build states from the previous measurement window,
// select actions, advance the world, score the outcome and (in training)
// store transitions, run learning updates, and fire federation rounds at
// the sync boundaries.
inline EpisodeSummary run_episode(World& world, Topology& topo, RunMode mode, int episode_idx,
                                  const Configs& cfg, Rng& rng, StepSinks sinks = {}) {
    const auto& sc = cfg.scenario;
    const auto& lc = cfg.learning;
    const int n = sc.num_vehicles;
    const int steps =
        mode == RunMode::kTrain ? lc.train_steps_per_episode : lc.test_steps_per_episode;
    const double eps = mode == RunMode::kTrain ? epsilon_at(episode_idx, lc) : 0.0;
    const bool train = mode == RunMode::kTrain && topo.learning();

    world.reset(rng);
    std::vector<std::vector<double>> prev_state(n, build_state_vector(KpiWindow{}, sc));
    std::vector<CompressionAction> actions(n, CompressionAction::kRaw);
    std::vector<double> q_means(n, 0.0);

    ScoreAccumulator acc;
    double loss_sum = 0;
    std::int64_t loss_count = 0;

    for (int t = 0; t < steps; ++t) {
        for (int v = 0; v < n; ++v) {
            if (topo.learning()) {
                auto choice = topo.agent_for_vehicle(v).select(prev_state[v], eps, rng);
                actions[v] = choice.action;
                // Predicted state value: the greedy Q of the visited state.
                q_means[v] = choice.q[DdqnAgent::argmax_low(choice.q)];
            } else {
                actions[v] = topo.scheme().constant_action;
                q_means[v] = 0.0;
            }
        }

        const auto kpis = world.advance_step(actions, rng);

        for (int v = 0; v < n; ++v) {
            const double sigma_s = qos_score(kpis[v].app_delay_s, sc.max_delay_s);
            const double sigma_e = qoe_score(sc.cd_for(actions[v]), sc.max_cd, lc.penalty);
            const double r = reward(sigma_s, sigma_e, lc.alpha);
            StepScore score{episode_idx, t, v, actions[v], sigma_s, sigma_e, r, q_means[v]};
            acc.add(score);
            if (sinks.aggregate) sinks.aggregate->add(score);
            if (sinks.steps) sinks.steps->write(score);
            if (sinks.kpi) sinks.kpi->write(episode_idx, t, kpis[v]);

            auto next_state = build_state_vector(kpis[v], sc);
            if (train) {
                auto& agent = topo.agent_for_vehicle(v);
                agent.observe(Transition{prev_state[v], action_index(actions[v]), r, next_state,
                                         t == steps - 1});
                if (auto loss = agent.train_step(rng)) {
                    loss_sum += *loss;
                    ++loss_count;
                }
            }
            prev_state[v] = std::move(next_state);
        }

        if (train && topo.scheme().kind == SchemeKind::kFederated &&
            should_sync(world.sim_time_s(), cfg.federation)) {
            topo.federated_round();
        }
    }

    EpisodeSummary summary = acc.summary();
    summary.episode = episode_idx;
    summary.epsilon = eps;
    summary.mean_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
    return summary;
}

inline void write_manifest(const RunPlan& plan) {
    std::filesystem::create_directories(plan.run_dir());
    std::ofstream out(plan.run_dir() / "manifest.cfg");
    if (!out) throw std::runtime_error("cannot write manifest in " + plan.run_dir().string());
    out << "# pqos-sim " << kArtifactVersion << " resolved run configuration\n";
    out << "# run_id: " << plan.run_id << "\n";
    out << "# seed: " << plan.seed << "\n";
    out << serialize_config(plan.cfg);
}

struct TrainResult {
    std::vector<ModelParams> params;   // one per agent
    std::optional<EpisodeSummary> last_episode;
};

inline void write_checkpoints(const Topology& topo, const RunPlan& plan, int episodes_done) {
    for (int a = 0; a < topo.agent_count(); ++a) {
        const auto dir = plan.run_dir() / ("agent_" + std::to_string(a));
        std::filesystem::create_directories(dir);
        save_checkpoint(topo.agent(a).snapshot(),
                        (dir / ("ep" + std::to_string(episodes_done) + ".ckpt")).string());
    }
}

inline TrainResult train(const RunPlan& plan) {
    const auto& cfg = plan.cfg;
    write_manifest(plan);
    Rng rng = Rng::from(plan.seed, kTrainStream);
    Topology topo = Topology::create(cfg, rng);
    World world(cfg.scenario);

    const std::string scheme = scheme_label(cfg.federation.scheme);
    EpisodeCsvWriter episodes((plan.run_dir() / "train_episodes.csv").string(), plan.run_id, scheme,
                              plan.seed, cfg.scenario.num_vehicles);
    std::unique_ptr<StepCsvWriter> step_writer;
    std::unique_ptr<KpiCsvWriter> kpi_writer;
    if (plan.write_train_steps) {
        step_writer = std::make_unique<StepCsvWriter>((plan.run_dir() / "train_steps.csv").string(),
                                                      plan.run_id, scheme, plan.seed,
                                                      cfg.scenario.num_vehicles);
    }
    if (plan.write_kpi_trace) {
        kpi_writer = std::make_unique<KpiCsvWriter>((plan.run_dir() / "train_kpi.csv").string(),
                                                    plan.run_id);
    }

    TrainResult result;
    int last_checkpoint = -1;
    for (int ep = 0; ep < cfg.learning.train_episodes; ++ep) {
        const auto summary = run_episode(world, topo, RunMode::kTrain, ep, cfg, rng,
                                         {step_writer.get(), kpi_writer.get()});
        episodes.write(summary);
        result.last_episode = summary;
        const int done = ep + 1;
        if (plan.checkpoint_interval_episodes > 0 && done % plan.checkpoint_interval_episodes == 0) {
            write_checkpoints(topo, plan, done);
            last_checkpoint = done;
        }
    }
    if (last_checkpoint != cfg.learning.train_episodes) {
        write_checkpoints(topo, plan, cfg.learning.train_episodes);
    }
    result.params = topo.snapshots();
    return result;
}

// Greedy-policy evaluation; no parameter, buffer, or counter changes.
// Returns the aggregate summary over every evaluation step.
inline EpisodeSummary evaluate(const std::vector<ModelParams>& params, const RunPlan& plan) {
    const auto& cfg = plan.cfg;
    std::filesystem::create_directories(plan.run_dir());
    Rng rng = Rng::from(plan.seed, kEvalStream);
    Rng init_rng = Rng::from(plan.seed, kTrainStream);  // shapes only; overwritten by params
    Topology topo = Topology::create(cfg, init_rng);
    if (topo.learning()) topo.load_params(params);
    World world(cfg.scenario);

    const std::string scheme = scheme_label(cfg.federation.scheme);
    StepCsvWriter steps((plan.run_dir() / "eval_steps.csv").string(), plan.run_id, scheme,
                        plan.seed, cfg.scenario.num_vehicles);
    EpisodeCsvWriter episodes((plan.run_dir() / "eval_episodes.csv").string(), plan.run_id, scheme,
                              plan.seed, cfg.scenario.num_vehicles);
    std::unique_ptr<KpiCsvWriter> kpi_writer;
    if (plan.write_kpi_trace) {
        kpi_writer = std::make_unique<KpiCsvWriter>((plan.run_dir() / "eval_kpi.csv").string(),
                                                    plan.run_id);
    }

    ScoreAccumulator total;
    for (int ep = 0; ep < cfg.learning.test_episodes; ++ep) {
        const auto summary = run_episode(world, topo, RunMode::kEval, ep, cfg, rng,
                                         {&steps, kpi_writer.get(), &total});
        episodes.write(summary);
    }
    return total.empty() ? EpisodeSummary{} : total.summary();
}

// Finds the latest checkpoint of every agent under a finished run directory
// (agent_<id>/ep<k>.ckpt with the highest k).
inline std::vector<ModelParams> load_latest_checkpoints(const std::filesystem::path& run_dir) {
    namespace fs = std::filesystem;
    std::vector<std::pair<int, fs::path>> agents;
    if (!fs::is_directory(run_dir)) {
        throw std::runtime_error("run directory not found: " + run_dir.string());
    }
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        const auto name = entry.path().filename().string();
        if (entry.is_directory() && name.starts_with("agent_")) {
            agents.emplace_back(std::stoi(name.substr(6)), entry.path());
        }
    }
    std::sort(agents.begin(), agents.end());
    std::vector<ModelParams> params;
    for (const auto& [id, dir] : agents) {
        int best = -1;
        fs::path best_path;
        for (const auto& f : fs::directory_iterator(dir)) {
            const auto name = f.path().filename().string();
            if (name.starts_with("ep") && name.ends_with(".ckpt")) {
                const int k = std::stoi(name.substr(2, name.size() - 7));
                if (k > best) {
                    best = k;
                    best_path = f.path();
                }
            }
        }
        if (best < 0) throw std::runtime_error("no checkpoint in " + dir.string());
        params.push_back(load_checkpoint(best_path.string()));
    }
    if (params.empty()) throw std::runtime_error("no agent checkpoints under " + run_dir.string());
    return params;
}

enum class SweepAxis { kNumVehicles, kFedSyncInterval, kPenalty, kScheme };

inline std::optional<SweepAxis> parse_sweep_axis(std::string_view name) {
    if (name == "n" || name == "num_vehicles") return SweepAxis::kNumVehicles;
    if (name == "upsilon" || name == "fed_sync_interval_s") return SweepAxis::kFedSyncInterval;
    if (name == "rho" || name == "penalty") return SweepAxis::kPenalty;
    if (name == "scheme") return SweepAxis::kScheme;
    return std::nullopt;
}

inline const char* sweep_axis_key(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::kNumVehicles: return "num_vehicles";
        case SweepAxis::kFedSyncInterval: return "fed_sync_interval_s";
        case SweepAxis::kPenalty: return "penalty";
        case SweepAxis::kScheme: return "scheme";
    }
    return "?";
}

struct SweepRow {
    std::string axis;
    std::string value;
    std::uint64_t seed = 0;
    std::string scheme;
    int num_vehicles = 0;
    EpisodeSummary eval;
};

struct SweepResult {
    std::vector<SweepRow> rows;
};

// Trains and evaluates one run per (axis value, seed) pair, optionally in
// parallel. Runs are independent, each sequential inside, so the combined
// CSV is reproducible regardless of the worker count.
inline SweepResult sweep(SweepAxis axis, const std::vector<std::string>& values,
                         const RunPlan& base, const std::vector<std::uint64_t>& seeds,
                         int jobs = 1) {
    if (values.empty()) throw std::invalid_argument("sweep: empty value list");
    if (seeds.empty()) throw std::invalid_argument("sweep: empty seed list");

    struct Task {
        RunPlan plan;
        std::string value;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (const auto& value : values) {
        for (auto seed : seeds) {
            RunPlan plan = base;
            plan.seed = seed;
            apply_override(plan.cfg, std::string(sweep_axis_key(axis)) + "=" + value);
            validate(plan.cfg);
            std::string tag = value;
            for (auto& ch : tag) {
                if (ch == '(' || ch == ')' || ch == '.') ch = '-';
            }
            plan.run_id = default_run_id(plan.cfg, seed) + "-" + sweep_axis_key(axis) + tag;
            tasks.push_back({std::move(plan), value, seed});
        }
    }

    std::vector<SweepRow> rows(tasks.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::vector<std::string> errors;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            try {
                const auto& task = tasks[i];
                auto trained = train(task.plan);
                const auto eval_summary = evaluate(trained.params, task.plan);
                rows[i] = {sweep_axis_key(axis), task.value, task.seed,
                           scheme_label(task.plan.cfg.federation.scheme),
                           task.plan.cfg.scenario.num_vehicles, eval_summary};
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                errors.push_back(e.what());
            }
        }
    };

    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
    std::vector<std::thread> pool;
    for (int i = 1; i < workers; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (!errors.empty()) throw std::runtime_error("sweep run failed: " + errors.front());

    std::filesystem::create_directories(base.out_dir);
    std::ofstream out(base.out_dir / "sweep.csv");
    if (!out) throw std::runtime_error("cannot write sweep.csv under " + base.out_dir.string());
    out << "axis,value,seed,scheme,n,mean_reward,mean_norm_reward,qos_metric,qoe_metric,"
           "kpi_match_prob,mean_q\n";
    for (const auto& r : rows) {
        out << r.axis << ',' << r.value << ',' << r.seed << ',' << r.scheme << ','
            << r.num_vehicles << ',' << csv_real(r.eval.mean_reward) << ','
            << csv_real(r.eval.mean_norm_reward) << ',' << csv_real(r.eval.qos_metric) << ','
            << csv_real(r.eval.qoe_metric) << ',' << csv_real(r.eval.kpi_match_prob) << ','
            << csv_real(r.eval.mean_q) << '\n';
    }
    return SweepResult{std::move(rows)};
}

}  // namespace pqos
