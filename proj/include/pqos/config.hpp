#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pqos/action.hpp"

namespace pqos {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Radio scenario and application parameters. Defaults reproduce the single
// gNB, 3.5 GHz / 50 MHz uplink with three LiDAR compression profiles.
struct ScenarioConfig {
    double carrier_freq_hz = 3.5e9;
    double bandwidth_hz = 50e6;
    double tx_power_dbm = 23.0;
    int num_vehicles = 1;
    double max_delay_s = 0.05;      // QoS budget for one perception end to end
    double max_cd = 45.0;           // tolerated Chamfer Distance
    double perception_rate_hz = 10.0;
    // Per-action burst sizes (bytes) and Chamfer Distances, indexed by
    // CompressionAction. Sizes must be strictly decreasing, distortions
    // strictly increasing.
    std::array<std::int64_t, kActionCount> payload_bytes = {200000, 104000, 17000};
    std::array<double, kActionCount> action_cd = {4.4e-5, 5.4769, 35.635};
    double cell_radius_m = 500.0;
    double pathloss_exponent = 3.0;
    double pathloss_ref_db = 43.3;  // 1 m free-space loss at 3.5 GHz
    double noise_figure_db = 5.0;
    double se_max_bits_per_hz = 7.4;
    double step_duration_s = 0.1;
    double mobility_speed_mps = 10.0;

    bool shadowing_enabled = true;
    double shadowing_sigma_db = 4.0;
    int pdu_max_bytes = 1500;
    double queue_delay_cap_s = 1.0;  // queued burst older than this counts as late
    double burst_size_noise = 0.0;   // multiplicative stddev on burst size, 0 = off
    int max_queue_bursts = 0;        // drop new bursts beyond this depth, 0 = never

    // Upper bounds for min-max state normalization; lower bounds are all 0.
    double norm_sinr_max_db = 60.0;
    double norm_ofdm_symbols_max = 30000.0;
    double norm_delay_max_s = 1.0;
    double norm_pdu_size_max_bytes = 1500.0;
    double norm_pdu_count_max = 4096.0;
    double norm_rx_pkt_max_bytes = 400000.0;

    int perceptions_per_step() const {
        return static_cast<int>(std::llround(step_duration_s * perception_rate_hz));
    }
    std::int64_t payload_for(CompressionAction a) const { return payload_bytes[action_index(a)]; }
    double cd_for(CompressionAction a) const { return action_cd[action_index(a)]; }
};

struct LearningConfig {
    std::vector<int> hidden_dims = {16, 64};
    double discount = 0.95;
    int replay_capacity_transitions = 80000;
    int batch_size = 32;
    double learning_rate = 1e-5;
    int target_sync_interval_steps = 8000;
    double epsilon_start = 0.99;
    double epsilon_end = 0.01;
    double epsilon_decay_fraction = 0.8;  // fraction of training episodes spent decaying
    double alpha = 0.5;                   // QoE weight in the reward
    double penalty = 30.0;                // rho in the QoE score denominator
    int train_episodes = 3000;
    int train_steps_per_episode = 80;
    int test_episodes = 100;
    int test_steps_per_episode = 800;
};

enum class SchemeKind {
    kCentralized,  // one shared agent fed by every vehicle
    kDistributed,  // one agent per vehicle, no exchange
    kFederated,    // one agent per vehicle + periodic weighted averaging
    kConstant,     // fixed action, no learning
};

struct Scheme {
    SchemeKind kind = SchemeKind::kFederated;
    CompressionAction constant_action = CompressionAction::kRaw;

    bool operator==(const Scheme&) const = default;
};

inline std::string scheme_label(const Scheme& s) {
    switch (s.kind) {
        case SchemeKind::kCentralized: return "centralized";
        case SchemeKind::kDistributed: return "distributed";
        case SchemeKind::kFederated: return "federated";
        case SchemeKind::kConstant:
            return "constant(" + std::string(action_label(s.constant_action)) + ")";
    }
    return "?";
}

inline std::optional<Scheme> parse_scheme(std::string_view text) {
    if (text == "centralized") return Scheme{SchemeKind::kCentralized, CompressionAction::kRaw};
    if (text == "distributed") return Scheme{SchemeKind::kDistributed, CompressionAction::kRaw};
    if (text == "federated") return Scheme{SchemeKind::kFederated, CompressionAction::kRaw};
    if (text.starts_with("constant(") && text.ends_with(")")) {
        auto inner = text.substr(9, text.size() - 10);
        if (auto a = parse_action(inner)) return Scheme{SchemeKind::kConstant, *a};
    }
    return std::nullopt;
}

struct FederationConfig {
    Scheme scheme;
    double fed_sync_interval_s = 0.1;  // must be a multiple of step_duration_s
    std::string weight_mode = "steps"; // weights proportional to local learning steps

    // Sync instants are positive multiples of the interval within an episode.
    int sync_every_steps(double step_duration_s) const {
        return static_cast<int>(std::llround(fed_sync_interval_s / step_duration_s));
    }
};

struct Configs {
    ScenarioConfig scenario;
    LearningConfig learning;
    FederationConfig federation;
    std::vector<std::string> warnings;  // unknown keys seen while loading
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline double parse_double(const std::string& key, std::string_view v) {
    try {
        size_t pos = 0;
        const double d = std::stod(std::string(v), &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not a number: '" + std::string(v) + "'");
    }
}

inline int parse_int(const std::string& key, std::string_view v) {
    try {
        size_t pos = 0;
        const long long n = std::stoll(std::string(v), &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return static_cast<int>(n);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not an integer: '" + std::string(v) + "'");
    }
}

inline std::int64_t parse_i64(const std::string& key, std::string_view v) {
    // Accept scientific notation for byte counts (e.g. 2e5).
    const double d = parse_double(key, v);
    return static_cast<std::int64_t>(std::llround(d));
}

inline bool parse_bool(const std::string& key, std::string_view v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError("config key '" + key + "': not a boolean: '" + std::string(v) + "'");
}

inline std::vector<int> parse_dims(const std::string& key, std::string_view v) {
    std::vector<int> dims;
    std::string elem;
    std::stringstream ss{std::string(v)};
    while (std::getline(ss, elem, ',')) {
        dims.push_back(parse_int(key, trim(elem)));
    }
    if (dims.empty()) throw ConfigError("config key '" + key + "': empty dimension list");
    return dims;
}

inline std::string fmt_double(double d) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
}

inline std::string fmt_dims(const std::vector<int>& dims) {
    std::string out;
    for (size_t i = 0; i < dims.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(dims[i]);
    }
    return out;
}

struct KeyEntry {
    const char* key;
    std::function<void(Configs&, const std::string&)> set;
    std::function<std::string(const Configs&)> get;
};

inline const std::vector<KeyEntry>& key_table() {
    static const std::vector<KeyEntry> table = [] {
        std::vector<KeyEntry> t;
        auto add_double = [&t](const char* key, auto accessor) {
            t.push_back({key,
                         [key, accessor](Configs& c, const std::string& v) { accessor(c) = parse_double(key, v); },
                         [accessor](const Configs& c) { return fmt_double(accessor(const_cast<Configs&>(c))); }});
        };
        auto add_int = [&t](const char* key, auto accessor) {
            t.push_back({key,
                         [key, accessor](Configs& c, const std::string& v) { accessor(c) = parse_int(key, v); },
                         [accessor](const Configs& c) { return std::to_string(accessor(const_cast<Configs&>(c))); }});
        };
        auto add_i64 = [&t](const char* key, auto accessor) {
            t.push_back({key,
                         [key, accessor](Configs& c, const std::string& v) { accessor(c) = parse_i64(key, v); },
                         [accessor](const Configs& c) { return std::to_string(accessor(const_cast<Configs&>(c))); }});
        };
        auto add_bool = [&t](const char* key, auto accessor) {
            t.push_back({key,
                         [key, accessor](Configs& c, const std::string& v) { accessor(c) = parse_bool(key, v); },
                         [accessor](const Configs& c) { return accessor(const_cast<Configs&>(c)) ? "true" : "false"; }});
        };

        add_double("carrier_freq_hz", [](Configs& c) -> double& { return c.scenario.carrier_freq_hz; });
        add_double("bandwidth_hz", [](Configs& c) -> double& { return c.scenario.bandwidth_hz; });
        add_double("tx_power_dbm", [](Configs& c) -> double& { return c.scenario.tx_power_dbm; });
        add_int("num_vehicles", [](Configs& c) -> int& { return c.scenario.num_vehicles; });
        add_double("max_delay_s", [](Configs& c) -> double& { return c.scenario.max_delay_s; });
        add_double("max_cd", [](Configs& c) -> double& { return c.scenario.max_cd; });
        add_double("perception_rate_hz", [](Configs& c) -> double& { return c.scenario.perception_rate_hz; });
        add_i64("payload_bytes_cr", [](Configs& c) -> std::int64_t& { return c.scenario.payload_bytes[0]; });
        add_i64("payload_bytes_csc", [](Configs& c) -> std::int64_t& { return c.scenario.payload_bytes[1]; });
        add_i64("payload_bytes_csa", [](Configs& c) -> std::int64_t& { return c.scenario.payload_bytes[2]; });
        add_double("cd_cr", [](Configs& c) -> double& { return c.scenario.action_cd[0]; });
        add_double("cd_csc", [](Configs& c) -> double& { return c.scenario.action_cd[1]; });
        add_double("cd_csa", [](Configs& c) -> double& { return c.scenario.action_cd[2]; });
        add_double("cell_radius_m", [](Configs& c) -> double& { return c.scenario.cell_radius_m; });
        add_double("pathloss_exponent", [](Configs& c) -> double& { return c.scenario.pathloss_exponent; });
        add_double("pathloss_ref_db", [](Configs& c) -> double& { return c.scenario.pathloss_ref_db; });
        add_double("noise_figure_db", [](Configs& c) -> double& { return c.scenario.noise_figure_db; });
        add_double("se_max_bits_per_hz", [](Configs& c) -> double& { return c.scenario.se_max_bits_per_hz; });
        add_double("step_duration_s", [](Configs& c) -> double& { return c.scenario.step_duration_s; });
        add_double("mobility_speed_mps", [](Configs& c) -> double& { return c.scenario.mobility_speed_mps; });
        add_bool("shadowing_enabled", [](Configs& c) -> bool& { return c.scenario.shadowing_enabled; });
        add_double("shadowing_sigma_db", [](Configs& c) -> double& { return c.scenario.shadowing_sigma_db; });
        add_int("pdu_max_bytes", [](Configs& c) -> int& { return c.scenario.pdu_max_bytes; });
        add_double("queue_delay_cap_s", [](Configs& c) -> double& { return c.scenario.queue_delay_cap_s; });
        add_double("burst_size_noise", [](Configs& c) -> double& { return c.scenario.burst_size_noise; });
        add_int("max_queue_bursts", [](Configs& c) -> int& { return c.scenario.max_queue_bursts; });
        add_double("norm_sinr_max_db", [](Configs& c) -> double& { return c.scenario.norm_sinr_max_db; });
        add_double("norm_ofdm_symbols_max", [](Configs& c) -> double& { return c.scenario.norm_ofdm_symbols_max; });
        add_double("norm_delay_max_s", [](Configs& c) -> double& { return c.scenario.norm_delay_max_s; });
        add_double("norm_pdu_size_max_bytes", [](Configs& c) -> double& { return c.scenario.norm_pdu_size_max_bytes; });
        add_double("norm_pdu_count_max", [](Configs& c) -> double& { return c.scenario.norm_pdu_count_max; });
        add_double("norm_rx_pkt_max_bytes", [](Configs& c) -> double& { return c.scenario.norm_rx_pkt_max_bytes; });

        t.push_back({"hidden_dims",
                     [](Configs& c, const std::string& v) { c.learning.hidden_dims = parse_dims("hidden_dims", v); },
                     [](const Configs& c) { return fmt_dims(c.learning.hidden_dims); }});
        add_double("discount", [](Configs& c) -> double& { return c.learning.discount; });
        add_int("replay_capacity_transitions", [](Configs& c) -> int& { return c.learning.replay_capacity_transitions; });
        add_int("batch_size", [](Configs& c) -> int& { return c.learning.batch_size; });
        add_double("learning_rate", [](Configs& c) -> double& { return c.learning.learning_rate; });
        add_int("target_sync_interval_steps", [](Configs& c) -> int& { return c.learning.target_sync_interval_steps; });
        add_double("epsilon_start", [](Configs& c) -> double& { return c.learning.epsilon_start; });
        add_double("epsilon_end", [](Configs& c) -> double& { return c.learning.epsilon_end; });
        add_double("epsilon_decay_fraction", [](Configs& c) -> double& { return c.learning.epsilon_decay_fraction; });
        add_double("alpha", [](Configs& c) -> double& { return c.learning.alpha; });
        add_double("penalty", [](Configs& c) -> double& { return c.learning.penalty; });
        add_int("train_episodes", [](Configs& c) -> int& { return c.learning.train_episodes; });
        add_int("train_steps_per_episode", [](Configs& c) -> int& { return c.learning.train_steps_per_episode; });
        add_int("test_episodes", [](Configs& c) -> int& { return c.learning.test_episodes; });
        add_int("test_steps_per_episode", [](Configs& c) -> int& { return c.learning.test_steps_per_episode; });

        t.push_back({"scheme",
                     [](Configs& c, const std::string& v) {
                         auto s = parse_scheme(v);
                         if (!s) throw ConfigError("config key 'scheme': unknown scheme '" + v + "'");
                         c.federation.scheme = *s;
                     },
                     [](const Configs& c) { return scheme_label(c.federation.scheme); }});
        add_double("fed_sync_interval_s", [](Configs& c) -> double& { return c.federation.fed_sync_interval_s; });
        t.push_back({"weight_mode",
                     [](Configs& c, const std::string& v) {
                         if (v != "steps") throw ConfigError("config key 'weight_mode': unknown mode '" + v + "'");
                         c.federation.weight_mode = v;
                     },
                     [](const Configs& c) { return c.federation.weight_mode; }});
        return t;
    }();
    return table;
}

inline const KeyEntry* find_key(std::string_view key) {
    for (const auto& e : key_table()) {
        if (key == e.key) return &e;
    }
    return nullptr;
}

}  // namespace detail

// Throws ConfigError naming the first violated key.
inline void validate(const Configs& c) {
    const auto& s = c.scenario;
    const auto& l = c.learning;
    const auto& f = c.federation;
    auto fail = [](const std::string& key, const std::string& why) {
        throw ConfigError("config key '" + key + "': " + why);
    };

    if (!(s.bandwidth_hz > 0)) fail("bandwidth_hz", "must be > 0");
    if (s.num_vehicles < 1) fail("num_vehicles", "must be >= 1");
    if (!(s.max_delay_s > 0)) fail("max_delay_s", "must be > 0");
    if (!(s.max_cd > 0)) fail("max_cd", "must be > 0");
    if (s.perception_rate_hz < 0) fail("perception_rate_hz", "must be >= 0");
    if (!(s.payload_bytes[0] > s.payload_bytes[1] && s.payload_bytes[1] > s.payload_bytes[2]))
        fail("payload_bytes_cr", "payload sizes must be strictly ordered C-R > C-SC > C-SA");
    if (s.payload_bytes[2] <= 0) fail("payload_bytes_csa", "must be > 0");
    if (!(s.action_cd[0] < s.action_cd[1] && s.action_cd[1] < s.action_cd[2]))
        fail("cd_cr", "per-action CD must be strictly ordered C-R < C-SC < C-SA");
    if (s.action_cd[0] < 0) fail("cd_cr", "must be >= 0");
    if (!(s.step_duration_s > 0)) fail("step_duration_s", "must be > 0");
    const double per_step = s.step_duration_s * s.perception_rate_hz;
    if (std::abs(per_step - std::llround(per_step)) > 1e-9)
        fail("perception_rate_hz", "step_duration_s * perception_rate_hz must be an integer");
    if (!(s.cell_radius_m > 0)) fail("cell_radius_m", "must be > 0");
    if (!(s.pathloss_exponent > 0)) fail("pathloss_exponent", "must be > 0");
    if (!(s.se_max_bits_per_hz > 0)) fail("se_max_bits_per_hz", "must be > 0");
    if (s.mobility_speed_mps < 0) fail("mobility_speed_mps", "must be >= 0");
    if (s.shadowing_sigma_db < 0) fail("shadowing_sigma_db", "must be >= 0");
    if (s.pdu_max_bytes < 1) fail("pdu_max_bytes", "must be >= 1");
    if (!(s.queue_delay_cap_s > 0)) fail("queue_delay_cap_s", "must be > 0");
    if (s.burst_size_noise < 0) fail("burst_size_noise", "must be >= 0");
    if (s.max_queue_bursts < 0) fail("max_queue_bursts", "must be >= 0");
    if (!(s.norm_sinr_max_db > 0)) fail("norm_sinr_max_db", "must be > 0");
    if (!(s.norm_delay_max_s > 0)) fail("norm_delay_max_s", "must be > 0");

    if (!(l.discount >= 0 && l.discount < 1)) fail("discount", "must satisfy 0 <= gamma < 1");
    if (!(l.alpha >= 0 && l.alpha <= 1)) fail("alpha", "must be in [0, 1]");
    if (l.penalty < 0) fail("penalty", "must be >= 0");
    if (!(l.epsilon_end >= 0 && l.epsilon_end <= l.epsilon_start && l.epsilon_start <= 1))
        fail("epsilon_start", "must satisfy 0 <= epsilon_end <= epsilon_start <= 1");
    if (!(l.epsilon_decay_fraction >= 0 && l.epsilon_decay_fraction <= 1))
        fail("epsilon_decay_fraction", "must be in [0, 1]");
    if (l.replay_capacity_transitions < 1) fail("replay_capacity_transitions", "must be >= 1");
    if (l.batch_size < 1) fail("batch_size", "must be >= 1");
    if (l.batch_size > l.replay_capacity_transitions)
        fail("batch_size", "must be <= replay_capacity_transitions");
    if (l.learning_rate < 0) fail("learning_rate", "must be >= 0");
    if (l.target_sync_interval_steps < 1) fail("target_sync_interval_steps", "must be >= 1");
    if (l.hidden_dims.empty()) fail("hidden_dims", "must list at least one hidden layer");
    for (int d : l.hidden_dims)
        if (d < 1) fail("hidden_dims", "all hidden dimensions must be >= 1");
    if (l.train_episodes < 0) fail("train_episodes", "must be >= 0");
    if (l.train_steps_per_episode < 1) fail("train_steps_per_episode", "must be >= 1");
    if (l.test_episodes < 0) fail("test_episodes", "must be >= 0");
    if (l.test_steps_per_episode < 1) fail("test_steps_per_episode", "must be >= 1");

    if (!(f.fed_sync_interval_s > 0)) fail("fed_sync_interval_s", "must be > 0");
    const double ratio = f.fed_sync_interval_s / s.step_duration_s;
    if (std::abs(ratio - std::llround(ratio)) > 1e-9 || std::llround(ratio) < 1)
        fail("fed_sync_interval_s", "must be a positive multiple of step_duration_s");
}

// Applies one "key = value" assignment. Unknown keys are reported through the
// warnings list rather than rejected.
inline void apply_assignment(Configs& c, std::string_view key, std::string_view value) {
    const auto* entry = detail::find_key(key);
    if (!entry) {
        c.warnings.push_back("unknown config key '" + std::string(key) + "' ignored");
        return;
    }
    entry->set(c, std::string(value));
}

inline Configs parse_config_text(const std::string& text) {
    Configs c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto trimmed = detail::trim(line);
        if (trimmed.empty()) continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value', got '" +
                              std::string(trimmed) + "'");
        }
        const auto key = detail::trim(trimmed.substr(0, eq));
        const auto value = detail::trim(trimmed.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        apply_assignment(c, key, value);
    }
    validate(c);
    return c;
}

inline Configs load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

// Canonical key = value rendering; loading it back reproduces every field.
inline std::string serialize_config(const Configs& c) {
    std::string out;
    for (const auto& e : detail::key_table()) {
        out += e.key;
        out += " = ";
        out += e.get(c);
        out += '\n';
    }
    return out;
}

// "--set key=value" style override, applied after file parsing.
inline void apply_override(Configs& c, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("override must look like key=value, got '" + assignment + "'");
    }
    const auto key = detail::trim(std::string_view(assignment).substr(0, eq));
    const auto value = detail::trim(std::string_view(assignment).substr(eq + 1));
    const auto* entry = detail::find_key(key);
    if (!entry) throw ConfigError("unknown config key '" + std::string(key) + "' in override");
    entry->set(c, std::string(value));
}

}  // namespace pqos
