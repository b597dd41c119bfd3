#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pqos/config.hpp"
#include "pqos/model_params.hpp"
#include "pqos/rl.hpp"

namespace pqos {

struct ClientUpdate {
    int vehicle_id = 0;
    ModelParams params;
    std::int64_t local_learn_steps = 0;  // since the last sync round
};

inline constexpr const char* kClientUpdateMagic = "pqosupd v1";

// On-disk client update (for the optional federation overhead log): one
// header line with the vehicle id and step count, then the parameters in
// the checkpoint byte format.
inline void save_client_update(const ClientUpdate& u, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write client update: " + path);
    out << kClientUpdateMagic << ' ' << u.vehicle_id << ' ' << u.local_learn_steps << '\n';
    out << kCheckpointMagic;
    for (int d : u.params.dims) out << ' ' << d;
    out << '\n';
    for (double v : u.params.values) detail::write_le_double(out, v);
    if (!out) throw std::runtime_error("client update write failed: " + path);
}

inline ClientUpdate load_client_update(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read client update: " + path);
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::string magic_a, magic_b;
    ClientUpdate u;
    hs >> magic_a >> magic_b >> u.vehicle_id >> u.local_learn_steps;
    if (magic_a + " " + magic_b != kClientUpdateMagic || !hs) {
        throw std::runtime_error("not a client update file: " + path);
    }
    std::string ckpt_header;
    std::getline(in, ckpt_header);
    std::istringstream cs(ckpt_header);
    cs >> magic_a >> magic_b;
    if (magic_a + " " + magic_b != kCheckpointMagic) {
        throw std::runtime_error("client update missing parameter block: " + path);
    }
    int d;
    while (cs >> d) u.params.dims.push_back(d);
    if (u.params.dims.size() < 2) throw std::runtime_error("client update lists no layers: " + path);
    std::size_t total = 0;
    for (std::size_t i = 0; i + 1 < u.params.dims.size(); ++i) {
        total += static_cast<std::size_t>(u.params.dims[i]) * u.params.dims[i + 1] +
                 u.params.dims[i + 1];
    }
    for (std::size_t i = 0; i < total; ++i) u.params.values.push_back(detail::read_le_double(in));
    return u;
}

// Weighted elementwise average with weights proportional to each client's
// local learning steps. When nobody trained since the last round the
// weights fall back to uniform.
inline ModelParams fed_aggregate(const std::vector<ClientUpdate>& updates) {
    if (updates.empty()) throw std::invalid_argument("fed_aggregate: no client updates");
    for (const auto& u : updates) {
        if (!u.params.same_shape(updates.front().params)) {
            throw std::invalid_argument("fed_aggregate: client parameter shapes differ");
        }
        if (u.local_learn_steps < 0) throw std::invalid_argument("fed_aggregate: negative step count");
    }
    if (updates.size() == 1) return updates.front().params;

    double total_steps = 0;
    for (const auto& u : updates) total_steps += static_cast<double>(u.local_learn_steps);

    ModelParams out;
    out.dims = updates.front().params.dims;
    out.values.assign(updates.front().params.values.size(), 0.0);
    for (const auto& u : updates) {
        const double w = total_steps > 0
                             ? static_cast<double>(u.local_learn_steps) / total_steps
                             : 1.0 / static_cast<double>(updates.size());
        const auto& v = u.params.values;
        for (std::size_t i = 0; i < v.size(); ++i) out.values[i] += w * v[i];
    }
    return out;
}

// True exactly at positive multiples of the sync interval. Simulation time
// advances in step_duration increments, so a small absolute tolerance
// absorbs the accumulated floating-point drift.
inline bool should_sync(double sim_time_s, const FederationConfig& fc) {
    const long long k = std::llround(sim_time_s / fc.fed_sync_interval_s);
    return k >= 1 && std::abs(sim_time_s - static_cast<double>(k) * fc.fed_sync_interval_s) <= 1e-9;
}

inline void apply_global(DdqnAgent& agent, const ModelParams& global) {
    agent.adopt_global(global);
}

}  // namespace pqos
