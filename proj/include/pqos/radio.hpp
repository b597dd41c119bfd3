#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "pqos/config.hpp"

namespace pqos {

// Per-vehicle uplink snapshot for one step. A single cell with equal
// bandwidth sharing stands in for the full protocol stack, so SINR == SNR.
struct LinkBudget {
    double distance_m = 0;
    double pathloss_db = 0;
    double snr_db = 0;
    int mcs_index = 0;  // 0..28
    double spectral_eff_bits_per_hz = 0;
    std::int64_t ofdm_symbols_used = 0;  // filled by the simulator after draining
};

// Log-distance model anchored at 1 m; distances below the reference are
// clamped rather than rejected.
inline double pathloss_db(double distance_m, const ScenarioConfig& cfg) {
    const double d = std::max(distance_m, 1.0);
    return cfg.pathloss_ref_db + 10.0 * cfg.pathloss_exponent * std::log10(d);
}

inline double noise_floor_dbm(const ScenarioConfig& cfg) {
    return -174.0 + 10.0 * std::log10(cfg.bandwidth_hz) + cfg.noise_figure_db;
}

inline double snr_db(double pathloss, const ScenarioConfig& cfg) {
    return cfg.tx_power_dbm - pathloss - noise_floor_dbm(cfg);
}

// Attenuated Shannon link adaptation, floored so the link never fully
// stalls and capped at the configured top modulation efficiency.
inline constexpr double kShannonAttenuation = 0.75;
inline constexpr double kSpectralEffFloor = 0.01;
inline constexpr int kMcsMax = 28;

struct LinkAdaptation {
    double spectral_eff_bits_per_hz = 0;
    int mcs_index = 0;
};

inline LinkAdaptation spectral_efficiency(double snr, const ScenarioConfig& cfg) {
    const double linear = std::pow(10.0, snr / 10.0);
    double se = kShannonAttenuation * std::log2(1.0 + linear);
    se = std::clamp(se, kSpectralEffFloor, cfg.se_max_bits_per_hz);
    const int mcs = static_cast<int>(std::lround(kMcsMax * se / cfg.se_max_bits_per_hz));
    return {se, mcs};
}

inline LinkBudget make_link_budget(double distance_m, double shadowing_db, const ScenarioConfig& cfg) {
    LinkBudget b;
    b.distance_m = distance_m;
    b.pathloss_db = std::max(pathloss_db(distance_m, cfg) + shadowing_db, cfg.pathloss_ref_db);
    b.snr_db = snr_db(b.pathloss_db, cfg);
    const auto la = spectral_efficiency(b.snr_db, cfg);
    b.spectral_eff_bits_per_hz = la.spectral_eff_bits_per_hz;
    b.mcs_index = la.mcs_index;
    return b;
}

// Bytes one vehicle can push in a step when the bandwidth is split equally
// among all vehicles with queued data.
inline std::int64_t step_capacity_bytes(const LinkBudget& budget, int active_count,
                                        const ScenarioConfig& cfg) {
    const double share_hz = cfg.bandwidth_hz / static_cast<double>(active_count);
    const double bits = share_hz * budget.spectral_eff_bits_per_hz * cfg.step_duration_s;
    return static_cast<std::int64_t>(bits / 8.0);
}

// Proxy for the number of OFDM symbols a transmission occupied (12
// subcarriers x 14 symbols per resource block).
inline std::int64_t ofdm_symbols_proxy(std::int64_t bytes_sent, double spectral_eff) {
    if (bytes_sent <= 0) return 0;
    return static_cast<std::int64_t>(std::ceil(static_cast<double>(bytes_sent) * 8.0 /
                                               (spectral_eff * 12.0 * 14.0)));
}

}  // namespace pqos
