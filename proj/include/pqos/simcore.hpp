#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pqos/action.hpp"
#include "pqos/config.hpp"
#include "pqos/metrics.hpp"
#include "pqos/perception.hpp"
#include "pqos/radio.hpp"
#include "pqos/rng.hpp"

namespace pqos {

// One LiDAR perception waiting in (or moving through) the uplink queue.
struct Burst {
    int vehicle_id = 0;
    double created_at_s = 0;
    std::int64_t size_bytes = 0;
    CompressionAction action = CompressionAction::kRaw;
    std::int64_t remaining_bytes = 0;
};

struct PduRecord {
    int vehicle_id = 0;
    std::int64_t size_bytes = 0;
    double delay_s = 0;  // delivery time minus creation time of its burst
};

// Per-vehicle, per-step measurement window; the source of the RL state
// vector and of the QoS score. IMSI is kept for routing and logging only.
struct KpiWindow {
    int imsi = 0;
    int mcs = 0;
    std::int64_t ofdm_symbols = 0;
    double avg_sinr_db = 0;
    double pdu_delay_min_s = 0;
    double pdu_delay_max_s = 0;
    double pdu_delay_mean_s = 0;
    double pdu_delay_std_s = 0;
    double pdu_size_min_bytes = 0;
    double pdu_size_max_bytes = 0;
    double pdu_size_mean_bytes = 0;
    double pdu_size_std_bytes = 0;
    std::int64_t tx_pdu_count = 0;
    std::int64_t rx_pdu_count = 0;
    std::int64_t rx_pkt_size_min_bytes = 0;
    std::int64_t rx_pkt_size_max_bytes = 0;
    double app_delay_s = 0;  // delay of the most recently completed burst
};

inline constexpr int kStateDim = 15;

// Feature order: mcs, ofdm_symbols, avg_sinr, pdu delay min/max/mean/std,
// pdu size min/max/mean/std, tx_count, rx_count, rx_pkt min/max. Every
// feature is min-max normalized into [0, 1] by the configured upper bound
// (lower bounds are zero) and clamped.
inline std::vector<double> build_state_vector(const KpiWindow& k, const ScenarioConfig& cfg) {
    auto norm = [](double v, double hi) { return std::clamp(v / hi, 0.0, 1.0); };
    return {
        norm(static_cast<double>(k.mcs), kMcsMax),
        norm(static_cast<double>(k.ofdm_symbols), cfg.norm_ofdm_symbols_max),
        norm(k.avg_sinr_db, cfg.norm_sinr_max_db),
        norm(k.pdu_delay_min_s, cfg.norm_delay_max_s),
        norm(k.pdu_delay_max_s, cfg.norm_delay_max_s),
        norm(k.pdu_delay_mean_s, cfg.norm_delay_max_s),
        norm(k.pdu_delay_std_s, cfg.norm_delay_max_s),
        norm(k.pdu_size_min_bytes, cfg.norm_pdu_size_max_bytes),
        norm(k.pdu_size_max_bytes, cfg.norm_pdu_size_max_bytes),
        norm(k.pdu_size_mean_bytes, cfg.norm_pdu_size_max_bytes),
        norm(k.pdu_size_std_bytes, cfg.norm_pdu_size_max_bytes),
        norm(static_cast<double>(k.tx_pdu_count), cfg.norm_pdu_count_max),
        norm(static_cast<double>(k.rx_pdu_count), cfg.norm_pdu_count_max),
        norm(static_cast<double>(k.rx_pkt_size_min_bytes), cfg.norm_rx_pkt_max_bytes),
        norm(static_cast<double>(k.rx_pkt_size_max_bytes), cfg.norm_rx_pkt_max_bytes),
    };
}

struct VehicleState {
    int id = 0;
    double x = 0, y = 0;
    double waypoint_x = 0, waypoint_y = 0;
    std::deque<Burst> queue;
    CompressionAction current_action = CompressionAction::kRaw;
    std::int64_t enqueued_bytes = 0;
    std::int64_t delivered_bytes = 0;
    std::int64_t dropped_bursts = 0;  // only with max_queue_bursts > 0
    double last_app_delay_s = 0;

    std::int64_t queued_bytes() const {
        std::int64_t total = 0;
        for (const auto& b : queue) total += b.remaining_bytes;
        return total;
    }
    // Bursts rejected at the queue cap never count as enqueued, so this
    // holds with drops enabled too.
    bool conserves_bytes() const { return enqueued_bytes == delivered_bytes + queued_bytes(); }
};

// Discrete-step uplink world: per step it generates perception bursts,
// shares the bandwidth equally among backlogged vehicles, drains FIFO
// queues as a fluid over the step, and aggregates the measurement window.
class World {
public:
    explicit World(const ScenarioConfig& cfg) : cfg_(cfg) {
        vehicles_.resize(cfg.num_vehicles);
        for (int i = 0; i < cfg.num_vehicles; ++i) vehicles_[i].id = i;
    }

    // Fresh episode: new uniform positions and waypoints inside the cell,
    // empty queues, zeroed counters and clock.
    void reset(Rng& rng) {
        sim_time_s_ = 0;
        step_index_ = 0;
        for (auto& v : vehicles_) {
            auto [px, py] = sample_disc(rng);
            v.x = px;
            v.y = py;
            auto [wx, wy] = sample_disc(rng);
            v.waypoint_x = wx;
            v.waypoint_y = wy;
            v.queue.clear();
            v.enqueued_bytes = 0;
            v.delivered_bytes = 0;
            v.last_app_delay_s = 0;
            v.current_action = CompressionAction::kRaw;
        }
    }

    std::vector<KpiWindow> advance_step(const std::vector<CompressionAction>& actions, Rng& rng) {
        if (actions.size() != vehicles_.size()) {
            throw std::invalid_argument("advance_step: one action per vehicle required");
        }
        const double t0 = sim_time_s_;
        const double tau = cfg_.step_duration_s;
        const int per_step = cfg_.perceptions_per_step();

        for (std::size_t i = 0; i < vehicles_.size(); ++i) {
            auto& v = vehicles_[i];
            v.current_action = actions[i];
            for (int j = 0; j < per_step; ++j) {
                std::int64_t size = cfg_.payload_for(actions[i]);
                if (cfg_.burst_size_noise > 0) {
                    const double factor =
                        std::max(0.05, 1.0 + rng.normal(0.0, cfg_.burst_size_noise));
                    size = std::max<std::int64_t>(1, std::llround(size * factor));
                }
                if (cfg_.max_queue_bursts > 0 &&
                    static_cast<int>(v.queue.size()) >= cfg_.max_queue_bursts) {
                    ++v.dropped_bursts;
                    continue;
                }
                v.queue.push_back(Burst{v.id, t0, size, actions[i], size});
                v.enqueued_bytes += size;
            }
        }

        std::vector<LinkBudget> budgets(vehicles_.size());
        for (std::size_t i = 0; i < vehicles_.size(); ++i) {
            const auto& v = vehicles_[i];
            const double shadow =
                cfg_.shadowing_enabled ? rng.normal(0.0, cfg_.shadowing_sigma_db) : 0.0;
            budgets[i] = make_link_budget(std::hypot(v.x, v.y), shadow, cfg_);
        }

        int active = 0;
        for (const auto& v : vehicles_) {
            if (!v.queue.empty()) ++active;
        }

        std::vector<KpiWindow> kpis(vehicles_.size());
        for (std::size_t i = 0; i < vehicles_.size(); ++i) {
            auto& v = vehicles_[i];
            auto& kpi = kpis[i];
            kpi.imsi = v.id;
            kpi.avg_sinr_db = budgets[i].snr_db;
            kpi.mcs = budgets[i].mcs_index;

            std::int64_t sent = 0;
            StatAcc delay_stats, size_stats;
            if (!v.queue.empty()) {
                const std::int64_t cap = step_capacity_bytes(budgets[i], active, cfg_);
                while (sent < cap && !v.queue.empty()) {
                    Burst& b = v.queue.front();
                    const std::int64_t chunk =
                        std::min<std::int64_t>({static_cast<std::int64_t>(cfg_.pdu_max_bytes),
                                                b.remaining_bytes, cap - sent});
                    sent += chunk;
                    b.remaining_bytes -= chunk;
                    v.delivered_bytes += chunk;
                    // Fluid drain: the PDU finishes when its last byte has
                    // used up this vehicle's share of the step.
                    const double t_done =
                        t0 + tau * (static_cast<double>(sent) / static_cast<double>(cap));
                    const double delay = t_done - b.created_at_s;
                    delay_stats.add(delay);
                    size_stats.add(static_cast<double>(chunk));
                    ++kpi.tx_pdu_count;
                    ++kpi.rx_pdu_count;
                    if (b.remaining_bytes == 0) {
                        v.last_app_delay_s = delay;
                        if (kpi.rx_pkt_size_min_bytes == 0 || b.size_bytes < kpi.rx_pkt_size_min_bytes) {
                            kpi.rx_pkt_size_min_bytes = b.size_bytes;
                        }
                        kpi.rx_pkt_size_max_bytes = std::max(kpi.rx_pkt_size_max_bytes, b.size_bytes);
                        v.queue.pop_front();
                    }
                }
            }
            kpi.ofdm_symbols = ofdm_symbols_proxy(sent, budgets[i].spectral_eff_bits_per_hz);
            delay_stats.fill(kpi.pdu_delay_min_s, kpi.pdu_delay_max_s, kpi.pdu_delay_mean_s,
                             kpi.pdu_delay_std_s);
            size_stats.fill(kpi.pdu_size_min_bytes, kpi.pdu_size_max_bytes, kpi.pdu_size_mean_bytes,
                            kpi.pdu_size_std_bytes);

            // App-layer delay: most recently completed burst, carried
            // forward on idle steps. A burst stuck in the queue beyond the
            // cap counts with its age, so the QoS score can exceed 1 even
            // when nothing completes.
            double app_delay = v.last_app_delay_s;
            if (!v.queue.empty()) {
                const double age = (t0 + tau) - v.queue.front().created_at_s;
                if (age > cfg_.queue_delay_cap_s) app_delay = std::max(app_delay, age);
            }
            kpi.app_delay_s = app_delay;
        }

        for (auto& v : vehicles_) move_vehicle(v, rng);
        sim_time_s_ = t0 + tau;
        ++step_index_;
        return kpis;
    }

    double sim_time_s() const { return sim_time_s_; }
    std::int64_t step_index() const { return step_index_; }
    const std::vector<VehicleState>& vehicles() const { return vehicles_; }
    const ScenarioConfig& config() const { return cfg_; }

    // Test hook: pin a vehicle to a fixed spot (waypoint too, so it stays).
    void set_vehicle_position(int id, double x, double y) {
        auto& v = vehicles_.at(id);
        v.x = x;
        v.y = y;
        v.waypoint_x = x;
        v.waypoint_y = y;
    }

private:
    struct StatAcc {
        std::int64_t count = 0;
        double min = 0, max = 0, sum = 0, sumsq = 0;
        void add(double x) {
            if (count == 0) {
                min = max = x;
            } else {
                min = std::min(min, x);
                max = std::max(max, x);
            }
            ++count;
            sum += x;
            sumsq += x * x;
        }
        void fill(double& out_min, double& out_max, double& out_mean, double& out_std) const {
            if (count == 0) return;
            out_min = min;
            out_max = max;
            out_mean = sum / static_cast<double>(count);
            out_std = std::sqrt(std::max(0.0, sumsq / static_cast<double>(count) - out_mean * out_mean));
        }
    };

    std::pair<double, double> sample_disc(Rng& rng) {
        const double r = cfg_.cell_radius_m * std::sqrt(rng.uniform());
        const double theta = 2.0 * 3.141592653589793 * rng.uniform();
        return {r * std::cos(theta), r * std::sin(theta)};
    }

    // Random waypoint: head to the target at constant speed, draw the next
    // target on arrival.
    void move_vehicle(VehicleState& v, Rng& rng) {
        double remaining = cfg_.mobility_speed_mps * cfg_.step_duration_s;
        for (int guard = 0; guard < 16 && remaining > 0; ++guard) {
            const double dx = v.waypoint_x - v.x;
            const double dy = v.waypoint_y - v.y;
            const double dist = std::hypot(dx, dy);
            if (dist <= remaining) {
                v.x = v.waypoint_x;
                v.y = v.waypoint_y;
                remaining -= dist;
                auto [wx, wy] = sample_disc(rng);
                v.waypoint_x = wx;
                v.waypoint_y = wy;
            } else {
                v.x += dx / dist * remaining;
                v.y += dy / dist * remaining;
                remaining = 0;
            }
        }
    }

    ScenarioConfig cfg_;
    std::vector<VehicleState> vehicles_;
    double sim_time_s_ = 0;
    std::int64_t step_index_ = 0;
};

// Optional per-step KPI trace (one row per vehicle per step).
class KpiCsvWriter {
public:
    KpiCsvWriter(const std::string& path, std::string run_id)
        : out_(path), run_id_(std::move(run_id)) {
        if (!out_) throw std::runtime_error("cannot open CSV for writing: " + path);
        out_ << "run_id,episode,step,vehicle,mcs,ofdm_symbols,avg_sinr_db,"
                "pdu_delay_min_s,pdu_delay_max_s,pdu_delay_mean_s,pdu_delay_std_s,"
                "pdu_size_min,pdu_size_max,pdu_size_mean,pdu_size_std,"
                "tx_pdu_count,rx_pdu_count,rx_pkt_size_min,rx_pkt_size_max,app_delay_s\n";
    }

    void write(int episode, int step, const KpiWindow& k) {
        out_ << run_id_ << ',' << episode << ',' << step << ',' << k.imsi << ',' << k.mcs << ','
             << k.ofdm_symbols << ',' << csv_real(k.avg_sinr_db) << ','
             << csv_real(k.pdu_delay_min_s) << ',' << csv_real(k.pdu_delay_max_s) << ','
             << csv_real(k.pdu_delay_mean_s) << ',' << csv_real(k.pdu_delay_std_s) << ','
             << csv_real(k.pdu_size_min_bytes) << ',' << csv_real(k.pdu_size_max_bytes) << ','
             << csv_real(k.pdu_size_mean_bytes) << ',' << csv_real(k.pdu_size_std_bytes) << ','
             << k.tx_pdu_count << ',' << k.rx_pdu_count << ',' << k.rx_pkt_size_min_bytes << ','
             << k.rx_pkt_size_max_bytes << ',' << csv_real(k.app_delay_s) << '\n';
    }

private:
    std::ofstream out_;
    std::string run_id_;
};

}  // namespace pqos
