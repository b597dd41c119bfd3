#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pqos/action.hpp"

namespace pqos {

// QoS score: end-to-end application delay normalized by the tolerated delay.
// Values above 1 mean the KPI was violated; deliberately not clamped so the
// reward can see the violation.
inline double qos_score(double delay_s, double max_delay_s) {
    if (!(max_delay_s > 0)) throw std::invalid_argument("qos_score: max_delay_s must be > 0");
    if (delay_s < 0) throw std::invalid_argument("qos_score: delay must be >= 0");
    return delay_s / max_delay_s;
}

// QoE score: Chamfer Distance normalized by the tolerated distortion plus
// the penalty term. Higher means worse perceptual quality.
inline double qoe_score(double cd, double max_cd, double penalty) {
    if (!(max_cd + penalty > 0)) throw std::invalid_argument("qoe_score: max_cd + penalty must be > 0");
    if (cd < 0) throw std::invalid_argument("qoe_score: cd must be >= 0");
    return cd / (max_cd + penalty);
}

// Step reward in [-1, 1]: hard -1 on a QoS violation, otherwise a linear
// trade-off weighted by alpha. The QoE score is clamped to [0, 1] first so
// the range holds even when cd exceeds max_cd + penalty.
inline double reward(double sigma_s, double sigma_e, double alpha) {
    if (sigma_s > 1.0) return -1.0;
    const double e = std::clamp(sigma_e, 0.0, 1.0);
    return 1.0 - 2.0 * alpha * e - 2.0 * (1.0 - alpha) * sigma_s;
}

inline double normalize_reward(double r) { return (r + 1.0) / 2.0; }

struct StepScore {
    int episode = 0;
    int step = 0;
    int vehicle = 0;
    CompressionAction action = CompressionAction::kRaw;
    double sigma_s = 0;
    double sigma_e = 0;
    double reward = 0;
    double q_mean = 0;  // mean Q-value of the state the action was taken in
};

struct EpisodeSummary {
    int episode = 0;
    std::int64_t steps = 0;          // vehicle-steps aggregated
    double mean_reward = 0;
    double mean_norm_reward = 0;
    double qos_metric = 0;           // 1 - E[min(sigma_s, 1)], 1 is best
    double qoe_metric = 0;           // 1 - E[min(sigma_e, 1)], 1 is best
    double kpi_match_prob = 0;       // fraction of steps with sigma_s <= 1
    double mean_q = 0;
    double mean_loss = 0;            // training only
    double epsilon = 0;              // training only
};

// One-pass accumulator behind summarize().
class ScoreAccumulator {
public:
    void add(const StepScore& s) {
        ++count_;
        sum_reward_ += s.reward;
        sum_min_sigma_s_ += std::min(s.sigma_s, 1.0);
        sum_min_sigma_e_ += std::min(s.sigma_e, 1.0);
        if (s.sigma_s <= 1.0) ++kpi_matches_;
        sum_q_ += s.q_mean;
    }

    bool empty() const { return count_ == 0; }

    EpisodeSummary summary() const {
        if (count_ == 0) throw std::invalid_argument("summarize: empty score stream");
        EpisodeSummary out;
        const double n = static_cast<double>(count_);
        out.steps = count_;
        out.mean_reward = sum_reward_ / n;
        out.mean_norm_reward = normalize_reward(out.mean_reward);
        out.qos_metric = 1.0 - sum_min_sigma_s_ / n;
        out.qoe_metric = 1.0 - sum_min_sigma_e_ / n;
        out.kpi_match_prob = static_cast<double>(kpi_matches_) / n;
        out.mean_q = sum_q_ / n;
        return out;
    }

private:
    std::int64_t count_ = 0;
    std::int64_t kpi_matches_ = 0;
    double sum_reward_ = 0;
    double sum_min_sigma_s_ = 0;
    double sum_min_sigma_e_ = 0;
    double sum_q_ = 0;
};

template <typename Range>
EpisodeSummary summarize(const Range& scores) {
    ScoreAccumulator acc;
    for (const auto& s : scores) acc.add(s);
    return acc.summary();
}

inline std::string csv_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// Step-level CSV. Fixed column order; reals carry 9 significant digits so
// two identical runs produce byte-identical files.
class StepCsvWriter {
public:
    StepCsvWriter(const std::string& path, std::string run_id, std::string scheme,
                  std::uint64_t seed, int num_vehicles)
        : out_(path), run_id_(std::move(run_id)), scheme_(std::move(scheme)), seed_(seed),
          num_vehicles_(num_vehicles) {
        if (!out_) throw std::runtime_error("cannot open CSV for writing: " + path);
        out_ << "run_id,scheme,seed,n,episode,step,vehicle,action,sigma_s,sigma_e,reward,q_mean\n";
    }

    void write(const StepScore& s) {
        out_ << run_id_ << ',' << scheme_ << ',' << seed_ << ',' << num_vehicles_ << ','
             << s.episode << ',' << s.step << ',' << s.vehicle << ',' << action_label(s.action)
             << ',' << csv_real(s.sigma_s) << ',' << csv_real(s.sigma_e) << ','
             << csv_real(s.reward) << ',' << csv_real(s.q_mean) << '\n';
    }

    void flush() { out_.flush(); }

private:
    std::ofstream out_;
    std::string run_id_;
    std::string scheme_;
    std::uint64_t seed_;
    int num_vehicles_;
};

// Per-episode summary CSV (one row per episode of a run).
class EpisodeCsvWriter {
public:
    EpisodeCsvWriter(const std::string& path, std::string run_id, std::string scheme,
                     std::uint64_t seed, int num_vehicles)
        : out_(path), run_id_(std::move(run_id)), scheme_(std::move(scheme)), seed_(seed),
          num_vehicles_(num_vehicles) {
        if (!out_) throw std::runtime_error("cannot open CSV for writing: " + path);
        out_ << "run_id,scheme,seed,n,episode,mean_reward,mean_norm_reward,qos_metric,"
                "qoe_metric,kpi_match_prob,mean_q,mean_loss,epsilon\n";
    }

    void write(const EpisodeSummary& e) {
        out_ << run_id_ << ',' << scheme_ << ',' << seed_ << ',' << num_vehicles_ << ','
             << e.episode << ',' << csv_real(e.mean_reward) << ',' << csv_real(e.mean_norm_reward)
             << ',' << csv_real(e.qos_metric) << ',' << csv_real(e.qoe_metric) << ','
             << csv_real(e.kpi_match_prob) << ',' << csv_real(e.mean_q) << ','
             << csv_real(e.mean_loss) << ',' << csv_real(e.epsilon) << '\n';
    }

    void flush() { out_.flush(); }

private:
    std::ofstream out_;
    std::string run_id_;
    std::string scheme_;
    std::uint64_t seed_;
    int num_vehicles_;
};

}  // namespace pqos
