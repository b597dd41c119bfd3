#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pqos/action.hpp"
#include "pqos/config.hpp"
#include "pqos/rng.hpp"

namespace pqos {

struct Point3 {
    double x = 0, y = 0, z = 0;
};

struct PointCloud {
    std::vector<Point3> points;

    bool empty() const { return points.empty(); }
    std::size_t size() const { return points.size(); }
};

// Burst size and distortion pair attached to one compression choice.
struct PayloadProfile {
    CompressionAction action = CompressionAction::kRaw;
    std::int64_t burst_bytes = 0;
    double cd = 0.0;
};

inline double squared_dist(const Point3& a, const Point3& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}

// Symmetric point-to-point Chamfer Distance: for each point the squared
// distance to its nearest neighbour in the other cloud, summed in both
// directions.
inline double chamfer_distance(const PointCloud& p, const PointCloud& q) {
    if (p.empty() || q.empty()) {
        throw std::invalid_argument("chamfer_distance: point clouds must be nonempty");
    }
    auto directed = [](const PointCloud& from, const PointCloud& to) {
        double sum = 0.0;
        for (const auto& a : from.points) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& b : to.points) {
                const double d = squared_dist(a, b);
                if (d < best) best = d;
            }
            sum += best;
        }
        return sum;
    };
    return directed(p, q) + directed(q, p);
}

inline PayloadProfile profile_for_action(CompressionAction a, const ScenarioConfig& cfg) {
    return PayloadProfile{a, cfg.payload_for(a), cfg.cd_for(a)};
}

// Deterministic pseudo-random cloud in the unit cube; test fixture for the
// Chamfer Distance oracle.
inline PointCloud synth_cloud(std::uint64_t seed, std::size_t count) {
    if (count == 0) throw std::invalid_argument("synth_cloud: count must be >= 1");
    Rng rng = Rng::from(seed, /*stream=*/0x70636c6f7564);  // "pcloud"
    PointCloud cloud;
    cloud.points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        cloud.points.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
    }
    return cloud;
}

// Plain-text fixture format: one "x y z" triple per line.
inline PointCloud read_point_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open point cloud file: " + path);
    PointCloud cloud;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        Point3 pt;
        if (!(ss >> pt.x >> pt.y >> pt.z)) {
            throw std::runtime_error("bad point cloud line " + std::to_string(lineno) + " in " + path);
        }
        cloud.points.push_back(pt);
    }
    return cloud;
}

inline void write_point_cloud(const PointCloud& cloud, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write point cloud file: " + path);
    char buf[128];
    for (const auto& p : cloud.points) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x, p.y, p.z);
        out << buf;
    }
}

}  // namespace pqos
