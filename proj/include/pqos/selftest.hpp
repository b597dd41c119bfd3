#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "pqos/federation.hpp"
#include "pqos/perception.hpp"
#include "pqos/rl.hpp"
#include "pqos/rng.hpp"

// Built-in oracle suite behind the `selftest` CLI subcommand. Every check
// recomputes its expectation through an independent code path (brute-force
// enumeration, finite differences, algebraic properties) rather than the
// functions under test.
namespace pqos::selftest {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

// Independent nearest-neighbour enumeration; intentionally index-based and
// separate from chamfer_distance.
inline double brute_force_chamfer(const PointCloud& p, const PointCloud& q) {
    double total = 0.0;
    for (std::size_t i = 0; i < p.points.size(); ++i) {
        double best = -1.0;
        for (std::size_t j = 0; j < q.points.size(); ++j) {
            const double dx = p.points[i].x - q.points[j].x;
            const double dy = p.points[i].y - q.points[j].y;
            const double dz = p.points[i].z - q.points[j].z;
            const double d = dx * dx + dy * dy + dz * dz;
            if (best < 0 || d < best) best = d;
        }
        total += best;
    }
    for (std::size_t j = 0; j < q.points.size(); ++j) {
        double best = -1.0;
        for (std::size_t i = 0; i < p.points.size(); ++i) {
            const double dx = p.points[i].x - q.points[j].x;
            const double dy = p.points[i].y - q.points[j].y;
            const double dz = p.points[i].z - q.points[j].z;
            const double d = dx * dx + dy * dy + dz * dz;
            if (best < 0 || d < best) best = d;
        }
        total += best;
    }
    return total;
}

inline double rel_err(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-12});
    return std::abs(a - b) / scale;
}

}  // namespace detail

inline CheckResult check_chamfer(int pairs = 200) {
    Rng rng = Rng::from(20230, 1);
    double worst = 0.0;
    for (int k = 0; k < pairs; ++k) {
        const auto p = synth_cloud(1000 + k, 1 + rng.uniform_int(0, 5));
        const auto q = synth_cloud(5000 + k, 1 + rng.uniform_int(0, 5));
        const double got = chamfer_distance(p, q);
        const double want = detail::brute_force_chamfer(p, q);
        worst = std::max(worst, detail::rel_err(got, want));
        const double sym = chamfer_distance(q, p);
        worst = std::max(worst, detail::rel_err(got, sym));
        // Translation invariance.
        PointCloud pt = p, qt = q;
        for (auto& pt3 : pt.points) {
            pt3.x += 12.5;
            pt3.y -= 3.25;
            pt3.z += 0.5;
        }
        for (auto& pt3 : qt.points) {
            pt3.x += 12.5;
            pt3.y -= 3.25;
            pt3.z += 0.5;
        }
        worst = std::max(worst, detail::rel_err(got, chamfer_distance(pt, qt)));
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "worst relative error %.3g over %d pairs", worst, pairs);
    return {"chamfer distance vs brute-force enumeration", worst < 1e-12, buf};
}

// Central finite differences of the batch loss with respect to every
// parameter of random small networks.
inline CheckResult check_gradients(int networks = 20, double h = 1e-5) {
    Rng rng = Rng::from(774411, 2);
    double worst = 0.0;
    for (int net = 0; net < networks; ++net) {
        const int in_dim = 2 + rng.uniform_int(0, 2);
        const int h1 = 2 + rng.uniform_int(0, 3);
        const int out_dim = 2 + rng.uniform_int(0, 1);
        Mlp m = Mlp::init_random({in_dim, h1, out_dim}, rng);
        for (auto& l : m.layers()) {
            for (auto& b : l.b) b = rng.uniform(-1.0, 1.0);
        }

        const int batch = 3;
        std::vector<std::vector<double>> states(batch);
        std::vector<double> targets(batch);
        std::vector<int> actions(batch);
        for (int i = 0; i < batch; ++i) {
            states[i].resize(in_dim);
            for (auto& x : states[i]) x = rng.uniform(-1.0, 1.0);
            targets[i] = rng.uniform(-1.0, 1.0);
            actions[i] = rng.uniform_int(0, out_dim - 1);
        }
        std::vector<std::span<const double>> views(states.begin(), states.end());

        const auto grads = m.backward(views, targets, actions);

        auto loss_at = [&](Mlp& model) {
            double loss = 0;
            for (int i = 0; i < batch; ++i) {
                const auto q = model.forward(states[i]);
                const double e = q[actions[i]] - targets[i];
                loss += e * e / batch;
            }
            return loss;
        };

        double num_sq = 0, diff_sq = 0;
        for (std::size_t li = 0; li < m.layers().size(); ++li) {
            auto probe = [&](std::vector<double>& params, const std::vector<double>& analytic) {
                for (std::size_t k = 0; k < params.size(); ++k) {
                    const double orig = params[k];
                    params[k] = orig + h;
                    const double up = loss_at(m);
                    params[k] = orig - h;
                    const double down = loss_at(m);
                    params[k] = orig;
                    const double numeric = (up - down) / (2 * h);
                    num_sq += numeric * numeric;
                    const double d = numeric - analytic[k];
                    diff_sq += d * d;
                }
            };
            probe(m.layers()[li].w, grads.w[li]);
            probe(m.layers()[li].b, grads.b[li]);
        }
        const double rel = std::sqrt(diff_sq) / std::max(std::sqrt(num_sq), 1e-12);
        worst = std::max(worst, rel);
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "worst gradient relative error %.3g over %d networks", worst,
                  networks);
    return {"backprop vs central finite differences", worst < 1e-4, buf};
}

inline CheckResult check_fedavg(int pairs = 100) {
    Rng rng = Rng::from(99123, 3);
    bool ok = true;
    std::string detail_msg = "identity, envelope, permutation and 1:3 weighting hold";
    for (int k = 0; k < pairs && ok; ++k) {
        ModelParams p1, p2;
        p1.dims = p2.dims = {2, 2};
        const int count = 6;
        for (int i = 0; i < count; ++i) {
            p1.values.push_back(rng.uniform(-5.0, 5.0));
            p2.values.push_back(rng.uniform(-5.0, 5.0));
        }
        // Single-client identity must be bitwise.
        const auto solo = fed_aggregate({{0, p1, 17}});
        if (solo.values != p1.values) {
            ok = false;
            detail_msg = "single-client aggregation is not the identity";
            break;
        }
        // 1:3 step weighting -> exact quarter weights.
        const auto mixed = fed_aggregate({{0, p1, 1}, {1, p2, 3}});
        for (int i = 0; i < count; ++i) {
            const double want = 0.25 * p1.values[i] + 0.75 * p2.values[i];
            if (mixed.values[i] != want) {
                ok = false;
                detail_msg = "1:3 step weighting mismatch";
                break;
            }
            const double lo = std::min(p1.values[i], p2.values[i]) - 1e-12;
            const double hi = std::max(p1.values[i], p2.values[i]) + 1e-12;
            if (mixed.values[i] < lo || mixed.values[i] > hi) {
                ok = false;
                detail_msg = "aggregate left the convex envelope";
                break;
            }
        }
        if (!ok) break;
        const auto swapped = fed_aggregate({{1, p2, 3}, {0, p1, 1}});
        for (int i = 0; i < count; ++i) {
            if (detail::rel_err(mixed.values[i], swapped.values[i]) > 1e-12) {
                ok = false;
                detail_msg = "aggregation is not permutation invariant";
                break;
            }
        }
    }
    return {"federated averaging properties", ok, detail_msg};
}

inline std::vector<CheckResult> run_all() {
    return {check_chamfer(), check_gradients(), check_fedavg()};
}

}  // namespace pqos::selftest
