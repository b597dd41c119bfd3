#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pqos/action.hpp"
#include "pqos/config.hpp"
#include "pqos/model_params.hpp"
#include "pqos/rng.hpp"

namespace pqos {

// Fully connected network with ReLU hidden layers and a linear output,
// trained with plain SGD. Weights are row-major (out x in).
class Mlp {
public:
    struct Layer {
        int in = 0;
        int out = 0;
        std::vector<double> w;  // out * in, row-major
        std::vector<double> b;  // out
    };

    Mlp() = default;

    explicit Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
        if (dims_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output dims");
        for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
            Layer l;
            l.in = dims_[i];
            l.out = dims_[i + 1];
            if (l.in < 1 || l.out < 1) throw std::invalid_argument("Mlp: layer dims must be >= 1");
            l.w.assign(static_cast<std::size_t>(l.in) * l.out, 0.0);
            l.b.assign(l.out, 0.0);
            layers_.push_back(std::move(l));
        }
    }

    // Scaled uniform init, biases zero. Draw order is layer by layer,
    // row-major, so equal seeds give bitwise-equal networks.
    static Mlp init_random(std::vector<int> dims, Rng& rng) {
        Mlp m(std::move(dims));
        for (auto& l : m.layers_) {
            const double bound = std::sqrt(6.0 / (l.in + l.out));
            for (auto& w : l.w) w = rng.uniform(-bound, bound);
        }
        return m;
    }

    const std::vector<int>& dims() const { return dims_; }
    int input_dim() const { return dims_.front(); }
    int output_dim() const { return dims_.back(); }
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

    std::vector<double> forward(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != input_dim()) {
            throw std::invalid_argument("Mlp::forward: input size mismatch");
        }
        std::vector<double> cur(x.begin(), x.end());
        std::vector<double> next;
        for (std::size_t li = 0; li < layers_.size(); ++li) {
            affine(layers_[li], cur, next);
            if (li + 1 < layers_.size()) relu(next);
            cur.swap(next);
        }
        return cur;
    }

    // Gradient of the batch-mean squared TD error, with gradients flowing
    // only through each sample's taken action output.
    struct Gradients {
        std::vector<std::vector<double>> w;
        std::vector<std::vector<double>> b;
    };

    Gradients zero_gradients() const {
        Gradients g;
        for (const auto& l : layers_) {
            g.w.emplace_back(l.w.size(), 0.0);
            g.b.emplace_back(l.b.size(), 0.0);
        }
        return g;
    }

    Gradients backward(std::span<const std::span<const double>> states,
                       std::span<const double> targets, std::span<const int> taken_actions,
                       double* loss_out = nullptr) const {
        const std::size_t batch = states.size();
        if (batch == 0 || targets.size() != batch || taken_actions.size() != batch) {
            throw std::invalid_argument("Mlp::backward: batch size mismatch");
        }
        Gradients grads = zero_gradients();
        const std::size_t depth = layers_.size();
        // Per-sample activations; acts[0] is the input, acts[l+1] the output
        // of layer l (post-ReLU for hidden layers).
        std::vector<std::vector<double>> acts(depth + 1);
        std::vector<std::vector<double>> delta(depth);
        double loss = 0.0;
        const double inv_batch = 1.0 / static_cast<double>(batch);

        for (std::size_t i = 0; i < batch; ++i) {
            const auto& x = states[i];
            if (static_cast<int>(x.size()) != input_dim()) {
                throw std::invalid_argument("Mlp::backward: input size mismatch");
            }
            acts[0].assign(x.begin(), x.end());
            for (std::size_t li = 0; li < depth; ++li) {
                affine(layers_[li], acts[li], acts[li + 1]);
                if (li + 1 < depth) relu(acts[li + 1]);
            }
            const int a = taken_actions[i];
            if (a < 0 || a >= output_dim()) throw std::invalid_argument("Mlp::backward: action out of range");
            const double err = acts[depth][a] - targets[i];
            loss += err * err * inv_batch;

            // Output delta: masked quadratic loss.
            delta[depth - 1].assign(output_dim(), 0.0);
            delta[depth - 1][a] = 2.0 * err * inv_batch;
            for (std::size_t li = depth - 1; li-- > 0;) {
                const Layer& up = layers_[li + 1];
                auto& d = delta[li];
                d.assign(up.in, 0.0);
                const auto& du = delta[li + 1];
                for (int r = 0; r < up.out; ++r) {
                    const double dr = du[r];
                    if (dr == 0.0) continue;
                    const double* wrow = up.w.data() + static_cast<std::size_t>(r) * up.in;
                    for (int cidx = 0; cidx < up.in; ++cidx) d[cidx] += wrow[cidx] * dr;
                }
                // ReLU derivative on the hidden activation.
                const auto& h = acts[li + 1];
                for (int cidx = 0; cidx < up.in; ++cidx) {
                    if (h[cidx] <= 0.0) d[cidx] = 0.0;
                }
            }
            for (std::size_t li = 0; li < depth; ++li) {
                const auto& d = delta[li];
                const auto& in = acts[li];
                auto& gw = grads.w[li];
                auto& gb = grads.b[li];
                const int nin = layers_[li].in;
                for (int r = 0; r < layers_[li].out; ++r) {
                    const double dr = d[r];
                    if (dr == 0.0) continue;
                    gb[r] += dr;
                    double* grow = gw.data() + static_cast<std::size_t>(r) * nin;
                    for (int cidx = 0; cidx < nin; ++cidx) grow[cidx] += dr * in[cidx];
                }
            }
        }
        if (loss_out) *loss_out = loss;
        return grads;
    }

    void apply_sgd(const Gradients& g, double learning_rate) {
        if (g.w.size() != layers_.size()) throw std::invalid_argument("apply_sgd: gradient shape mismatch");
        for (std::size_t li = 0; li < layers_.size(); ++li) {
            auto& l = layers_[li];
            if (g.w[li].size() != l.w.size() || g.b[li].size() != l.b.size()) {
                throw std::invalid_argument("apply_sgd: gradient shape mismatch");
            }
            for (std::size_t k = 0; k < l.w.size(); ++k) l.w[k] -= learning_rate * g.w[li][k];
            for (std::size_t k = 0; k < l.b.size(); ++k) l.b[k] -= learning_rate * g.b[li][k];
        }
    }

    ModelParams snapshot() const {
        ModelParams p;
        p.dims = dims_;
        for (const auto& l : layers_) {
            p.values.insert(p.values.end(), l.w.begin(), l.w.end());
            p.values.insert(p.values.end(), l.b.begin(), l.b.end());
        }
        return p;
    }

    void load(const ModelParams& p) {
        if (p.dims != dims_) throw std::invalid_argument("Mlp::load: shape mismatch");
        std::size_t off = 0;
        for (auto& l : layers_) {
            std::copy_n(p.values.begin() + off, l.w.size(), l.w.begin());
            off += l.w.size();
            std::copy_n(p.values.begin() + off, l.b.size(), l.b.begin());
            off += l.b.size();
        }
        if (off != p.values.size()) throw std::invalid_argument("Mlp::load: value count mismatch");
    }

    bool operator==(const Mlp& other) const {
        if (dims_ != other.dims_) return false;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            if (layers_[i].w != other.layers_[i].w || layers_[i].b != other.layers_[i].b) return false;
        }
        return true;
    }

private:
    static void affine(const Layer& l, const std::vector<double>& x, std::vector<double>& out) {
        out.assign(l.b.begin(), l.b.end());
        for (int r = 0; r < l.out; ++r) {
            const double* wrow = l.w.data() + static_cast<std::size_t>(r) * l.in;
            double acc = out[r];
            for (int cidx = 0; cidx < l.in; ++cidx) acc += wrow[cidx] * x[cidx];
            out[r] = acc;
        }
    }

    static void relu(std::vector<double>& v) {
        for (auto& x : v) x = std::max(x, 0.0);
    }

    std::vector<int> dims_;
    std::vector<Layer> layers_;
};

struct Transition {
    std::vector<double> state;
    int action = 0;
    double reward = 0;
    std::vector<double> next_state;
    bool terminal = false;
};

// Fixed-capacity FIFO ring; when full the oldest transition is evicted.
class ReplayBuffer {
public:
    explicit ReplayBuffer(int capacity) : capacity_(capacity) {
        if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
        store_.reserve(capacity);
    }

    void push(Transition t) {
        if (static_cast<int>(store_.size()) < capacity_) {
            store_.push_back(std::move(t));
        } else {
            store_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    int size() const { return static_cast<int>(store_.size()); }
    int capacity() const { return capacity_; }

    // Insertion-ordered access: index 0 is the oldest surviving transition.
    const Transition& at(int i) const {
        if (i < 0 || i >= size()) throw std::out_of_range("ReplayBuffer::at");
        if (size() < capacity_) return store_[i];
        return store_[(head_ + i) % capacity_];
    }

private:
    int capacity_;
    int head_ = 0;
    std::vector<Transition> store_;
};

// Linear decay from epsilon_start at episode 0 to epsilon_end at
// decay_fraction * train_episodes, held constant afterwards.
inline double epsilon_at(int episode, const LearningConfig& lc) {
    if (episode < 0) throw std::invalid_argument("epsilon_at: episode must be >= 0");
    const double decay_end = lc.epsilon_decay_fraction * lc.train_episodes;
    if (decay_end <= 0 || episode >= decay_end) return lc.epsilon_end;
    const double t = static_cast<double>(episode) / decay_end;
    return lc.epsilon_start + (lc.epsilon_end - lc.epsilon_start) * t;
}

// Double DQN agent: primary network for action selection, delayed target
// network for bootstrap values, FIFO replay, epsilon-greedy exploration.
class DdqnAgent {
public:
    DdqnAgent(int state_dim, const LearningConfig& lc, Rng& init_rng)
        : lc_(lc), buffer_(lc.replay_capacity_transitions) {
        std::vector<int> dims;
        dims.push_back(state_dim);
        dims.insert(dims.end(), lc.hidden_dims.begin(), lc.hidden_dims.end());
        dims.push_back(kActionCount);
        primary_ = Mlp::init_random(dims, init_rng);
        target_ = primary_;
    }

    struct Choice {
        CompressionAction action;
        std::vector<double> q;
    };

    // Draws one uniform to decide explore-vs-exploit, and a second one only
    // when exploring; ties in the greedy branch go to the lowest index.
    Choice select(std::span<const double> state, double epsilon, Rng& rng) {
        Choice c{CompressionAction::kRaw, primary_.forward(state)};
        if (rng.uniform() < epsilon) {
            c.action = action_from_index(rng.uniform_int(0, kActionCount - 1));
        } else {
            c.action = action_from_index(argmax_low(c.q));
        }
        return c;
    }

    CompressionAction act(std::span<const double> state, double epsilon, Rng& rng) {
        return select(state, epsilon, rng).action;
    }

    void observe(Transition t) { buffer_.push(std::move(t)); }

    // y = r for terminal transitions, else r + gamma * Q_target(s', a*) with
    // a* chosen by the primary network (the double-Q decoupling).
    std::vector<double> ddqn_targets(std::span<const Transition* const> batch) const {
        if (batch.empty()) throw std::invalid_argument("ddqn_targets: empty batch");
        std::vector<double> ys;
        ys.reserve(batch.size());
        for (const Transition* t : batch) {
            if (t->terminal) {
                ys.push_back(t->reward);
                continue;
            }
            const auto q_primary = primary_.forward(t->next_state);
            const int best = argmax_low(q_primary);
            const auto q_target = target_.forward(t->next_state);
            ys.push_back(t->reward + lc_.discount * q_target[best]);
        }
        return ys;
    }

    // One learning update: sample a batch uniformly with replacement,
    // regress the taken-action Q-values onto the double-Q targets, and sync
    // the target network every target_sync_interval_steps updates. No-op
    // (and no RNG draw) until the buffer holds a full batch.
    std::optional<double> train_step(Rng& rng) {
        if (buffer_.size() < lc_.batch_size) return std::nullopt;
        batch_ptrs_.clear();
        batch_states_.clear();
        batch_actions_.clear();
        for (int i = 0; i < lc_.batch_size; ++i) {
            const Transition& t = buffer_.at(rng.uniform_int(0, buffer_.size() - 1));
            batch_ptrs_.push_back(&t);
            batch_states_.push_back(std::span<const double>(t.state));
            batch_actions_.push_back(t.action);
        }
        const auto targets = ddqn_targets(batch_ptrs_);
        double loss = 0.0;
        const auto grads = primary_.backward(batch_states_, targets, batch_actions_, &loss);
        primary_.apply_sgd(grads, lc_.learning_rate);
        ++learn_step_counter_;
        ++steps_since_sync_;
        if (learn_step_counter_ % lc_.target_sync_interval_steps == 0) {
            target_ = primary_;
        }
        return loss;
    }

    ModelParams snapshot() const { return primary_.snapshot(); }
    void load_snapshot(const ModelParams& p) { primary_.load(p); }

    // Federation hook: replace both networks and restart the local step
    // count that weights the next aggregation round.
    void adopt_global(const ModelParams& g) {
        primary_.load(g);
        target_.load(g);
        steps_since_sync_ = 0;
    }

    const Mlp& primary() const { return primary_; }
    const Mlp& target() const { return target_; }
    Mlp& primary_mutable() { return primary_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    std::int64_t learn_step_counter() const { return learn_step_counter_; }
    std::int64_t steps_since_sync() const { return steps_since_sync_; }
    const LearningConfig& learning_config() const { return lc_; }

    static int argmax_low(std::span<const double> v) {
        int best = 0;
        for (int i = 1; i < static_cast<int>(v.size()); ++i) {
            if (v[i] > v[best]) best = i;
        }
        return best;
    }

private:
    LearningConfig lc_;
    Mlp primary_;
    Mlp target_;
    ReplayBuffer buffer_;
    std::int64_t learn_step_counter_ = 0;
    std::int64_t steps_since_sync_ = 0;
    // Reused batch scratch; a DdqnAgent is owned by one training loop.
    std::vector<const Transition*> batch_ptrs_;
    std::vector<std::span<const double>> batch_states_;
    std::vector<int> batch_actions_;
};

}  // namespace pqos
