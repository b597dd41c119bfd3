#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <filesystem>

#include "pqos/rl.hpp"
#include "pqos/selftest.hpp"

using namespace pqos;

namespace {

LearningConfig small_lc() {
    LearningConfig lc;
    lc.hidden_dims = {6, 5};
    lc.replay_capacity_transitions = 128;
    lc.batch_size = 4;
    lc.learning_rate = 1e-3;
    lc.target_sync_interval_steps = 5;
    return lc;
}

std::vector<double> random_state(int dim, Rng& rng) {
    std::vector<double> s(dim);
    for (auto& x : s) x = rng.uniform(0.0, 1.0);
    return s;
}

}  // namespace

TEST_CASE("forward pass hand checks", "[rl]") {
    Mlp zero({15, 16, 64, 3});
    const std::vector<double> input(15, 0.3);
    const auto q = zero.forward(input);
    REQUIRE(q.size() == 3);
    CHECK(q[0] == 0.0);
    CHECK(q[1] == 0.0);
    CHECK(q[2] == 0.0);

    // 1x1x1 chain with unit weights passes positive inputs through ReLU.
    Mlp chain({1, 1, 1});
    chain.layers()[0].w = {1.0};
    chain.layers()[1].w = {1.0};
    CHECK(chain.forward(std::array{0.5}).front() == 0.5);
    CHECK(chain.forward(std::array{-0.5}).front() == 0.0);

    const auto once = zero.forward(input);
    const auto twice = zero.forward(input);
    CHECK(once == twice);

    CHECK_THROWS_AS(zero.forward(std::array{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("backward matches the analytic scalar derivative", "[rl]") {
    // One linear unit: Q = w*x + b, loss (Q - y)^2.
    Mlp m({1, 1});
    m.layers()[0].w = {0.7};
    m.layers()[0].b = {0.3};
    const std::vector<double> x{2.0};
    const std::vector<std::span<const double>> states{std::span<const double>(x)};
    const std::vector<double> targets{5.0};
    const std::vector<int> actions{0};
    double loss = 0;
    const auto g = m.backward(states, targets, actions, &loss);
    const double q = 0.7 * 2.0 + 0.3;
    CHECK(loss == Catch::Approx((q - 5.0) * (q - 5.0)).margin(1e-12));
    CHECK(g.w[0][0] == Catch::Approx(2.0 * (q - 5.0) * 2.0).margin(1e-12));
    CHECK(g.b[0][0] == Catch::Approx(2.0 * (q - 5.0)).margin(1e-12));
}

TEST_CASE("perfect targets produce zero gradients", "[rl]") {
    Rng rng = Rng::from(5, 5);
    Mlp m = Mlp::init_random({4, 6, 3}, rng);
    const auto s = random_state(4, rng);
    const auto q = m.forward(s);
    const std::vector<std::span<const double>> states{std::span<const double>(s)};
    const std::vector<double> targets{q[1]};
    const std::vector<int> actions{1};
    const auto g = m.backward(states, targets, actions);
    for (const auto& layer : g.w) {
        for (double v : layer) CHECK(v == 0.0);
    }
    for (const auto& layer : g.b) {
        for (double v : layer) CHECK(v == 0.0);
    }
}

TEST_CASE("untaken actions receive no output-layer gradient", "[rl]") {
    Rng rng = Rng::from(6, 5);
    Mlp m = Mlp::init_random({4, 6, 3}, rng);
    const auto s = random_state(4, rng);
    const std::vector<std::span<const double>> states{std::span<const double>(s)};
    const std::vector<double> targets{2.5};
    const std::vector<int> actions{1};
    const auto g = m.backward(states, targets, actions);

    const auto& out_w = g.w.back();
    const auto& out_b = g.b.back();
    const int in_dim = m.layers().back().in;
    for (int row : {0, 2}) {
        CHECK(out_b[row] == 0.0);
        for (int c = 0; c < in_dim; ++c) CHECK(out_w[row * in_dim + c] == 0.0);
    }
    double taken_row_norm = 0;
    for (int c = 0; c < in_dim; ++c) taken_row_norm += std::abs(out_w[1 * in_dim + c]);
    CHECK(taken_row_norm > 0.0);
}

TEST_CASE("backprop agrees with central finite differences", "[rl]") {
    const auto check = selftest::check_gradients(20, 1e-5);
    INFO(check.detail);
    CHECK(check.passed);
}

TEST_CASE("SGD update rule", "[rl]") {
    Rng rng = Rng::from(7, 5);
    Mlp m = Mlp::init_random({3, 4, 2}, rng);
    const Mlp before = m;

    auto zero_grad = m.zero_gradients();
    m.apply_sgd(zero_grad, 0.5);
    CHECK(m == before);

    // lr = 1 with gradient equal to the parameters zeroes the network.
    Mlp::Gradients self;
    for (const auto& l : m.layers()) {
        self.w.push_back(l.w);
        self.b.push_back(l.b);
    }
    m.apply_sgd(self, 1.0);
    for (const auto& l : m.layers()) {
        for (double w : l.w) CHECK(w == 0.0);
        for (double b : l.b) CHECK(b == 0.0);
    }

    // One step on the scalar quadratic reduces the loss.
    Mlp scalar({1, 1});
    scalar.layers()[0].w = {0.1};
    const std::vector<double> x{1.0};
    const std::vector<std::span<const double>> states{std::span<const double>(x)};
    const std::vector<double> targets{3.0};
    const std::vector<int> actions{0};
    double loss_before = 0, loss_after = 0;
    const auto g = scalar.backward(states, targets, actions, &loss_before);
    scalar.apply_sgd(g, 0.05);
    scalar.backward(states, targets, actions, &loss_after);
    CHECK(loss_after < loss_before);
}

TEST_CASE("epsilon schedule endpoints and midpoint", "[rl]") {
    LearningConfig lc;  // defaults: 0.99 -> 0.01 over 80% of 3000 episodes
    const int decay_end = static_cast<int>(lc.epsilon_decay_fraction * lc.train_episodes);
    CHECK(epsilon_at(0, lc) == Catch::Approx(0.99).margin(1e-12));
    CHECK(epsilon_at(decay_end, lc) == Catch::Approx(0.01).margin(1e-12));
    CHECK(epsilon_at(lc.train_episodes, lc) == Catch::Approx(0.01).margin(1e-12));
    CHECK(epsilon_at(decay_end / 2, lc) == Catch::Approx(0.50).margin(1e-12));
    CHECK_THROWS_AS(epsilon_at(-1, lc), std::invalid_argument);

    lc.train_episodes = 0;
    CHECK(epsilon_at(0, lc) == lc.epsilon_end);
}

TEST_CASE("action selection: greedy, ties, exploration frequencies", "[rl]") {
    Rng init = Rng::from(8, 5);
    LearningConfig lc = small_lc();
    DdqnAgent agent(2, lc, init);

    // Zero weights + crafted output biases give constant Q values.
    ModelParams zeros = agent.snapshot();
    for (auto& v : zeros.values) v = 0.0;
    agent.adopt_global(zeros);
    auto& out_layer = agent.primary_mutable().layers().back();
    out_layer.b = {0.1, 0.9, 0.3};

    Rng rng = Rng::from(9, 5);
    const std::vector<double> state{0.2, 0.4};
    CHECK(agent.act(state, 0.0, rng) == CompressionAction::kSemantic);

    out_layer.b = {0.5, 0.5, 0.1};
    CHECK(agent.act(state, 0.0, rng) == CompressionAction::kRaw);  // tie -> lowest index

    std::array<int, 3> counts{0, 0, 0};
    const int draws = 30000;
    for (int i = 0; i < draws; ++i) counts[action_index(agent.act(state, 1.0, rng))]++;
    for (int c : counts) {
        CHECK(static_cast<double>(c) / draws == Catch::Approx(1.0 / 3.0).margin(0.02));
    }
}

TEST_CASE("greedy action is invariant under constant Q shifts", "[rl]") {
    Rng init = Rng::from(10, 5);
    DdqnAgent agent(3, small_lc(), init);
    Rng rng = Rng::from(11, 5);
    const auto state = random_state(3, rng);
    const auto base = agent.act(state, 0.0, rng);
    for (auto& b : agent.primary_mutable().layers().back().b) b += 123.456;
    CHECK(agent.act(state, 0.0, rng) == base);
}

TEST_CASE("double-Q targets", "[rl]") {
    Rng init = Rng::from(12, 5);
    LearningConfig lc = small_lc();
    lc.discount = 0.95;
    DdqnAgent agent(1, lc, init);

    // Target network Q = (0.2, 0.7, 0.4), primary Q = (0.9, 0.1, 0.2):
    // primary argmax is 0, so y must bootstrap from the target's 0.2 and
    // not from the target's own max 0.7.
    ModelParams zeros = agent.snapshot();
    for (auto& v : zeros.values) v = 0.0;
    agent.adopt_global(zeros);
    agent.primary_mutable().layers().back().b = {0.2, 0.7, 0.4};
    agent.adopt_global(agent.snapshot());  // target <- (0.2, 0.7, 0.4)
    agent.primary_mutable().layers().back().b = {0.9, 0.1, 0.2};

    Transition t;
    t.state = {0.0};
    t.next_state = {0.0};
    t.action = 0;
    t.reward = 1.0;
    t.terminal = false;
    const std::vector<const Transition*> batch{&t};
    auto ys = agent.ddqn_targets(batch);
    REQUIRE(ys.size() == 1);
    CHECK(ys[0] == Catch::Approx(1.0 + 0.95 * 0.2).margin(1e-12));

    t.terminal = true;
    CHECK(agent.ddqn_targets(batch)[0] == 1.0);

    t.terminal = false;
    DdqnAgent gamma0(1, [] {
        auto lc2 = small_lc();
        lc2.discount = 0.0;
        return lc2;
    }(), init);
    CHECK(gamma0.ddqn_targets(batch)[0] == t.reward);

    CHECK_THROWS_AS(agent.ddqn_targets(std::vector<const Transition*>{}), std::invalid_argument);
}

TEST_CASE("with target == primary the update is plain Q-learning", "[rl]") {
    Rng init = Rng::from(13, 5);
    LearningConfig lc = small_lc();
    DdqnAgent agent(4, lc, init);
    agent.adopt_global(agent.snapshot());  // force target == primary

    Rng rng = Rng::from(14, 5);
    for (int i = 0; i < 20; ++i) {
        Transition t;
        t.state = random_state(4, rng);
        t.next_state = random_state(4, rng);
        t.action = rng.uniform_int(0, 2);
        t.reward = rng.uniform(-1.0, 1.0);
        t.terminal = false;
        const std::vector<const Transition*> batch{&t};
        const auto y = agent.ddqn_targets(batch)[0];
        const auto q = agent.primary().forward(t.next_state);
        const double expected = t.reward + lc.discount * q[DdqnAgent::argmax_low(q)];
        CHECK(y == Catch::Approx(expected).margin(1e-12));
    }
}

TEST_CASE("replay buffer is a FIFO ring", "[rl]") {
    ReplayBuffer buf(50);
    CHECK(buf.capacity() == 50);
    for (int i = 0; i < 60; ++i) {
        Transition t;
        t.reward = i;
        buf.push(std::move(t));
        CHECK(buf.size() <= 50);
    }
    CHECK(buf.size() == 50);
    // After capacity + k insertions the first k are gone.
    CHECK(buf.at(0).reward == 10.0);
    CHECK(buf.at(49).reward == 59.0);
    CHECK_THROWS_AS(buf.at(50), std::out_of_range);
    CHECK_THROWS_AS(ReplayBuffer(0), std::invalid_argument);
}

TEST_CASE("train_step warm-up, sync cadence, and regression", "[rl]") {
    Rng init = Rng::from(15, 5);
    LearningConfig lc = small_lc();
    lc.batch_size = 4;
    lc.target_sync_interval_steps = 5;
    DdqnAgent agent(2, lc, init);
    Rng rng = Rng::from(16, 5);

    // Warm-up guard: too few transitions -> no-op.
    for (int i = 0; i < lc.batch_size - 1; ++i) {
        Transition t;
        t.state = random_state(2, rng);
        t.next_state = random_state(2, rng);
        t.action = i % 3;
        agent.observe(std::move(t));
        CHECK_FALSE(agent.train_step(rng).has_value());
        CHECK(agent.learn_step_counter() == 0);
    }

    Transition filler;
    filler.state = random_state(2, rng);
    filler.next_state = random_state(2, rng);
    agent.observe(std::move(filler));

    for (int i = 0; i < lc.target_sync_interval_steps - 1; ++i) {
        CHECK(agent.train_step(rng).has_value());
        CHECK_FALSE(agent.target() == agent.primary());
    }
    CHECK(agent.train_step(rng).has_value());
    CHECK(agent.target() == agent.primary());  // synced bitwise after exactly N updates

    // Fixed single-transition buffer with gamma = 0 regresses Q -> r; the
    // loss must decay across every 100-update window.
    LearningConfig reg = small_lc();
    reg.batch_size = 1;
    reg.discount = 0.0;
    reg.learning_rate = 1e-2;
    DdqnAgent learner(1, reg, init);
    Transition t;
    t.state = {1.0};
    t.next_state = {1.0};
    t.action = 0;
    t.reward = 0.75;
    t.terminal = false;
    learner.observe(std::move(t));
    std::vector<double> losses;
    for (int i = 0; i < 600; ++i) losses.push_back(learner.train_step(rng).value());
    for (std::size_t i = 0; i + 100 < losses.size(); ++i) {
        CHECK(losses[i + 100] < losses[i]);
    }
    const auto q_final = learner.primary().forward(std::vector<double>{1.0});
    CHECK(q_final[0] == Catch::Approx(0.75).margin(0.05));
}

TEST_CASE("snapshot round trip and seeded init determinism", "[rl]") {
    Rng init_a = Rng::from(77, 5);
    Rng init_b = Rng::from(77, 5);
    LearningConfig lc = small_lc();
    DdqnAgent a(kActionCount + 2, lc, init_a);
    DdqnAgent b(kActionCount + 2, lc, init_b);
    CHECK(a.snapshot().values == b.snapshot().values);

    DdqnAgent c(kActionCount + 2, lc, init_a);
    c.load_snapshot(a.snapshot());
    Rng rng = Rng::from(78, 5);
    for (int i = 0; i < 100; ++i) {
        const auto s = random_state(kActionCount + 2, rng);
        CHECK(a.primary().forward(s) == c.primary().forward(s));
    }

    LearningConfig other = small_lc();
    other.hidden_dims = {4};
    DdqnAgent mismatch(kActionCount + 2, other, init_a);
    CHECK_THROWS_AS(mismatch.load_snapshot(a.snapshot()), std::invalid_argument);
}

TEST_CASE("checkpoint files are byte-exact round trips", "[rl]") {
    namespace fs = std::filesystem;
    Rng init = Rng::from(99, 5);
    DdqnAgent agent(3, small_lc(), init);
    const auto params = agent.snapshot();

    const auto path = (fs::temp_directory_path() / "pqos_test.ckpt").string();
    save_checkpoint(params, path);
    const auto loaded = load_checkpoint(path);
    CHECK(loaded.dims == params.dims);
    CHECK(loaded.values == params.values);

    save_checkpoint(params, path);
    const auto loaded_again = load_checkpoint(path);
    CHECK(loaded_again.values == params.values);
    std::remove(path.c_str());

    const auto bogus = (fs::temp_directory_path() / "pqos_bogus.ckpt").string();
    {
        std::ofstream out(bogus);
        out << "something else\n";
    }
    CHECK_THROWS(load_checkpoint(bogus));
    std::remove(bogus.c_str());
}
