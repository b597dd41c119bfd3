#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pqos/metrics.hpp"
#include "pqos/rng.hpp"

using namespace pqos;

TEST_CASE("QoS score is the plain delay quotient", "[metrics]") {
    CHECK(qos_score(0.05, 0.05) == 1.0);
    CHECK(qos_score(0.0, 0.05) == 0.0);
    CHECK(qos_score(0.025, 0.05) == 0.5);
    CHECK(qos_score(0.25, 0.05) == 5.0);  // no clamping above 1
    CHECK_THROWS_AS(qos_score(0.1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(qos_score(-0.1, 0.05), std::invalid_argument);
}

TEST_CASE("QoE score with the penalty denominator", "[metrics]") {
    CHECK(qoe_score(45.0, 45.0, 30.0) == 0.6);
    CHECK(qoe_score(0.0, 45.0, 30.0) == 0.0);
    CHECK(qoe_score(35.635, 45.0, 10.0) == Catch::Approx(0.6479).margin(1e-4));
    CHECK_THROWS_AS(qoe_score(1.0, 0.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(qoe_score(-1.0, 45.0, 0.0), std::invalid_argument);
}

TEST_CASE("QoE score strictly decreases in the penalty", "[metrics]") {
    double prev = qoe_score(35.635, 45.0, 0.0);
    for (double rho = 5.0; rho <= 100.0; rho += 5.0) {
        const double cur = qoe_score(35.635, 45.0, rho);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("reward branches and range", "[metrics]") {
    CHECK(reward(1.2, 0.3, 0.5) == -1.0);
    CHECK(reward(0.0, 0.0, 0.0) == 1.0);
    CHECK(reward(0.0, 0.0, 0.5) == 1.0);
    CHECK(reward(0.0, 0.0, 1.0) == 1.0);
    CHECK(reward(0.5, 0.5, 0.5) == Catch::Approx(0.0).margin(1e-15));
    CHECK(reward(1.0, 1.0, 0.3) == Catch::Approx(-1.0).margin(1e-15));
    // sigma_e beyond 1 is clamped before use so the range stays [-1, 1].
    CHECK(reward(0.0, 2.5, 1.0) == reward(0.0, 1.0, 1.0));

    Rng rng = Rng::from(17, 4);
    for (int i = 0; i < 2000; ++i) {
        const double r = reward(rng.uniform(0.0, 1.0), rng.uniform(0.0, 3.0), rng.uniform(0.0, 1.0));
        CHECK(r >= -1.0);
        CHECK(r <= 1.0);
        const double norm = normalize_reward(r);
        CHECK(norm >= 0.0);
        CHECK(norm <= 1.0);
    }
}

TEST_CASE("reward is monotone in both scores", "[metrics]") {
    Rng rng = Rng::from(18, 4);
    for (int i = 0; i < 500; ++i) {
        const double alpha = rng.uniform(0.0, 1.0);
        const double s1 = rng.uniform(0.0, 1.0);
        const double s2 = rng.uniform(s1, 1.0);
        const double e = rng.uniform(0.0, 1.0);
        CHECK(reward(s2, e, alpha) <= reward(s1, e, alpha) + 1e-12);
        const double e2 = rng.uniform(e, 1.0);
        CHECK(reward(s1, e2, alpha) <= reward(s1, e, alpha) + 1e-12);
    }
}

TEST_CASE("normalized reward endpoints", "[metrics]") {
    CHECK(normalize_reward(-1.0) == 0.0);
    CHECK(normalize_reward(1.0) == 1.0);
    CHECK(normalize_reward(0.3) == Catch::Approx(0.65).margin(1e-15));
}

TEST_CASE("summarize aggregates a score stream in one pass", "[metrics]") {
    std::vector<StepScore> same(5);
    for (auto& s : same) {
        s.sigma_s = 0.4;
        s.sigma_e = 0.2;
        s.reward = 0.5;
        s.q_mean = 1.25;
    }
    const auto echo = summarize(same);
    CHECK(echo.mean_reward == Catch::Approx(0.5));
    CHECK(echo.qos_metric == Catch::Approx(0.6));
    CHECK(echo.qoe_metric == Catch::Approx(0.8));
    CHECK(echo.kpi_match_prob == 1.0);
    CHECK(echo.mean_q == Catch::Approx(1.25));

    std::vector<StepScore> split(10);
    for (std::size_t i = 0; i < split.size(); ++i) split[i].sigma_s = i < 5 ? 2.0 : 0.0;
    CHECK(summarize(split).kpi_match_prob == 0.5);

    std::vector<StepScore> empty;
    CHECK_THROWS_AS(summarize(empty), std::invalid_argument);
}

TEST_CASE("step CSV writer: header, determinism, round trip", "[metrics]") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path();
    const auto path_a = (dir / "pqos_steps_a.csv").string();
    const auto path_b = (dir / "pqos_steps_b.csv").string();

    {
        StepCsvWriter empty(path_a, "run", "federated", 1, 2);
    }
    std::ifstream check(path_a);
    std::string header;
    std::getline(check, header);
    CHECK(header ==
          "run_id,scheme,seed,n,episode,step,vehicle,action,sigma_s,sigma_e,reward,q_mean");
    std::string rest;
    CHECK_FALSE(std::getline(check, rest));

    auto write_rows = [](const std::string& path) {
        StepCsvWriter w(path, "run", "federated", 1, 2);
        StepScore s{3, 14, 1, CompressionAction::kSemantic, 0.123456789123, 2.0 / 3.0, -0.25, 1.5};
        w.write(s);
        s.step = 15;
        s.sigma_s = 1e-9;
        w.write(s);
    };
    write_rows(path_a);
    write_rows(path_b);

    std::ostringstream a_bytes, b_bytes;
    a_bytes << std::ifstream(path_a).rdbuf();
    b_bytes << std::ifstream(path_b).rdbuf();
    CHECK(a_bytes.str() == b_bytes.str());

    // Parse a row back and confirm 9-significant-digit precision.
    std::istringstream rows(a_bytes.str());
    std::string line;
    std::getline(rows, line);  // header
    std::getline(rows, line);
    std::vector<std::string> cells;
    std::stringstream cell_stream(line);
    std::string cell;
    while (std::getline(cell_stream, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 12);
    CHECK(cells[7] == "C-SC");
    CHECK(std::stod(cells[8]) == Catch::Approx(0.123456789123).epsilon(1e-8));
    CHECK(std::stod(cells[9]) == Catch::Approx(2.0 / 3.0).epsilon(1e-8));

    std::remove(path_a.c_str());
    std::remove(path_b.c_str());
}
