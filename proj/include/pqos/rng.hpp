#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pqos {

// Deterministic RNG used everywhere in the simulator. std::mt19937_64 is
// fully specified by the standard, but the std distributions are not, so the
// shaping functions below are hand-rolled to keep runs bit-reproducible
// across compilers and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    static Rng from(std::uint64_t seed, std::uint64_t stream) {
        std::seed_seq seq{seed, stream};
        std::mt19937_64 eng(seq);
        Rng r(0);
        r.eng_ = eng;
        return r;
    }

    // Uniform in [0, 1) with 53 bits of entropy.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(eng_() % span);
    }

    // Box-Muller without the cached spare, so every call consumes exactly two
    // engine draws and the draw sequence stays position-independent.
    double normal(double mean, double stddev) {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * mag * std::cos(2.0 * 3.141592653589793 * u2);
    }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

}  // namespace pqos
