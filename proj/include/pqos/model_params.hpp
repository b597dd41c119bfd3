#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pqos {

// Flat, ordered view of a network's parameters: per layer, weights in
// row-major order followed by biases. This is the unit exchanged by
// federated averaging and written to checkpoints.
struct ModelParams {
    std::vector<int> dims;        // layer widths, input first
    std::vector<double> values;

    bool same_shape(const ModelParams& other) const { return dims == other.dims; }
};

namespace detail {

inline void write_le_double(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    char buf[8];
    std::memcpy(buf, &bits, 8);
    out.write(buf, 8);
}

inline double read_le_double(std::istream& in) {
    char buf[8];
    in.read(buf, 8);
    if (!in) throw std::runtime_error("checkpoint truncated");
    std::uint64_t bits;
    std::memcpy(&bits, buf, 8);
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

}  // namespace detail

inline constexpr const char* kCheckpointMagic = "pqosckpt v1";

// Checkpoint format: one ASCII header line "pqosckpt v1 <d0> <d1> ... <dk>",
// then every parameter as a 64-bit little-endian IEEE double in layer order
// (weights row-major, then biases).
inline void save_checkpoint(const ModelParams& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << kCheckpointMagic;
    for (int d : p.dims) out << ' ' << d;
    out << '\n';
    for (double v : p.values) detail::write_le_double(out, v);
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::string magic_a, magic_b;
    hs >> magic_a >> magic_b;
    if (magic_a + " " + magic_b != kCheckpointMagic) {
        throw std::runtime_error("not a checkpoint file: " + path);
    }
    ModelParams p;
    int d;
    while (hs >> d) p.dims.push_back(d);
    if (p.dims.size() < 2) throw std::runtime_error("checkpoint header lists no layers: " + path);
    std::size_t total = 0;
    for (std::size_t i = 0; i + 1 < p.dims.size(); ++i) {
        total += static_cast<std::size_t>(p.dims[i]) * p.dims[i + 1] + p.dims[i + 1];
    }
    p.values.reserve(total);
    for (std::size_t i = 0; i < total; ++i) p.values.push_back(detail::read_le_double(in));
    return p;
}

}  // namespace pqos
