#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace cogmesh {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// A named substream of the run seed. The engine is the standard 64-bit
// Mersenne twister, whose output sequence is fixed by the standard; the
// conversions below avoid <random> distributions, whose algorithms are
// implementation-defined.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::string_view name)
        : gen_(splitmix64(seed ^ splitmix64(fnv1a(name)))) {}

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Exponential with the given rate; rate must be positive.
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 gen_;
};

} // namespace cogmesh
