// Deterministic random streams.
//
// Every random draw in the engine comes from a named substream derived from
// the master seed, so placement, order generation, and per-rider decisions
// consume independent sequences and results do not depend on iteration order
// or thread count. Generators and distributions are implemented here rather
// than taken from <random> because libstdc++ leaves distribution algorithms
// unspecified and we need byte-identical output across toolchains.
#pragma once

#include <cstdint>
#include <string_view>

namespace ridersim {

// One splitmix64 step. Decent avalanche, also used to hash stream names.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class RandomStream {
public:
    RandomStream() = default;
    explicit RandomStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64_next(state_); }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [lo, hi], inclusive. Unbiased via widening multiply
    // with rejection.
    std::int64_t next_int(std::int64_t lo, std::int64_t hi);

    double normal(double mean, double stddev);

    // Poisson draw. Knuth's product method below lambda ~ 30; for larger
    // rates the mean is split into chunks so the running product stays away
    // from underflow. Exact distribution either way.
    std::int64_t poisson(double lambda);

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_ = 0x853c49e6748fea9bULL;
};

// Derives the generator for a named substream of a master seed. Streams with
// distinct (name, index) pairs are statistically independent.
RandomStream substream(std::uint64_t master_seed, std::string_view name,
                       std::uint64_t index = 0);

}  // namespace ridersim
