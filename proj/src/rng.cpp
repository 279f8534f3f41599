#include "ridersim/rng.hpp"

#include <cmath>

namespace ridersim {

std::int64_t RandomStream::next_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(next_u64());  // full span
    // Lemire's multiply-shift with rejection of the biased zone.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * range;
    auto low = static_cast<std::uint64_t>(m);
    if (low < range) {
        const std::uint64_t threshold = (0 - range) % range;
        while (low < threshold) {
            x = next_u64();
            m = static_cast<__uint128_t>(x) * range;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return lo + static_cast<std::int64_t>(m >> 64);
}

double RandomStream::normal(double mean, double stddev) {
    // Box-Muller, cosine branch only: two uniforms per draw, no carried
    // state, so the consumption pattern is easy to reason about.
    double u1 = next_double();
    const double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
}

std::int64_t RandomStream::poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    std::int64_t count = 0;
    // Split large rates into exp(700)-safe chunks; a Poisson(a+b) variate is
    // the sum of independent Poisson(a) and Poisson(b) variates.
    while (lambda > 30.0) {
        const double chunk = 15.0;
        const double limit = std::exp(-chunk);
        double product = next_double();
        std::int64_t k = 0;
        while (product > limit) {
            ++k;
            product *= next_double();
        }
        count += k;
        lambda -= chunk;
    }
    const double limit = std::exp(-lambda);
    double product = next_double();
    std::int64_t k = 0;
    while (product > limit) {
        ++k;
        product *= next_double();
    }
    return count + k;
}

RandomStream substream(std::uint64_t master_seed, std::string_view name,
                       std::uint64_t index) {
    // FNV-1a over the name, then fold seed and index through splitmix64 so
    // nearby seeds and indices land far apart.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    std::uint64_t state = master_seed;
    std::uint64_t mixed = splitmix64_next(state);
    state ^= h;
    mixed ^= splitmix64_next(state);
    state ^= index * 0x2545f4914f6cdd1dULL + 0x9e3779b97f4a7c15ULL;
    mixed ^= splitmix64_next(state);
    return RandomStream(mixed);
}

}  // namespace ridersim
