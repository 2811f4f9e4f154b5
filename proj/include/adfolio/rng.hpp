#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <stdexcept>

namespace adfolio {

// splitmix64 step; used to expand seeds and to mix stream keys.
inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic xoshiro256++ generator with hand-rolled distributions.
///
/// All transforms (uniform, gaussian, binomial) are implemented here rather
/// than via <random> distributions, so output sequences are bit-identical
/// for a given seed on every platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[3] = 1;
    }

    /// Independent substream keyed by (master, k0, k1, ...). Adding streams
    /// with new keys never perturbs draws of existing ones.
    static Rng derive(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
        std::uint64_t sm = master;
        std::uint64_t h = splitmix64(sm);
        for (const std::uint64_t key : keys) {
            sm = h ^ (key + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
            h = splitmix64(sm);
        }
        return Rng(h);
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1), 53 random bits.
    double uniform01() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) noexcept {
        return lo + uniform01() * (hi - lo);
    }

    bool bernoulli(double p) noexcept { return uniform01() < p; }

    /// Standard normal via Box-Muller (cosine branch only, no cached spare).
    double gaussian() noexcept {
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double gaussian(double mu, double sigma) noexcept { return mu + sigma * gaussian(); }

    /// Exact Binomial(n, p) sample by summing geometric waiting times between
    /// successes; O(n * min(p, 1-p)) expected work, no pmf underflow issues.
    long long binomial(long long n, double p) {
        if (n < 0) throw std::invalid_argument("binomial: negative trial count");
        if (n == 0 || p <= 0.0) return 0;
        if (p >= 1.0) return n;
        const bool flipped = p > 0.5;
        const double pp = flipped ? 1.0 - p : p;
        const double log_q = std::log1p(-pp);
        long long successes = 0;
        double consumed = 0.0;
        while (true) {
            const double u = uniform01();
            consumed += std::floor(std::log1p(-u) / log_q) + 1.0;
            if (consumed > static_cast<double>(n)) break;
            ++successes;
        }
        return flipped ? n - successes : successes;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

}  // namespace adfolio
