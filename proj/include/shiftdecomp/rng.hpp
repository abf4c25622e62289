#pragma once

// Deterministic RNG utilities. std:: distributions are implementation-defined,
// so all sampling goes through these to keep outputs identical across
// platforms, runs, and thread counts.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

namespace shiftdecomp {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stable 64-bit hash of a label, for deriving independent seed streams from a
// master seed, e.g. derive_seed(seed, "split") or per-subset streams.
inline std::uint64_t hash_label(std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t salt = 0) {
    std::uint64_t s = master ^ (hash_label(label) + 0x9e3779b97f4a7c15ULL + (salt << 1));
    splitmix64(s);
    return splitmix64(s);
}

// xoshiro256++ core.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0,1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire-style rejection to avoid modulo bias.
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t t = -n % n;
            while (lo < t) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    double normal();  // standard normal via inverse CDF

    bool bernoulli(double p) { return uniform() < p; }

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

// Inverse of the standard normal CDF (Wichura, AS 241, double precision).
double normal_quantile(double p);

inline double Rng::normal() {
    // uniform() is in [0,1); shift into (0,1) to keep the quantile finite.
    double u = uniform();
    u = (u <= 0.0) ? 0x1.0p-54 : u;
    return normal_quantile(u);
}

}  // namespace shiftdecomp
