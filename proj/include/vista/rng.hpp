#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

namespace vista {

// Portable seeded RNG used everywhere randomness is needed.
//
// Generator: xoshiro256** seeded through splitmix64. All outputs are defined
// purely in terms of 64-bit integer arithmetic, so sequences are identical
// across platforms and standard libraries (std::uniform_* distributions are
// not portable and are deliberately avoided).
//
// Stream-split rule: independent streams are derived with derive_seed(),
// which hashes the parent seed together with integer tags via splitmix64.
// A generation run inside an experiment uses
//   derive_seed(base_seed, scene_index, variant_index)
// so per-scene work can be scheduled in any order or in parallel without
// changing any sampled token.

inline uint64_t splitmix64_next(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t tag_a, uint64_t tag_b = 0, uint64_t tag_c = 0) {
    uint64_t s = base;
    uint64_t h = splitmix64_next(s);
    s ^= tag_a * 0x9e3779b97f4a7c15ull;
    h ^= splitmix64_next(s);
    s ^= tag_b * 0xc2b2ae3d27d4eb4full;
    h ^= splitmix64_next(s);
    s ^= tag_c * 0x165667b19e3779f9ull;
    h ^= splitmix64_next(s);
    return h;
}

// Derive a seed from a short string tag (used for named substreams, e.g. "emb").
inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t tag_b = 0) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return derive_seed(base, h, tag_b);
}

class Rng {
public:
    explicit Rng(uint64_t seed = 0) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64_next(sm);
        have_spare_ = false;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound). Lemire's multiply-shift with rejection,
    // exact and portable.
    uint64_t next_below(uint64_t bound) {
        if (bound == 0) return 0;
        while (true) {
            uint64_t x = next_u64();
            __uint128_t m = static_cast<__uint128_t>(x) * bound;
            uint64_t lo = static_cast<uint64_t>(m);
            if (lo >= bound || lo >= (0ull - bound) % bound) {
                return static_cast<uint64_t>(m >> 64);
            }
        }
    }

    // Standard normal via Box-Muller (deterministic, no std::normal_distribution).
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    Rng split(uint64_t tag) { return Rng(derive_seed(next_u64(), tag)); }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t s_[4];
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace vista
