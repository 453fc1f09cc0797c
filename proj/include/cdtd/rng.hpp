#pragma once

#include <cmath>
#include <cstdint>

namespace cdtd {

// Deterministic PRNG (xoshiro256++) with explicit uniform/normal draws.
// std::mt19937_64 is portable but the std distributions are not, so all
// sampling goes through this class to keep seeded runs byte-identical.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t z = seed;
        for (auto& si : s_) {
            z += 0x9e3779b97f4a7c15ULL;
            uint64_t x = z;
            x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
            x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
            si = x ^ (x >> 31);
        }
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    uint64_t uniform_below(uint64_t n) {
        // rejection sampling to avoid modulo bias
        const uint64_t lim = UINT64_MAX - UINT64_MAX % n;
        uint64_t x = next_u64();
        while (x >= lim) x = next_u64();
        return x % n;
    }

    // standard normal via Box-Muller (consumes two uniforms per draw)
    double normal() {
        double u1 = 1.0 - uniform();  // in (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // independent child stream; used to give rows/steps their own streams
    Rng fork(uint64_t key) const {
        uint64_t h = s_[0] ^ (key + 0x9e3779b97f4a7c15ULL + (s_[1] << 6) + (s_[2] >> 2));
        h ^= s_[3];
        return Rng(h);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

}  // namespace cdtd
