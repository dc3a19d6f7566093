#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace agentforest {

// splitmix64 step (Vigna's public-domain generator). Used both as a seed
// expander for Xoshiro256ss and as the finalizer of derive_seed, so that
// seed sequences are reproducible bit-for-bit across platforms.
inline uint64_t splitmix64_next(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256** 1.0, seeded through splitmix64 from a single 64-bit value.
// All randomness in the project flows through this generator; no
// platform-dependent std distributions are used.
class Xoshiro256ss {
public:
    explicit Xoshiro256ss(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : state_) w = splitmix64_next(sm);
    }

    uint64_t next() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // 53-bit mantissa double in [0, 1)
    double next_double() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // unbiased integer in [0, n) via Lemire's multiply-reject method
    uint64_t bounded(uint64_t n) {
        if (n == 0) return 0;
        unsigned __int128 m =
            static_cast<unsigned __int128>(next()) * static_cast<unsigned __int128>(n);
        auto lo = static_cast<uint64_t>(m);
        if (lo < n) {
            const uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                m = static_cast<unsigned __int128>(next()) * static_cast<unsigned __int128>(n);
                lo = static_cast<uint64_t>(m);
            }
        }
        return static_cast<uint64_t>(m >> 64);
    }

    // inclusive range
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const auto span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(bounded(span));
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::array<uint64_t, 4> state_{};
};

// Per-sample seed: hash of (run_seed, task_id, sample_index). The same
// triple yields the same seed regardless of scheduling or thread count.
inline uint64_t derive_seed(uint64_t run_seed, std::string_view task_id, uint64_t sample_index) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    auto mix_byte = [&h](unsigned char c) {
        h ^= c;
        h *= 0x100000001b3ULL;
    };
    for (int i = 0; i < 8; ++i) mix_byte(static_cast<unsigned char>(run_seed >> (8 * i)));
    for (char c : task_id) mix_byte(static_cast<unsigned char>(c));
    for (int i = 0; i < 8; ++i) mix_byte(static_cast<unsigned char>(sample_index >> (8 * i)));
    uint64_t st = h;
    return splitmix64_next(st);
}

}  // namespace agentforest
