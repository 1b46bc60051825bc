#pragma once

// Platform-independent random numbers. xoshiro256** seeded through
// splitmix64; substream i of master seed m starts from
//     splitmix64_mix(m + (i + 1) * 0x9E3779B97F4A7C15)
// so streams are reproducible bit for bit on every platform and never
// depend on scheduling.

#include <array>
#include <cstdint>

namespace zeronoise {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit constexpr Xoshiro256(std::uint64_t seed) noexcept {
        std::uint64_t x = seed;
        for (auto& word : state_) {
            x += kGoldenGamma;
            word = splitmix64_mix(x);
        }
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    constexpr result_type operator()() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
};

/// Master seed plus the substream splitting rule documented above.
struct SeedPolicy {
    std::uint64_t master_seed = 0;

    constexpr std::uint64_t substream_seed(std::uint64_t index) const noexcept {
        return splitmix64_mix(master_seed + (index + 1) * kGoldenGamma);
    }

    constexpr Xoshiro256 stream(std::uint64_t index) const noexcept {
        return Xoshiro256(substream_seed(index));
    }

    /// Policy for a nested family of streams (e.g. one per sweep point).
    constexpr SeedPolicy child(std::uint64_t index) const noexcept {
        return SeedPolicy{substream_seed(index) ^ 0xD1B54A32D192ED03ULL};
    }
};

}  // namespace zeronoise
