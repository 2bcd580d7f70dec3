#pragma once

#include <cstdint>
#include <initializer_list>

namespace vrs {

/// splitmix64 step (Vigna's public-domain mixer). Used both as a
/// small counter-based generator and to derive child seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Hash a list of 64-bit words into one seed. Order-sensitive.
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t state = 0x6a09e667f3bcc909ULL;  // sqrt(2) fraction bits
    for (std::uint64_t p : parts) {
        state ^= splitmix64(state) + p;
        (void)splitmix64(state);
    }
    return splitmix64(state);
}

/// Tiny deterministic PRNG with O(1) seeding, cheap enough to construct
/// per draw. Streams derived from distinct seeds are independent for
/// the Monte Carlo purposes of this project.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// One Bernoulli(p) draw.
    bool next_bernoulli(double p) { return next_double() < p; }

private:
    std::uint64_t state_;
};

}  // namespace vrs
