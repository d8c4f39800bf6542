#pragma once

#include <cstdint>
#include <random>

namespace nw {

using Engine = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Child stream seed; independent of the order in which children are drawn.
constexpr std::uint64_t child_seed(std::uint64_t parent, std::uint64_t index) noexcept {
    return mix64(mix64(parent) ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

// SplitMix64 sequence. Cheap to construct; one per walk.
class WalkEngine {
public:
    using result_type = std::uint64_t;
    explicit WalkEngine(std::uint64_t seed) noexcept : state_(seed) {}
    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }
    result_type operator()() noexcept {
        const result_type out = mix64(state_);
        state_ += 0x9E3779B97F4A7C15ULL;
        return out;
    }

private:
    std::uint64_t state_;
};

// Uniform integer in [0, bound). bound must be > 0.
template <std::uniform_random_bit_generator G>
std::uint64_t uniform_index(G& rng, std::uint64_t bound) {
    return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(rng);
}

template <std::uniform_random_bit_generator G>
double uniform_real(G& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

} // namespace nw
