#pragma once

#include <array>
#include <cstdint>
#include <random>

namespace parcon {

std::uint64_t splitmix64(std::uint64_t x);

// Seed of repetition `rep` derived from the base seed; distinct repetitions
// get statistically independent streams and the mapping is reproducible.
std::uint64_t repetition_seed(std::uint64_t base_seed, std::uint64_t rep);

// Thin wrapper over mt19937_64. Integer and real draws are implemented here
// rather than with <random> distributions so sequences are identical across
// standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    // Uniform on [0, bound), bound > 0 (Lemire's multiply-shift with rejection).
    std::uint64_t below(std::uint64_t bound);
    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Standard normal via Box-Muller.
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Keyed pseudorandom bijection on {0, ..., n-1}: a balanced Feistel network on
// the smallest even-bit domain covering n, with cycle walking. Evaluated
// positionally, so no permutation table is ever stored.
class IndexPermutation {
public:
    IndexPermutation(std::uint64_t n, std::uint64_t seed);

    std::uint64_t operator()(std::uint64_t index) const;
    std::uint64_t size() const noexcept { return n_; }

private:
    std::uint64_t encrypt(std::uint64_t x) const;

    static constexpr int kRounds = 6;
    std::uint64_t n_;
    int half_bits_ = 1;
    std::uint64_t half_mask_ = 1;
    std::array<std::uint64_t, kRounds> keys_{};
};

}  // namespace parcon
