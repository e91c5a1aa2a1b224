#include "parcon/random.hpp"

#include <cmath>
#include <numbers>

namespace parcon {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t repetition_seed(std::uint64_t base_seed, std::uint64_t rep) {
    return splitmix64(splitmix64(base_seed) ^ splitmix64(rep + 0x632BE59BD9B4E019ull));
}

std::uint64_t Rng::below(std::uint64_t bound) {
    using u128 = unsigned __int128;
    std::uint64_t x = next();
    u128 m = static_cast<u128>(x) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            x = next();
            m = static_cast<u128>(x) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

IndexPermutation::IndexPermutation(std::uint64_t n, std::uint64_t seed) : n_(n) {
    while (half_bits_ < 32 && (std::uint64_t{1} << (2 * half_bits_)) < n_) ++half_bits_;
    half_mask_ = (std::uint64_t{1} << half_bits_) - 1;
    std::uint64_t state = seed;
    for (auto& k : keys_) {
        state = splitmix64(state);
        k = state;
    }
}

std::uint64_t IndexPermutation::encrypt(std::uint64_t x) const {
    std::uint64_t left = x >> half_bits_;
    std::uint64_t right = x & half_mask_;
    for (const auto key : keys_) {
        const std::uint64_t mixed = left ^ (splitmix64(right ^ key) & half_mask_);
        left = right;
        right = mixed;
    }
    return (left << half_bits_) | right;
}

std::uint64_t IndexPermutation::operator()(std::uint64_t index) const {
    std::uint64_t y = encrypt(index);
    while (y >= n_) y = encrypt(y);
    return y;
}

}  // namespace parcon
