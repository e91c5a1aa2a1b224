#pragma once

#include <array>
#include <cstdint>

namespace parcon {

// Fixed-point superaccumulator holding the exact sum of any number of finite
// doubles (up to 2^62 additions). Two accumulators that received the same
// multiset of values compare equal and round to the same double no matter
// how the additions were split or ordered, which is what makes partitioned
// sums bit-identical to single-pass sums.
class ExactSum {
public:
    ExactSum() = default;

    void add(double x);
    // Adds a*b exactly (two-product via fma); exact unless the product underflows.
    void add_product(double a, double b);
    ExactSum& operator+=(const ExactSum& other);

    // Correctly rounded (round-half-even) value of the exact sum.
    double value() const;
    // Correctly rounded value of (exact sum) / divisor.
    double quotient(std::uint64_t divisor) const;
    bool is_zero() const;

    friend bool operator==(const ExactSum& a, const ExactSum& b);

private:
    // 32-bit digits; digit 0 has weight 2^-1074 (smallest subnormal).
    static constexpr int kDigitBits = 32;
    static constexpr int kDigits = 72;
    // Each add moves a digit by < 2^32, so 2^30 adds stay well inside int64.
    static constexpr std::uint32_t kNormalizeEvery = 1u << 30;

    void normalize();
    // Normalised magnitude digits; returns true when the sum is negative.
    bool magnitude(std::array<std::int64_t, kDigits>& out) const;
    static double round_digits(const std::array<std::int64_t, kDigits>& d, bool negative, bool sticky_below);

    std::array<std::int64_t, kDigits> digits_{};
    std::uint32_t pending_ = 0;
};

}  // namespace parcon
