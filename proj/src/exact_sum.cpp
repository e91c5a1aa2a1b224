#include "parcon/exact_sum.hpp"

#include "parcon/error.hpp"

#include <bit>
#include <cmath>

namespace parcon {

namespace {

using u128 = unsigned __int128;

int bit_length(u128 v) {
    const auto hi = static_cast<std::uint64_t>(v >> 64);
    if (hi != 0) return 128 - std::countl_zero(hi);
    const auto lo = static_cast<std::uint64_t>(v);
    return 64 - std::countl_zero(lo);
}

}  // namespace

void ExactSum::add(double x) {
    if (!std::isfinite(x)) fail(ErrorCode::NonfiniteValue, "exact sum received a non-finite value");
    if (x == 0.0) return;
    if (pending_ >= kNormalizeEvery) normalize();

    const auto bits = std::bit_cast<std::uint64_t>(x);
    const bool negative = (bits >> 63) != 0;
    const auto biased = static_cast<int>((bits >> 52) & 0x7FF);
    std::uint64_t mantissa = bits & ((std::uint64_t{1} << 52) - 1);
    int exponent = -1074;
    if (biased != 0) {
        mantissa |= std::uint64_t{1} << 52;
        exponent = biased - 1075;
    }

    const int position = exponent + 1074;
    const int digit = position / kDigitBits;
    const u128 shifted = static_cast<u128>(mantissa) << (position % kDigitBits);
    const std::int64_t sign = negative ? -1 : 1;
    digits_[digit] += sign * static_cast<std::int64_t>(shifted & 0xFFFFFFFFu);
    digits_[digit + 1] += sign * static_cast<std::int64_t>((shifted >> 32) & 0xFFFFFFFFu);
    digits_[digit + 2] += sign * static_cast<std::int64_t>(shifted >> 64);
    ++pending_;
}

void ExactSum::add_product(double a, double b) {
    const double p = a * b;
    const double e = std::fma(a, b, -p);
    add(p);
    add(e);
}

ExactSum& ExactSum::operator+=(const ExactSum& other) {
    normalize();
    ExactSum rhs = other;
    rhs.normalize();
    for (int i = 0; i < kDigits; ++i) digits_[i] += rhs.digits_[i];
    normalize();
    return *this;
}

void ExactSum::normalize() {
    for (int i = 0; i + 1 < kDigits; ++i) {
        const std::int64_t carry = digits_[i] >> kDigitBits;  // floor division
        digits_[i] -= carry * (std::int64_t{1} << kDigitBits);
        digits_[i + 1] += carry;
    }
    pending_ = 0;
}

bool ExactSum::is_zero() const {
    ExactSum copy = *this;
    copy.normalize();
    for (auto d : copy.digits_)
        if (d != 0) return false;
    return true;
}

bool operator==(const ExactSum& a, const ExactSum& b) {
    ExactSum x = a;
    ExactSum y = b;
    x.normalize();
    y.normalize();
    return x.digits_ == y.digits_;
}

bool ExactSum::magnitude(std::array<std::int64_t, kDigits>& out) const {
    ExactSum copy = *this;
    copy.normalize();
    const bool negative = copy.digits_[kDigits - 1] < 0;
    if (negative) {
        for (auto& v : copy.digits_) v = -v;
        copy.normalize();
    }
    out = copy.digits_;
    return negative;
}

double ExactSum::round_digits(const std::array<std::int64_t, kDigits>& d, bool negative, bool sticky_below) {
    int top = kDigits - 1;
    while (top >= 0 && d[top] == 0) --top;
    if (top < 0) return 0.0;

    auto digit_at = [&](int i) -> u128 { return i < 0 ? 0 : static_cast<u128>(static_cast<std::uint64_t>(d[i])); };
    const u128 head = (digit_at(top) << 64) | (digit_at(top - 1) << 32) | digit_at(top - 2);
    bool sticky = sticky_below;
    for (int i = top - 3; i >= 0 && !sticky; --i) sticky = d[i] != 0;
    const int base = kDigitBits * (top - 2) - 1074;

    const int shift = bit_length(head) - 53;
    double magnitude;
    if (shift <= 0) {
        magnitude = std::ldexp(static_cast<double>(static_cast<std::uint64_t>(head)), base);
    } else {
        auto mantissa = static_cast<std::uint64_t>(head >> shift);
        const u128 rem = head & ((u128{1} << shift) - 1);
        const u128 half = u128{1} << (shift - 1);
        if (rem > half || (rem == half && (sticky || (mantissa & 1u)))) ++mantissa;
        magnitude = std::ldexp(static_cast<double>(mantissa), shift + base);
    }
    return negative ? -magnitude : magnitude;
}

double ExactSum::value() const {
    std::array<std::int64_t, kDigits> d;
    const bool negative = magnitude(d);
    return round_digits(d, negative, false);
}

double ExactSum::quotient(std::uint64_t divisor) const {
    if (divisor == 0) fail(ErrorCode::InvariantViolation, "exact sum divided by zero");
    std::array<std::int64_t, kDigits> d;
    const bool negative = magnitude(d);
    // Schoolbook long division in base 2^32; each quotient digit stays below 2^32.
    u128 remainder = 0;
    for (int i = kDigits - 1; i >= 0; --i) {
        const u128 current = (remainder << kDigitBits) | static_cast<std::uint64_t>(d[i]);
        d[i] = static_cast<std::int64_t>(current / divisor);
        remainder = current % divisor;
    }
    return round_digits(d, negative, remainder != 0);
}

}  // namespace parcon
