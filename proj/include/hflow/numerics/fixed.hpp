// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <string>

#include "hflow/error.hpp"

namespace hflow {

/// `<W,I>` two's-complement fixed point: W total bits, I integer bits
/// including the sign. Quantization truncates toward -inf, overflow wraps.
struct FixedFormat {
    int width = 32;
    int int_bits = 16;

    FixedFormat() = default;
    FixedFormat(int w, int i) : width(w), int_bits(i) {
        if (w < 2 || w > 64) throw FormatError("fixed width must be in [2, 64], got " + std::to_string(w));
        if (i < 1 || i > w) throw FormatError("fixed int bits must be in [1, W], got " + std::to_string(i));
    }

    int frac_bits() const noexcept { return width - int_bits; }
    double resolution() const noexcept { return std::ldexp(1.0, -frac_bits()); }
    double min_value() const noexcept { return -std::ldexp(1.0, int_bits - 1); }
    double max_value() const noexcept { return std::ldexp(1.0, int_bits - 1) - resolution(); }

    bool operator==(const FixedFormat&) const = default;
};

/// Raw W-bit payload, sign-extended into 64 bits.
struct FixedRaw {
    std::int64_t raw = 0;

    friend auto operator<=>(FixedRaw, FixedRaw) = default;
};

/// A fixed-point value together with its format.
struct FixedValue {
    std::int64_t raw = 0;
    FixedFormat format;

    bool operator==(const FixedValue&) const = default;
};

namespace detail {

using i128 = __int128;
using u128 = unsigned __int128;

/// Reduces v modulo 2^W into the signed W-bit range.
inline std::int64_t wrap_to_width(i128 v, int width, bool* wrapped) noexcept {
    const u128 mask = (width == 128) ? ~u128{0} : ((u128{1} << width) - 1);
    u128 u = static_cast<u128>(v) & mask;
    const u128 sign = u128{1} << (width - 1);
    i128 out = static_cast<i128>(u);
    if (u & sign) out -= static_cast<i128>(u128{1} << width);
    if (wrapped && out != v) *wrapped = true;
    return static_cast<std::int64_t>(out);
}

/// Truncating quantization of an arbitrary finite long double.
inline std::int64_t quantize_fixed(long double x, const FixedFormat& f, bool* wrapped) noexcept {
    long double y = std::floor(std::ldexp(x, f.frac_bits()));
    const long double modulus = std::ldexp(1.0L, f.width);
    bool big = false;
    if (std::fabs(y) >= modulus) {
        // fmod is exact; the remainder keeps the residue class modulo 2^W
        y = std::fmod(y, modulus);
        big = true;
    }
    std::int64_t out = wrap_to_width(static_cast<i128>(y), f.width, wrapped);
    if (big && wrapped) *wrapped = true;
    return out;
}

inline long double widen_fixed(std::int64_t raw, const FixedFormat& f) noexcept {
    return std::ldexp(static_cast<long double>(raw), -f.frac_bits());
}

}  // namespace detail

}  // namespace hflow
