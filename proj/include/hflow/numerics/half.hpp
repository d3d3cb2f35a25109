// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>

#if defined(__GNUC__) || defined(__clang__)
#define HFLOW_ALWAYS_INLINE [[gnu::always_inline]] inline
#else
#define HFLOW_ALWAYS_INLINE inline
#endif

namespace hflow {

/// IEEE-754 binary16 storage. Arithmetic lives in HalfArith; this type only
/// holds bits and converts.
struct Half {
    std::uint16_t bits = 0;

    friend bool operator==(Half a, Half b) noexcept { return a.bits == b.bits; }
};

namespace detail {

// Round-to-nearest-even narrowing of an exact binary64 value to binary16.
inline std::uint16_t double_to_half_bits(double x) noexcept {
    const std::uint64_t b = std::bit_cast<std::uint64_t>(x);
    const auto sign = static_cast<std::uint16_t>((b >> 48) & 0x8000u);
    const int exp = static_cast<int>((b >> 52) & 0x7ffu);
    const std::uint64_t mant = b & ((std::uint64_t{1} << 52) - 1);

    if (exp == 0x7ff) return mant ? static_cast<std::uint16_t>(sign | 0x7e00u) : static_cast<std::uint16_t>(sign | 0x7c00u);
    if (exp == 0) return sign;  // binary64 subnormals are far below half's range

    const int e = exp - 1023;
    const std::uint64_t m = mant | (std::uint64_t{1} << 52);
    auto round_shift = [](std::uint64_t v, int s) {
        if (s >= 64) return std::uint64_t{0};
        std::uint64_t q = v >> s;
        const std::uint64_t rem = v & ((std::uint64_t{1} << s) - 1);
        const std::uint64_t halfway = std::uint64_t{1} << (s - 1);
        if (rem > halfway || (rem == halfway && (q & 1u))) ++q;
        return q;
    };

    if (e > 15) return static_cast<std::uint16_t>(sign | 0x7c00u);
    if (e < -14) {
        // subnormal: units of 2^-24
        const std::uint64_t q = round_shift(m, 28 - e);
        return static_cast<std::uint16_t>(sign | q);
    }
    const std::uint64_t q = round_shift(mant, 42);
    // a carry out of the mantissa bumps the exponent, possibly into infinity
    const std::uint64_t out = (static_cast<std::uint64_t>(e + 15) << 10) + q;
    if (out >= 0x7c00u) return static_cast<std::uint16_t>(sign | 0x7c00u);
    return static_cast<std::uint16_t>(sign | out);
}

HFLOW_ALWAYS_INLINE float half_bits_to_float(std::uint16_t h) noexcept {
    constexpr std::uint32_t kShiftedExp = 0x7c00u << 13;
    const float magic = std::bit_cast<float>(113u << 23);
    std::uint32_t out = static_cast<std::uint32_t>(h & 0x7fffu) << 13;
    const std::uint32_t exp = kShiftedExp & out;
    out += (127u - 15u) << 23;
    if (exp == kShiftedExp) {
        out += (128u - 16u) << 23;  // inf or NaN
    } else if (exp == 0) {
        // subnormal: renormalize through a float subtraction, which is exact
        out += 1u << 23;
        out = std::bit_cast<std::uint32_t>(std::bit_cast<float>(out) - magic);
    }
    out |= static_cast<std::uint32_t>(h & 0x8000u) << 16;
    return std::bit_cast<float>(out);
}

// Round-to-nearest-even narrowing of binary32 to binary16 using integer
// rounding on the bit pattern; subnormal results round through a float add.
HFLOW_ALWAYS_INLINE std::uint16_t float_to_half_bits(float f) noexcept {
    constexpr std::uint32_t kF32Inf = 255u << 23;
    constexpr std::uint32_t kF16Overflow = (127u + 16u) << 23;
    constexpr std::uint32_t kMinNormal = 113u << 23;
    const float denorm_magic = std::bit_cast<float>(((127u - 15u) + (23u - 10u) + 1u) << 23);

    std::uint32_t u = std::bit_cast<std::uint32_t>(f);
    const std::uint32_t sign = u & 0x80000000u;
    u ^= sign;
    std::uint32_t out;
    if (u >= kF16Overflow) {
        out = u > kF32Inf ? 0x7e00u : 0x7c00u;
    } else if (u < kMinNormal) {
        const float shifted = std::bit_cast<float>(u) + denorm_magic;
        out = std::bit_cast<std::uint32_t>(shifted) - std::bit_cast<std::uint32_t>(denorm_magic);
    } else {
        const std::uint32_t mant_odd = (u >> 13) & 1u;
        u += ((15u - 127u) << 23) + 0xfffu;
        u += mant_odd;
        out = u >> 13;
    }
    return static_cast<std::uint16_t>(out | (sign >> 16));
}

}  // namespace detail

inline Half half_from_double(double x) noexcept { return Half{detail::double_to_half_bits(x)}; }
HFLOW_ALWAYS_INLINE Half half_from_float(float x) noexcept { return Half{detail::float_to_half_bits(x)}; }
HFLOW_ALWAYS_INLINE float half_to_float(Half h) noexcept { return detail::half_bits_to_float(h.bits); }
inline double half_to_double(Half h) noexcept { return static_cast<double>(detail::half_bits_to_float(h.bits)); }

inline bool half_is_nan(Half h) noexcept { return (h.bits & 0x7c00u) == 0x7c00u && (h.bits & 0x3ffu) != 0; }

}  // namespace hflow
