// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

#include "hflow/error.hpp"
#include "hflow/numerics/fixed.hpp"
#include "hflow/numerics/half.hpp"

namespace hflow {

/// Sticky event counters for one evaluation context. Never shared between
/// concurrently running contexts; merge with += after joining.
struct Diagnostics {
    std::uint64_t wrap_events = 0;        ///< fixed-point overflow wraparounds
    std::uint64_t saturation_events = 0;  ///< NaN/inf forced into a fixed format
    std::uint64_t domain_events = 0;      ///< ln/sqrt outside their domain inside a kernel
    std::uint64_t martingale_fallbacks = 0;
    std::uint64_t nan_cells = 0;          ///< reduction cells where every asset was NaN

    Diagnostics& operator+=(const Diagnostics& o) noexcept {
        wrap_events += o.wrap_events;
        saturation_events += o.saturation_events;
        domain_events += o.domain_events;
        martingale_fallbacks += o.martingale_fallbacks;
        nan_cells += o.nan_cells;
        return *this;
    }

    std::uint64_t wraps() const noexcept { return wrap_events + saturation_events; }
    std::uint64_t warnings() const noexcept { return domain_events + martingale_fallbacks + nan_cells; }

    bool operator==(const Diagnostics&) const = default;
};

enum class FormatKind { float64, float32, float16, fixed };

/// Tagged numeric format. Canonical spellings: `double`, `float`, `half`,
/// `fixed:<W>:<I>`.
struct NumericFormat {
    FormatKind kind = FormatKind::float64;
    FixedFormat fixed{};

    static NumericFormat float64() { return {FormatKind::float64, {}}; }
    static NumericFormat float32() { return {FormatKind::float32, {}}; }
    static NumericFormat float16() { return {FormatKind::float16, {}}; }
    static NumericFormat fixed_point(int width, int int_bits) { return {FormatKind::fixed, FixedFormat(width, int_bits)}; }

    static NumericFormat parse(std::string_view text) {
        if (text == "double") return float64();
        if (text == "float" || text == "single") return float32();
        if (text == "half") return float16();
        constexpr std::string_view prefix = "fixed:";
        if (text.substr(0, prefix.size()) == prefix) {
            const std::string rest(text.substr(prefix.size()));
            const auto colon = rest.find(':');
            if (colon == std::string::npos) throw FormatError("bad fixed format '" + std::string(text) + "', expected fixed:<W>:<I>");
            int w = 0, i = 0;
            try {
                std::size_t pos_w = 0, pos_i = 0;
                w = std::stoi(rest.substr(0, colon), &pos_w);
                i = std::stoi(rest.substr(colon + 1), &pos_i);
                if (pos_w != colon || pos_i != rest.size() - colon - 1) throw std::invalid_argument("trailing");
            } catch (const std::logic_error&) {
                throw FormatError("bad fixed format '" + std::string(text) + "', expected fixed:<W>:<I>");
            }
            return fixed_point(w, i);
        }
        throw FormatError("unknown numeric format '" + std::string(text) + "' (double, float, half, fixed:<W>:<I>)");
    }

    std::string to_string() const {
        switch (kind) {
            case FormatKind::float64: return "double";
            case FormatKind::float32: return "float";
            case FormatKind::float16: return "half";
            case FormatKind::fixed:
                return "fixed:" + std::to_string(fixed.width) + ":" + std::to_string(fixed.int_bits);
        }
        return "?";
    }

    /// Bytes one value occupies in the kernel.
    std::size_t value_bytes() const noexcept {
        switch (kind) {
            case FormatKind::float64: return 8;
            case FormatKind::float32: return 4;
            case FormatKind::float16: return 2;
            case FormatKind::fixed: return 8;
        }
        return 8;
    }

    bool operator==(const NumericFormat&) const = default;
};

// ---------------------------------------------------------------------------
// Arithmetic policies. Every kernel is a template over one of these; each
// operation returns a value already quantized into the format.
// ---------------------------------------------------------------------------

class ArithBase {
public:
    explicit ArithBase(Diagnostics* diag = nullptr) : diag_(diag) {}
    Diagnostics* diagnostics() const noexcept { return diag_; }

protected:
    void note_domain() const noexcept {
        if (diag_) ++diag_->domain_events;
    }
    Diagnostics* diag_;
};

class DoubleArith : public ArithBase {
public:
    using value_type = double;
    using ArithBase::ArithBase;

    NumericFormat format() const { return NumericFormat::float64(); }
    DoubleArith with_diagnostics(Diagnostics* d) const { return DoubleArith(d); }

    value_type from_real(double x) const noexcept { return x; }
    double to_real(value_type v) const noexcept { return v; }
    long double widen(value_type v) const noexcept { return v; }

    value_type add(value_type a, value_type b) const noexcept { return a + b; }
    value_type sub(value_type a, value_type b) const noexcept { return a - b; }
    value_type mul(value_type a, value_type b) const noexcept { return a * b; }
    value_type div(value_type a, value_type b) const noexcept { return a / b; }
    value_type neg(value_type a) const noexcept { return -a; }
    value_type exp(value_type a) const noexcept { return std::exp(a); }
    value_type log(value_type a) const noexcept {
        if (!(a > 0.0)) note_domain();
        return std::log(a);
    }
    value_type sqrt(value_type a) const noexcept {
        if (a < 0.0) note_domain();
        return std::sqrt(a);
    }

    bool less(value_type a, value_type b) const noexcept { return a < b; }
    bool is_nan(value_type a) const noexcept { return std::isnan(a); }
    bool is_zero(value_type a) const noexcept { return a == 0.0; }
    bool same(value_type a, value_type b) const noexcept {
        return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
    }
};

/// binary32; transcendentals are evaluated in binary64 and rounded once.
class FloatArith : public ArithBase {
public:
    using value_type = float;
    using ArithBase::ArithBase;

    NumericFormat format() const { return NumericFormat::float32(); }
    FloatArith with_diagnostics(Diagnostics* d) const { return FloatArith(d); }

    value_type from_real(double x) const noexcept { return static_cast<float>(x); }
    double to_real(value_type v) const noexcept { return v; }
    long double widen(value_type v) const noexcept { return v; }

    value_type add(value_type a, value_type b) const noexcept { return a + b; }
    value_type sub(value_type a, value_type b) const noexcept { return a - b; }
    value_type mul(value_type a, value_type b) const noexcept { return a * b; }
    value_type div(value_type a, value_type b) const noexcept { return a / b; }
    value_type neg(value_type a) const noexcept { return -a; }
    value_type exp(value_type a) const noexcept { return static_cast<float>(std::exp(static_cast<double>(a))); }
    value_type log(value_type a) const noexcept {
        if (!(a > 0.0f)) note_domain();
        return static_cast<float>(std::log(static_cast<double>(a)));
    }
    value_type sqrt(value_type a) const noexcept {
        if (a < 0.0f) note_domain();
        return std::sqrt(a);
    }

    bool less(value_type a, value_type b) const noexcept { return a < b; }
    bool is_nan(value_type a) const noexcept { return std::isnan(a); }
    bool is_zero(value_type a) const noexcept { return a == 0.0f; }
    bool same(value_type a, value_type b) const noexcept {
        return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b);
    }
};

/// Software binary16. Each operation runs in binary32 and rounds to nearest
/// even; for + - * / and sqrt that double rounding is still exact.
class HalfArith : public ArithBase {
public:
    using value_type = Half;
    using ArithBase::ArithBase;

    NumericFormat format() const { return NumericFormat::float16(); }
    HalfArith with_diagnostics(Diagnostics* d) const { return HalfArith(d); }

    value_type from_real(double x) const noexcept { return half_from_double(x); }
    double to_real(value_type v) const noexcept { return half_to_double(v); }
    long double widen(value_type v) const noexcept { return half_to_double(v); }

    HFLOW_ALWAYS_INLINE value_type add(value_type a, value_type b) const noexcept { return half_from_float(f(a) + f(b)); }
    HFLOW_ALWAYS_INLINE value_type sub(value_type a, value_type b) const noexcept { return half_from_float(f(a) - f(b)); }
    HFLOW_ALWAYS_INLINE value_type mul(value_type a, value_type b) const noexcept { return half_from_float(f(a) * f(b)); }
    HFLOW_ALWAYS_INLINE value_type div(value_type a, value_type b) const noexcept { return half_from_float(f(a) / f(b)); }
    HFLOW_ALWAYS_INLINE value_type neg(value_type a) const noexcept { return Half{static_cast<std::uint16_t>(a.bits ^ 0x8000u)}; }
    value_type exp(value_type a) const noexcept { return half_from_float(std::exp(f(a))); }
    value_type log(value_type a) const noexcept {
        if (!(f(a) > 0.0f)) note_domain();
        return half_from_float(std::log(f(a)));
    }
    value_type sqrt(value_type a) const noexcept {
        if (f(a) < 0.0f) note_domain();
        return half_from_float(std::sqrt(f(a)));
    }

    HFLOW_ALWAYS_INLINE bool less(value_type a, value_type b) const noexcept { return f(a) < f(b); }
    bool is_nan(value_type a) const noexcept { return half_is_nan(a); }
    bool is_zero(value_type a) const noexcept { return (a.bits & 0x7fffu) == 0; }
    bool same(value_type a, value_type b) const noexcept { return a.bits == b.bits; }

private:
    HFLOW_ALWAYS_INLINE static float f(value_type h) noexcept { return half_to_float(h); }
};

/// `<W,I>` fixed point. add/sub/mul are exact then truncated and wrapped;
/// div and transcendentals go through long double.
class FixedArith : public ArithBase {
public:
    using value_type = FixedRaw;

    explicit FixedArith(FixedFormat fmt, Diagnostics* diag = nullptr) : ArithBase(diag), fmt_(fmt) {}

    NumericFormat format() const { return {FormatKind::fixed, fmt_}; }
    const FixedFormat& fixed_format() const noexcept { return fmt_; }
    FixedArith with_diagnostics(Diagnostics* d) const { return FixedArith(fmt_, d); }

    value_type from_real(double x) const noexcept { return from_wide(static_cast<long double>(x)); }

    value_type from_wide(long double x) const noexcept {
        if (!std::isfinite(x)) {
            if (diag_) ++diag_->saturation_events;
            return {0};
        }
        bool wrapped = false;
        const auto raw = detail::quantize_fixed(x, fmt_, &wrapped);
        note_wrap(wrapped);
        return {raw};
    }

    double to_real(value_type v) const noexcept { return static_cast<double>(widen(v)); }
    long double widen(value_type v) const noexcept { return detail::widen_fixed(v.raw, fmt_); }

    value_type add(value_type a, value_type b) const noexcept {
        return wrap(static_cast<detail::i128>(a.raw) + b.raw);
    }
    value_type sub(value_type a, value_type b) const noexcept {
        return wrap(static_cast<detail::i128>(a.raw) - b.raw);
    }
    value_type mul(value_type a, value_type b) const noexcept {
        // >> on a negative __int128 is arithmetic, i.e. floor division by 2^F
        return wrap((static_cast<detail::i128>(a.raw) * b.raw) >> fmt_.frac_bits());
    }
    value_type div(value_type a, value_type b) const {
        if (b.raw == 0) throw FixedDivideByZero();
        return from_wide(static_cast<long double>(a.raw) / static_cast<long double>(b.raw));
    }
    value_type neg(value_type a) const noexcept { return wrap(-static_cast<detail::i128>(a.raw)); }
    value_type exp(value_type a) const noexcept { return from_wide(std::exp(widen(a))); }
    value_type log(value_type a) const noexcept {
        if (a.raw <= 0) note_domain();
        return from_wide(std::log(widen(a)));
    }
    value_type sqrt(value_type a) const noexcept {
        if (a.raw < 0) note_domain();
        return from_wide(std::sqrt(widen(a)));
    }

    bool less(value_type a, value_type b) const noexcept { return a.raw < b.raw; }
    bool is_nan(value_type) const noexcept { return false; }
    bool is_zero(value_type a) const noexcept { return a.raw == 0; }
    bool same(value_type a, value_type b) const noexcept { return a.raw == b.raw; }

private:
    value_type wrap(detail::i128 v) const noexcept {
        bool wrapped = false;
        const auto raw = detail::wrap_to_width(v, fmt_.width, &wrapped);
        note_wrap(wrapped);
        return {raw};
    }
    void note_wrap(bool wrapped) const noexcept {
        if (wrapped && diag_) ++diag_->wrap_events;
    }

    FixedFormat fmt_;
};

/// Calls `fn(arith)` with the policy matching `fmt`.
template <class Fn>
decltype(auto) visit_format(const NumericFormat& fmt, Diagnostics* diag, Fn&& fn) {
    switch (fmt.kind) {
        case FormatKind::float64: return std::forward<Fn>(fn)(DoubleArith(diag));
        case FormatKind::float32: return std::forward<Fn>(fn)(FloatArith(diag));
        case FormatKind::float16: return std::forward<Fn>(fn)(HalfArith(diag));
        case FormatKind::fixed: break;
    }
    return std::forward<Fn>(fn)(FixedArith(fmt.fixed, diag));
}

// ---------------------------------------------------------------------------
// Operator wrapper so kernel formulas read like formulas. Every operator
// dispatches to the policy, so each intermediate is quantized.
// ---------------------------------------------------------------------------

template <class Arith>
struct Num {
    using value_type = typename Arith::value_type;
    const Arith* ar;
    value_type v;

    friend Num operator+(Num a, Num b) { return {a.ar, a.ar->add(a.v, b.v)}; }
    friend Num operator-(Num a, Num b) { return {a.ar, a.ar->sub(a.v, b.v)}; }
    friend Num operator*(Num a, Num b) { return {a.ar, a.ar->mul(a.v, b.v)}; }
    friend Num operator/(Num a, Num b) { return {a.ar, a.ar->div(a.v, b.v)}; }
    friend Num operator-(Num a) { return {a.ar, a.ar->neg(a.v)}; }
    friend bool operator<(Num a, Num b) { return a.ar->less(a.v, b.v); }
    friend bool operator>(Num a, Num b) { return a.ar->less(b.v, a.v); }

    bool is_zero() const { return ar->is_zero(v); }
    double real() const { return ar->to_real(v); }
};

template <class Arith>
Num<Arith> num(const Arith& ar, double x) {
    return {&ar, ar.from_real(x)};
}
template <class Arith>
Num<Arith> wrap_num(const Arith& ar, typename Arith::value_type v) {
    return {&ar, v};
}
template <class Arith>
Num<Arith> exp(Num<Arith> a) {
    return {a.ar, a.ar->exp(a.v)};
}
template <class Arith>
Num<Arith> log(Num<Arith> a) {
    return {a.ar, a.ar->log(a.v)};
}
template <class Arith>
Num<Arith> sqrt(Num<Arith> a) {
    return {a.ar, a.ar->sqrt(a.v)};
}

// ---------------------------------------------------------------------------
// Type-erased scalar API.
// ---------------------------------------------------------------------------

using FormatValue = std::variant<double, float, Half, FixedValue>;

inline FormatValue quantize(double x, const NumericFormat& fmt, Diagnostics* diag = nullptr) {
    switch (fmt.kind) {
        case FormatKind::float64: return x;
        case FormatKind::float32: return static_cast<float>(x);
        case FormatKind::float16: return half_from_double(x);
        case FormatKind::fixed: break;
    }
    return FixedValue{FixedArith(fmt.fixed, diag).from_real(x).raw, fmt.fixed};
}

/// Quantizes a long double. For fixed formats wider than 53 bits this is the
/// exact inverse of `widen`.
inline FormatValue quantize_wide(long double x, const NumericFormat& fmt, Diagnostics* diag = nullptr) {
    if (fmt.kind == FormatKind::fixed) return FixedValue{FixedArith(fmt.fixed, diag).from_wide(x).raw, fmt.fixed};
    return quantize(static_cast<double>(x), fmt, diag);
}

inline NumericFormat format_of(const FormatValue& v) {
    switch (v.index()) {
        case 0: return NumericFormat::float64();
        case 1: return NumericFormat::float32();
        case 2: return NumericFormat::float16();
        default: return {FormatKind::fixed, std::get<FixedValue>(v).format};
    }
}

/// Exact widening to long double.
inline long double widen(const FormatValue& v) {
    return std::visit(
        [](const auto& x) -> long double {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Half>) {
                return half_to_double(x);
            } else if constexpr (std::is_same_v<T, FixedValue>) {
                return detail::widen_fixed(x.raw, x.format);
            } else {
                return static_cast<long double>(x);
            }
        },
        v);
}

/// Widening to double. Exact for every format except fixed wider than 53 bits.
inline double to_real(const FormatValue& v) { return static_cast<double>(widen(v)); }

enum class ArithOp { add, sub, mul, div };

inline FixedValue fx_arith(ArithOp op, const FixedValue& a, const FixedValue& b, Diagnostics* diag = nullptr) {
    if (!(a.format == b.format)) throw FormatError("fx_arith: operands have different fixed formats");
    const FixedArith ar(a.format, diag);
    FixedRaw out;
    switch (op) {
        case ArithOp::add: out = ar.add({a.raw}, {b.raw}); break;
        case ArithOp::sub: out = ar.sub({a.raw}, {b.raw}); break;
        case ArithOp::mul: out = ar.mul({a.raw}, {b.raw}); break;
        case ArithOp::div: out = ar.div({a.raw}, {b.raw}); break;
    }
    return {out.raw, a.format};
}

enum class UnaryFn { exp, ln, sqrt };

inline const char* unary_name(UnaryFn f) {
    switch (f) {
        case UnaryFn::exp: return "exp";
        case UnaryFn::ln: return "ln";
        case UnaryFn::sqrt: return "sqrt";
    }
    return "?";
}

/// Widen, apply, quantize back. Domain violations throw.
inline FormatValue num_unary(UnaryFn fn, const FormatValue& x, Diagnostics* diag = nullptr) {
    const long double w = widen(x);
    if ((fn == UnaryFn::ln && !(w > 0)) || (fn == UnaryFn::sqrt && w < 0)) {
        throw DomainError(std::string("domain error: ") + unary_name(fn) + "(" + std::to_string(static_cast<double>(w)) + ")");
    }
    const NumericFormat fmt = format_of(x);
    return visit_format(fmt, diag, [&](const auto& ar) -> FormatValue {
        using A = std::decay_t<decltype(ar)>;
        typename A::value_type v;
        if constexpr (std::is_same_v<A, FixedArith>) {
            v = FixedRaw{std::get<FixedValue>(x).raw};
        } else if constexpr (std::is_same_v<A, HalfArith>) {
            v = std::get<Half>(x);
        } else {
            v = std::get<typename A::value_type>(x);
        }
        typename A::value_type r{};
        switch (fn) {
            case UnaryFn::exp: r = ar.exp(v); break;
            case UnaryFn::ln: r = ar.log(v); break;
            case UnaryFn::sqrt: r = ar.sqrt(v); break;
        }
        if constexpr (std::is_same_v<A, FixedArith>) {
            return FixedValue{r.raw, ar.fixed_format()};
        } else {
            return r;
        }
    });
}

}  // namespace hflow
