// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "hflow/core_model.hpp"
#include "hflow/error.hpp"

namespace hflow {

struct SeedSpec {
    std::uint64_t seed = 1;
};

/// The two standard normal inputs of one element.
struct RandomDraws {
    double z_v;  ///< drives the variance step
    double z_x;  ///< drives the log-price step

    bool operator==(const RandomDraws&) const = default;
};

// ---------------------------------------------------------------------------
// Philox4x32-10 (Salmon et al., SC'11): a counter-based block cipher, so the
// draw for an element is a pure function of (seed, coordinates).
// ---------------------------------------------------------------------------

using PhiloxBlock = std::array<std::uint32_t, 4>;

inline PhiloxBlock philox4x32_10(PhiloxBlock ctr, std::array<std::uint32_t, 2> key) noexcept {
    constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

/// Injective packing of a coordinate into the generator counter.
inline std::uint64_t element_counter(const ElementIndex& idx, const GridSpec& grid) noexcept {
    return (idx.path * grid.assets() + idx.asset) * grid.timesteps() + idx.timestep;
}

/// Maps 64 random bits to the open interval (0, 1): the top 52 bits k give
/// (k + 1/2) / 2^52, which is exact, so the endpoints are never reached.
inline double bits_to_open_unit(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

// ---------------------------------------------------------------------------
// Inverse normal CDF: Wichura's AS241 (PPND16), relative error about 1e-16.
// The central rational covers 85% of draws; the tails cost one log and one
// sqrt.
// ---------------------------------------------------------------------------

namespace detail {

/// Evaluates c[0] + c[1] x + ... + c[7] x^7.
inline double poly7(double x, const std::array<double, 8>& c) noexcept {
    return ((((((c[7] * x + c[6]) * x + c[5]) * x + c[4]) * x + c[3]) * x + c[2]) * x + c[1]) * x + c[0];
}

/// True when u lies in the central region handled by ndtri_central.
inline bool ndtri_is_central(double u) noexcept {
    const double q = u - 0.5;
    return q >= -0.425 && q <= 0.425;
}

inline double ndtri_central(double u) noexcept {
    static constexpr std::array<double, 8> kA{3.3871328727963666080e0,   1.3314166789178437745e+2,
                                              1.9715909503065514427e+3,  1.3731693765509461125e+4,
                                              4.5921953931549871457e+4,  6.7265770927008700853e+4,
                                              3.3430575583588128105e+4,  2.5090809287301226727e+3};
    static constexpr std::array<double, 8> kB{1.0,                       4.2313330701600911252e+1,
                                              6.8718700749205790830e+2,  5.3941960214247511077e+3,
                                              2.1213794301586595867e+4,  3.9307895800092710610e+4,
                                              2.8729085735721942674e+4,  5.2264952788528545610e+3};
    const double q = u - 0.5;
    const double r = 0.180625 - q * q;
    return q * poly7(r, kA) / poly7(r, kB);
}

inline double ndtri_tail(double u) noexcept {
    static constexpr std::array<double, 8> kC{1.42343711074968357734e0,  4.63033784615654529590e0,
                                              5.76949722146069140550e0,  3.64784832476320460504e0,
                                              1.27045825245236838258e0,  2.41780725177450611770e-1,
                                              2.27238449892691845833e-2, 7.74545014278341407640e-4};
    static constexpr std::array<double, 8> kD{1.0,                       2.05319162663775882187e0,
                                              1.67638483018380384940e0,  6.89767334985100004550e-1,
                                              1.48103976427480074590e-1, 1.51986665636164571966e-2,
                                              5.47593808499534494600e-4, 1.05075007164441684324e-9};
    static constexpr std::array<double, 8> kE{6.65790464350110377720e0,  5.46378491116411436990e0,
                                              1.78482653991729133580e0,  2.96560571828504891230e-1,
                                              2.65321895265761230930e-2, 1.24266094738807843860e-3,
                                              2.71155556874348757815e-5, 2.01033439929228813265e-7};
    static constexpr std::array<double, 8> kF{1.0,                       5.99832206555887937690e-1,
                                              1.36929880922735805310e-1, 1.48753612908506148525e-2,
                                              7.86869131145613259100e-4, 1.84631831751005468180e-5,
                                              1.42151175831644588870e-7, 2.04426310338993978564e-15};
    if (u <= 0.0) return -INFINITY;
    if (u >= 1.0) return INFINITY;
    const double q = u - 0.5;
    double r = std::sqrt(-std::log(q < 0.0 ? u : 1.0 - u));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        x = poly7(r, kC) / poly7(r, kD);
    } else {
        r -= 5.0;
        x = poly7(r, kE) / poly7(r, kF);
    }
    return q < 0.0 ? -x : x;
}

}  // namespace detail

inline double inverse_normal_cdf(double u) noexcept {
    return detail::ndtri_is_central(u) ? detail::ndtri_central(u) : detail::ndtri_tail(u);
}

/// Standard normal CDF.
inline double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z * M_SQRT1_2); }

namespace detail {

inline std::array<std::uint32_t, 2> seed_key(SeedSpec seed) noexcept {
    return {static_cast<std::uint32_t>(seed.seed), static_cast<std::uint32_t>(seed.seed >> 32)};
}

inline std::uint64_t pack_bits(std::uint32_t lo, std::uint32_t hi) noexcept {
    return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

inline constexpr std::size_t kDrawBlock = 64;

/// bits_to_open_unit without a 64-bit integer conversion: the 52-bit value is
/// placed in the mantissa of 2^52, so the result is identical.
inline double open_unit_exact(std::uint64_t bits) noexcept {
    constexpr std::uint64_t kTwo52Bits = 0x4330000000000000ull;
    const double k = std::bit_cast<double>(kTwo52Bits | (bits >> 12)) - 0x1.0p52;
    return (k + 0.5) * 0x1.0p-52;
}

/// Gaussian pairs for up to kDrawBlock counters. Same arithmetic as
/// gaussian_pair, arranged lane-wise so the compiler can vectorize it.
inline void gaussian_block(SeedSpec seed, const std::uint64_t* counters, std::size_t n, double* z_v,
                           double* z_x) noexcept {
    constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
    alignas(64) std::uint32_t c0[kDrawBlock], c1[kDrawBlock], c2[kDrawBlock], c3[kDrawBlock];
    for (std::size_t i = 0; i < n; ++i) {
        c0[i] = static_cast<std::uint32_t>(counters[i]);
        c1[i] = static_cast<std::uint32_t>(counters[i] >> 32);
        c2[i] = 0;
        c3[i] = 0;
    }
    auto key = seed_key(seed);
    for (int round = 0; round < 10; ++round) {
        const std::uint32_t k0 = key[0], k1 = key[1];
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c0[i];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c2[i];
            const auto n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1[i] ^ k0;
            const auto n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3[i] ^ k1;
            c1[i] = static_cast<std::uint32_t>(p1);
            c3[i] = static_cast<std::uint32_t>(p0);
            c0[i] = n0;
            c2[i] = n2;
        }
        key[0] += kW0;
        key[1] += kW1;
    }
    alignas(64) double u0[kDrawBlock], u1[kDrawBlock], g0[kDrawBlock], g1[kDrawBlock];
    for (std::size_t i = 0; i < n; ++i) {
        u0[i] = open_unit_exact(pack_bits(c0[i], c1[i]));
        u1[i] = open_unit_exact(pack_bits(c2[i], c3[i]));
    }
    for (std::size_t i = 0; i < n; ++i) {
        g0[i] = ndtri_central(u0[i]);
        g1[i] = ndtri_central(u1[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        z_v[i] = ndtri_is_central(u0[i]) ? g0[i] : ndtri_tail(u0[i]);
        z_x[i] = ndtri_is_central(u1[i]) ? g1[i] : ndtri_tail(u1[i]);
    }
}

}  // namespace detail

/// Keyed Gaussian pair for one element.
inline RandomDraws gaussian_pair(SeedSpec seed, const ElementIndex& idx, const GridSpec& grid) noexcept {
    const std::uint64_t c = element_counter(idx, grid);
    const PhiloxBlock out =
        philox4x32_10({static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32), 0u, 0u}, detail::seed_key(seed));
    return {inverse_normal_cdf(bits_to_open_unit(detail::pack_bits(out[0], out[1]))),
            inverse_normal_cdf(bits_to_open_unit(detail::pack_bits(out[2], out[3])))};
}

// ---------------------------------------------------------------------------
// Draw providers
// ---------------------------------------------------------------------------

/// Source of the two Gaussian inputs per element: keyed generation, or a
/// binary file of precomputed draws (host order [path][asset][timestep][2],
/// little-endian binary64). Read-only after construction; safe to share.
class DrawProvider {
public:
    static DrawProvider keyed(SeedSpec seed, const GridSpec& grid) { return DrawProvider(grid, seed, nullptr); }

    static DrawProvider from_values(const GridSpec& grid, std::vector<double> host_values) {
        check_values(grid, host_values);
        return DrawProvider(grid, SeedSpec{}, std::make_shared<const std::vector<double>>(std::move(host_values)));
    }

    const GridSpec& grid() const noexcept { return grid_; }
    bool file_backed() const noexcept { return static_cast<bool>(data_); }
    SeedSpec seed() const noexcept { return seed_; }

    RandomDraws at(const ElementIndex& idx) const noexcept {
        if (!data_) return gaussian_pair(seed_, idx, grid_);
        const std::size_t off = 2 * host_offset(idx);
        return {(*data_)[off], (*data_)[off + 1]};
    }

    /// Fills device-ordered ([timestep][path]) draws for `count` paths of one
    /// asset starting at `first_path`.
    void fill_chunk(std::uint64_t first_path, std::uint64_t count, std::uint64_t asset, double* z_v,
                    double* z_x) const noexcept {
        const std::uint64_t steps = grid_.timesteps();
        if (data_) {
            for (std::uint64_t t = 0; t < steps; ++t) {
                for (std::uint64_t j = 0; j < count; ++j) {
                    const std::size_t off = 2 * host_offset({first_path + j, asset, t});
                    z_v[t * count + j] = (*data_)[off];
                    z_x[t * count + j] = (*data_)[off + 1];
                }
            }
            return;
        }
        const std::uint64_t path_stride = grid_.assets() * steps;
        std::uint64_t counters[detail::kDrawBlock];
        for (std::uint64_t t = 0; t < steps; ++t) {
            for (std::uint64_t j0 = 0; j0 < count; j0 += detail::kDrawBlock) {
                const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(detail::kDrawBlock, count - j0));
                std::uint64_t c = element_counter({first_path + j0, asset, t}, grid_);
                for (std::size_t i = 0; i < n; ++i, c += path_stride) counters[i] = c;
                detail::gaussian_block(seed_, counters, n, z_v + t * count + j0, z_x + t * count + j0);
            }
        }
    }

private:
    DrawProvider(GridSpec grid, SeedSpec seed, std::shared_ptr<const std::vector<double>> data)
        : grid_(grid), seed_(seed), data_(std::move(data)) {}

    std::uint64_t host_offset(const ElementIndex& idx) const noexcept {
        return (idx.path * grid_.assets() + idx.asset) * grid_.timesteps() + idx.timestep;
    }

    static void check_values(const GridSpec& grid, const std::vector<double>& v) {
        const std::uint64_t expected = 2 * grid.elements();
        if (v.size() != expected) {
            throw SizeMismatch("draw data size mismatch: expected " + std::to_string(8 * expected) +
                               " bytes, got " + std::to_string(8 * v.size()));
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!std::isfinite(v[i])) {
                const std::uint64_t e = i / 2;
                const std::uint64_t t = e % grid.timesteps();
                const std::uint64_t a = (e / grid.timesteps()) % grid.assets();
                const std::uint64_t p = e / (grid.timesteps() * grid.assets());
                throw DataError("non-finite draw at path " + std::to_string(p) + ", asset " + std::to_string(a) +
                                ", timestep " + std::to_string(t) + (i % 2 ? " (z_x)" : " (z_v)"));
            }
        }
    }

    GridSpec grid_;
    SeedSpec seed_;
    std::shared_ptr<const std::vector<double>> data_;
};

namespace detail {

inline std::uint64_t to_little_endian(std::uint64_t v) noexcept {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        return __builtin_bswap64(v);
    }
}

}  // namespace detail

/// Writes little-endian binary64 values.
inline void write_f64_file(const std::filesystem::path& path, const std::vector<double>& values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    std::vector<std::uint64_t> words(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        words[i] = detail::to_little_endian(std::bit_cast<std::uint64_t>(values[i]));
    out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 8));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::vector<double> read_f64_file(const std::filesystem::path& path, std::uint64_t expected_bytes) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw IoError("cannot stat '" + path.string() + "': " + ec.message());
    if (size != expected_bytes) {
        throw SizeMismatch("draw file '" + path.string() + "' size mismatch: expected " +
                           std::to_string(expected_bytes) + " bytes, got " + std::to_string(size));
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<std::uint64_t> words(size / 8);
    in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(size));
    if (!in) throw IoError("read failed for '" + path.string() + "'");
    std::vector<double> values(words.size());
    for (std::size_t i = 0; i < words.size(); ++i)
        values[i] = std::bit_cast<double>(detail::to_little_endian(words[i]));
    return values;
}

inline DrawProvider load_draws(const std::filesystem::path& path, const GridSpec& grid) {
    return DrawProvider::from_values(grid, read_f64_file(path, 16 * grid.elements()));
}

/// Writes the keyed draws of `grid` in the draw-file layout.
inline void dump_draws(const std::filesystem::path& path, SeedSpec seed, const GridSpec& grid) {
    std::vector<double> values;
    values.reserve(2 * grid.elements());
    for (std::uint64_t p = 0; p < grid.paths(); ++p)
        for (std::uint64_t a = 0; a < grid.assets(); ++a)
            for (std::uint64_t t = 0; t < grid.timesteps(); ++t) {
                const RandomDraws d = gaussian_pair(seed, {p, a, t}, grid);
                values.push_back(d.z_v);
                values.push_back(d.z_x);
            }
    write_f64_file(path, values);
}

}  // namespace hflow
