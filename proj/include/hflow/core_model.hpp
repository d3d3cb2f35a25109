// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hflow/error.hpp"

namespace hflow {

/// Per-asset Heston model parameters. Time is measured in years.
struct HestonParams {
    double kappa = 1.5;   ///< mean-reversion rate of the variance
    double theta = 0.04;  ///< long-run variance
    double sigma = 0.3;   ///< volatility of variance
    double rho = -0.7;    ///< price/variance correlation
    double v0 = 0.04;     ///< initial variance
    double s0 = 100.0;    ///< initial asset price
    double r = 0.02;      ///< risk-free rate
    double dt = 1.0 / 252.0;  ///< step length, one trading day

    bool operator==(const HestonParams&) const = default;
};

/// Artifact default parameter set (a typical equity calibration).
inline HestonParams default_heston() { return HestonParams{}; }

struct ValidatedHeston {
    HestonParams params;
    std::vector<std::string> warnings;
};

/// Checks every parameter invariant. A violated Feller condition is reported
/// as a warning only; the QE scheme handles a variance that touches zero.
inline ValidatedHeston validate_heston(const HestonParams& p) {
    auto require = [](bool ok, const char* field, const std::string& what) {
        if (!ok) throw ValidationError(std::string("invalid Heston parameter '") + field + "': " + what);
    };
    auto finite = [&](double x, const char* field) { require(std::isfinite(x), field, "must be finite"); };
    finite(p.kappa, "kappa");
    finite(p.theta, "theta");
    finite(p.sigma, "sigma");
    finite(p.rho, "rho");
    finite(p.v0, "v0");
    finite(p.s0, "s0");
    finite(p.r, "r");
    finite(p.dt, "dt");
    require(p.kappa > 0.0, "kappa", "must be > 0");
    require(p.theta >= 0.0, "theta", "must be >= 0");
    require(p.sigma >= 0.0, "sigma", "must be >= 0");
    require(p.rho >= -1.0 && p.rho <= 1.0, "rho", "must lie in [-1, 1]");
    require(p.v0 >= 0.0, "v0", "must be >= 0");
    require(p.s0 > 0.0, "s0", "must be > 0");
    require(p.dt > 0.0, "dt", "must be > 0");

    ValidatedHeston out{p, {}};
    if (2.0 * p.kappa * p.theta < p.sigma * p.sigma) {
        out.warnings.push_back("Feller condition violated: 2*kappa*theta = " +
                               std::to_string(2.0 * p.kappa * p.theta) + " < sigma^2 = " +
                               std::to_string(p.sigma * p.sigma));
    }
    return out;
}

struct ElementCounts {
    std::uint64_t elements;
    std::uint64_t datapoints;
    std::uint64_t bytes;

    bool operator==(const ElementCounts&) const = default;
};

/// Problem extent: assets x timesteps x paths. All three are at least one.
class GridSpec {
public:
    GridSpec(std::uint64_t assets, std::uint64_t timesteps, std::uint64_t paths)
        : assets_(assets), timesteps_(timesteps), paths_(paths) {
        if (assets == 0) throw ValidationError("grid: assets must be >= 1");
        if (timesteps == 0) throw ValidationError("grid: timesteps must be >= 1");
        if (paths == 0) throw ValidationError("grid: paths must be >= 1");
    }

    std::uint64_t assets() const noexcept { return assets_; }
    std::uint64_t timesteps() const noexcept { return timesteps_; }
    std::uint64_t paths() const noexcept { return paths_; }

    std::uint64_t elements() const noexcept { return assets_ * timesteps_ * paths_; }

    GridSpec with_timesteps(std::uint64_t t) const { return {assets_, t, paths_}; }
    GridSpec with_paths(std::uint64_t p) const { return {assets_, timesteps_, p}; }
    GridSpec with_assets(std::uint64_t a) const { return {a, timesteps_, paths_}; }

    bool operator==(const GridSpec&) const = default;

private:
    std::uint64_t assets_;
    std::uint64_t timesteps_;
    std::uint64_t paths_;
};

/// Two 64-bit input numbers per element.
inline ElementCounts element_count(const GridSpec& grid) {
    const std::uint64_t e = grid.elements();
    return {e, 2 * e, 16 * e};
}

/// One (path, asset, timestep) coordinate.
struct ElementIndex {
    std::uint64_t path;
    std::uint64_t asset;
    std::uint64_t timestep;

    bool operator==(const ElementIndex&) const = default;
};

inline bool in_bounds(const ElementIndex& idx, const GridSpec& grid) noexcept {
    return idx.path < grid.paths() && idx.asset < grid.assets() && idx.timestep < grid.timesteps();
}

enum class PresetName { tiny, small, medium, large, huge };

struct SizePreset {
    PresetName id;
    std::string_view name;
    GridSpec grid;
};

inline const std::array<SizePreset, 5>& size_presets() {
    static const std::array<SizePreset, 5> presets{{
        {PresetName::tiny, "tiny", GridSpec(5, 126, 25000)},
        {PresetName::small, "small", GridSpec(10, 126, 25000)},
        {PresetName::medium, "medium", GridSpec(20, 252, 25000)},
        {PresetName::large, "large", GridSpec(30, 504, 25000)},
        {PresetName::huge, "huge", GridSpec(50, 1260, 25000)},
    }};
    return presets;
}

/// Case-insensitive lookup of a named problem size.
inline SizePreset problem_size_preset(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const auto& preset : size_presets()) {
        if (preset.name == lower) return preset;
    }
    throw UnknownPreset("unknown preset '" + std::string(name) +
                        "'; valid presets are tiny, small, medium, large, huge");
}

}  // namespace hflow
