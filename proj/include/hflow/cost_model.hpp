// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hflow/core_model.hpp"
#include "hflow/error.hpp"

namespace hflow {

/// A pipelined loop body: cycles between iterations and cycles from entry to
/// result.
struct StageSpec {
    std::string name = "log_price";
    std::uint64_t ii = 1;
    std::uint64_t depth = 457;
};

enum class DesignVariant { initial, dataflow, interchange, double_buffer };

inline constexpr std::array<DesignVariant, 4> kAllVariants = {DesignVariant::initial, DesignVariant::dataflow,
                                                              DesignVariant::interchange, DesignVariant::double_buffer};

inline std::string_view variant_name(DesignVariant v) {
    switch (v) {
        case DesignVariant::initial: return "initial";
        case DesignVariant::dataflow: return "dataflow";
        case DesignVariant::interchange: return "interchange";
        case DesignVariant::double_buffer: return "double_buffer";
    }
    return "?";
}

inline DesignVariant parse_variant(std::string_view s) {
    for (auto v : kAllVariants)
        if (variant_name(v) == s) return v;
    throw ValidationError("unknown design variant '" + std::string(s) +
                          "' (initial, dataflow, interchange, double_buffer)");
}

/// Overlap between stages once the kernel runs as a dataflow region. Fitted
/// once to the measured initial/dataflow runtime ratio of 2.46 and frozen.
inline constexpr double kDataflowOverlap = 2.5;

inline constexpr std::uint64_t kDefaultBatch = 500;

namespace detail {

inline void check_stage(std::uint64_t batch, const StageSpec& stage) {
    if (batch < 1) throw ValidationError("batch size must be >= 1");
    if (stage.ii < 1 || stage.depth < 1) throw ValidationError("stage ii and depth must be >= 1");
}

/// Cycles of the interchanged loop nest: for each batch and each
/// (asset, timestep) the path loop issues once per cycle but cannot restart
/// the same path before `depth` cycles have passed.
inline double interchange_body(const GridSpec& g, std::uint64_t batch, const StageSpec& s) {
    const double per_row = static_cast<double>(g.assets()) * static_cast<double>(g.timesteps());
    double cycles = 0.0;
    const std::uint64_t full = g.paths() / batch;
    const std::uint64_t tail = g.paths() % batch;
    const auto row = [&](std::uint64_t width) {
        return per_row * static_cast<double>(std::max(width * s.ii, s.depth));
    };
    cycles += static_cast<double>(full) * row(batch);
    if (tail) cycles += row(tail);
    return cycles;
}

}  // namespace detail

inline double serial_cycles(const GridSpec& g, const StageSpec& s) {
    return static_cast<double>(g.assets()) * static_cast<double>(g.timesteps()) * static_cast<double>(g.paths()) *
           static_cast<double>(s.depth);
}

/// Fraction of a batch's fill-plus-drain time that remains once the drain of
/// batch k overlaps the fill of batch k+1.
inline double double_buffer_overlap(const GridSpec& g, std::uint64_t batch, const StageSpec& s) {
    // evaluated for a full batch so the estimate stays monotone in P
    const std::uint64_t width = batch;
    const double compute = static_cast<double>(g.assets()) * static_cast<double>(g.timesteps()) *
                           static_cast<double>(std::max(width * s.ii, s.depth));
    const double drain = static_cast<double>(g.timesteps()) * static_cast<double>(width);
    return std::max(compute, drain) / (compute + drain);
}

inline double estimate_cycles(DesignVariant variant, const GridSpec& g, std::uint64_t batch,
                              const StageSpec& stage = {}) {
    detail::check_stage(batch, stage);
    const double serial = serial_cycles(g, stage);
    const double dataflow = serial / kDataflowOverlap;
    const double depth = static_cast<double>(stage.depth);
    // When every batch is shorter than the depth the interchanged loop cannot
    // beat the dataflow design; it would fall back to it.
    const double interchange = std::min(detail::interchange_body(g, batch, stage) + depth, dataflow);
    switch (variant) {
        case DesignVariant::initial: return serial;
        case DesignVariant::dataflow: return dataflow;
        case DesignVariant::interchange: return interchange;
        case DesignVariant::double_buffer:
            return double_buffer_overlap(g, batch, stage) * interchange;
    }
    return serial;
}

/// True when the batch is too short to hide the pipeline depth.
inline bool ii_degraded(std::uint64_t batch, const StageSpec& stage = {}) { return batch < stage.depth; }

/// Bytes of one reduction cache holding `batch` paths of `timesteps` doubles.
inline std::uint64_t cache_bytes(std::uint64_t batch, std::uint64_t timesteps) {
    if (batch < 1 || timesteps < 1) throw ValidationError("cache_bytes needs batch >= 1 and timesteps >= 1");
    return batch * timesteps * 8;
}

struct ResourceBudget {
    double uram_fraction_per_kernel = 0.1604;
    std::uint64_t ports_per_kernel = 3;
    std::uint64_t total_ports = 32;
};

inline void validate_budget(const ResourceBudget& b) {
    if (!(b.uram_fraction_per_kernel > 0.0 && b.uram_fraction_per_kernel <= 1.0))
        throw ValidationError("uram fraction per kernel must be in (0, 1]");
    if (b.ports_per_kernel < 1 || b.total_ports < 1) throw ValidationError("port counts must be >= 1");
}

inline std::uint64_t max_kernels(const ResourceBudget& b) {
    validate_budget(b);
    // the small epsilon keeps exact quotients such as 1/0.25 from flooring low
    const auto by_uram = static_cast<std::uint64_t>(std::floor(1.0 / b.uram_fraction_per_kernel + 1e-9));
    return std::min(by_uram, b.total_ports / b.ports_per_kernel);
}

/// Budget for a kernel whose UltraRAM use scales with the timestep count,
/// starting from `reference` measured at `reference_timesteps`.
inline ResourceBudget scale_budget(const ResourceBudget& reference, std::uint64_t reference_timesteps,
                                   std::uint64_t timesteps) {
    if (reference_timesteps < 1 || timesteps < 1) throw ValidationError("timestep counts must be >= 1");
    ResourceBudget b = reference;
    b.uram_fraction_per_kernel = std::min(
        1.0, reference.uram_fraction_per_kernel * static_cast<double>(timesteps) / static_cast<double>(reference_timesteps));
    return b;
}

struct CostRow {
    DesignVariant variant;
    double cycles;
    double cycles_per_element;
    double ratio_vs_initial;
    std::string flag;
};

inline std::vector<CostRow> cost_table(const GridSpec& g, std::uint64_t batch, const StageSpec& stage = {}) {
    std::vector<CostRow> rows;
    const double initial = estimate_cycles(DesignVariant::initial, g, batch, stage);
    for (auto v : kAllVariants) {
        const double c = estimate_cycles(v, g, batch, stage);
        std::string flag;
        if ((v == DesignVariant::interchange || v == DesignVariant::double_buffer) && ii_degraded(batch, stage))
            flag = "B < depth: II degraded";
        rows.push_back({v, c, c / static_cast<double>(g.elements()), initial / c, flag});
    }
    return rows;
}

}  // namespace hflow
