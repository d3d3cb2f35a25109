// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hflow/core_model.hpp"
#include "hflow/error.hpp"
#include "hflow/numerics/format.hpp"
#include "hflow/pipeline.hpp"
#include "hflow/randomness.hpp"

namespace hflow {

/// Normalized L1 distance in percent: 100 * sum|test - ref| / sum|ref|.
/// Non-finite test values count as zero, so an all-dead surface reads 100%.
inline double deviation(std::span<const double> test, std::span<const double> reference) {
    if (test.size() != reference.size()) {
        throw SizeMismatch("deviation needs equal sizes, got " + std::to_string(test.size()) + " and " +
                           std::to_string(reference.size()));
    }
    long double num = 0.0L, den = 0.0L;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const long double ref = reference[i];
        const long double t = std::isfinite(test[i]) ? test[i] : 0.0;
        num += std::fabs(t - ref);
        den += std::fabs(ref);
    }
    if (den == 0.0L) throw DegenerateReference();
    return static_cast<double>(100.0L * num / den);
}

inline double deviation(const std::vector<double>& test, const std::vector<double>& reference) {
    return deviation(std::span<const double>(test), std::span<const double>(reference));
}

/// One (format, timesteps) cell of a precision sweep.
struct DeviationCell {
    double percent = 0.0;
    bool dead = false;        ///< the run failed and the cell reads 100%
    std::string diagnostic;   ///< failure reason, empty when the run completed
    Diagnostics events;
};

/// Rows are timestep counts, columns are formats.
struct DeviationReport {
    std::vector<std::string> formats;
    std::vector<std::uint64_t> timesteps;
    std::vector<std::vector<DeviationCell>> cells;  ///< [row][column]
    GridSpec grid{1, 1, 1};                         ///< base grid; T varies per row
    std::uint64_t seed = 1;
    bool martingale = true;

    const DeviationCell& at(std::size_t row, std::size_t col) const { return cells.at(row).at(col); }
};

struct SweepOptions {
    std::vector<NumericFormat> formats;
    std::vector<std::uint64_t> timesteps{126, 252, 504, 1260, 2520};
    GridSpec base_grid = problem_size_preset("tiny").grid;
    SeedSpec seed{};
    std::vector<HestonParams> params{default_heston()};
    PipelineConfig config{};
};

/// The eleven formats of the precision study, in column order.
inline std::vector<NumericFormat> default_sweep_formats() {
    std::vector<NumericFormat> out;
    for (const char* f : {"half", "float", "double", "fixed:8:3", "fixed:8:4", "fixed:16:6", "fixed:16:8",
                          "fixed:32:12", "fixed:32:16", "fixed:64:12", "fixed:64:24"})
        out.push_back(NumericFormat::parse(f));
    return out;
}

/// For each timestep count, runs the pipeline in double and in every format on
/// the same draws and records the deviation. A failing run becomes a dead cell
/// instead of aborting the sweep.
inline DeviationReport precision_sweep(const SweepOptions& opt) {
    if (opt.timesteps.empty()) throw ValidationError("precision sweep needs at least one timestep count");
    if (opt.formats.empty()) throw ValidationError("precision sweep needs at least one format");
    DeviationReport rep;
    for (const auto& f : opt.formats) rep.formats.push_back(f.to_string());
    rep.timesteps = opt.timesteps;
    rep.grid = opt.base_grid;
    rep.seed = opt.seed.seed;
    rep.martingale = opt.config.martingale;

    for (std::uint64_t T : opt.timesteps) {
        const GridSpec grid = opt.base_grid.with_timesteps(T);
        const DrawProvider draws = DrawProvider::keyed(opt.seed, grid);
        const RunOutput reference = run_reduced(NumericFormat::float64(), grid, opt.params, draws, opt.config);
        std::vector<DeviationCell> row;
        for (const auto& fmt : opt.formats) {
            DeviationCell cell;
            try {
                const RunOutput test = run_reduced(fmt, grid, opt.params, draws, opt.config);
                cell.percent = deviation(test.reduced, reference.reduced);
                cell.events = test.diagnostics;
            } catch (const DegenerateReference&) {
                throw;
            } catch (const Error& e) {
                cell.percent = 100.0;
                cell.dead = true;
                cell.diagnostic = e.what();
            }
            row.push_back(std::move(cell));
        }
        rep.cells.push_back(std::move(row));
    }
    return rep;
}

}  // namespace hflow
