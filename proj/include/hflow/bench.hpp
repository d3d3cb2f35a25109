// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "hflow/core_model.hpp"
#include "hflow/error.hpp"
#include "hflow/numerics/format.hpp"
#include "hflow/pipeline.hpp"
#include "hflow/randomness.hpp"

namespace hflow {

struct BenchRecord {
    std::string preset;
    std::string format;
    unsigned threads = 1;
    double reorder_in_ms = 0.0;
    double compute_ms = 0.0;
    double reduce_ms = 0.0;
    double reorder_out_ms = 0.0;
    double total_ms = 0.0;
    double elements_per_s = 0.0;
    std::uint64_t wrap_events = 0;
    std::uint64_t warnings = 0;
    bool skipped = false;
    std::string note;           ///< skip reason or run remarks
    std::uint64_t checksum = 0; ///< FNV-1a of the reduced surface bits

    bool operator==(const BenchRecord&) const = default;
};

struct BenchCase {
    std::string name;
    GridSpec grid;
};

inline std::vector<BenchCase> bench_cases(const std::vector<std::string>& preset_names) {
    std::vector<BenchCase> out;
    for (const auto& n : preset_names) {
        const SizePreset p = problem_size_preset(n);
        out.push_back({std::string(p.name), p.grid});
    }
    return out;
}

/// 80% of physical memory, or 4 GiB when the system does not say.
inline std::uint64_t default_memory_budget() {
    const long pages = ::sysconf(_SC_PHYS_PAGES);
    const long page = ::sysconf(_SC_PAGE_SIZE);
    if (pages <= 0 || page <= 0) return std::uint64_t{4} << 30;
    return static_cast<std::uint64_t>(static_cast<double>(pages) * static_cast<double>(page) * 0.8);
}

/// Resident bytes one run needs: the reduced surface in format and as binary64,
/// the chunks in flight in every lane, the reduction caches, and the whole draw
/// array when draws come from a file.
inline std::uint64_t estimate_run_bytes(const GridSpec& g, const NumericFormat& fmt, const PipelineConfig& c,
                                        bool file_draws = false) {
    const std::uint64_t vb = fmt.value_bytes();
    const std::uint64_t surface = g.paths() * g.timesteps() * (vb + 8);
    const std::uint64_t width = std::min(c.batch, g.paths());
    const std::uint64_t chunk = width * g.timesteps() * (16 + 3 * vb);
    const std::uint64_t lanes = std::min<std::uint64_t>(c.threads, batch_count(g.paths(), width));
    const std::uint64_t in_flight = lanes * (4 * c.stream_capacity + 5) * chunk;
    const std::uint64_t caches = lanes * 2 * width * g.timesteps() * vb;
    const std::uint64_t draws = file_draws ? element_count(g).bytes : 0;
    return surface + in_flight + caches + draws;
}

inline std::uint64_t surface_checksum(const std::vector<double>& values) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (double v : values) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i, bits >>= 8) {
            h ^= bits & 0xff;
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

struct BenchOptions {
    std::vector<BenchCase> cases;
    std::vector<NumericFormat> formats{NumericFormat::float64()};
    unsigned repetitions = 5;
    SeedSpec seed{};
    std::vector<HestonParams> params{default_heston()};
    PipelineConfig config{};
    std::uint64_t memory_budget_bytes = 0;  ///< 0 means default_memory_budget()
};

/// Runs every (case, format) `repetitions` times and averages the phase
/// times. Cases whose estimated footprint exceeds the budget are skipped.
inline std::vector<BenchRecord> bench_run(const BenchOptions& opt) {
    if (opt.repetitions < 1) throw ValidationError("repetitions must be >= 1");
    validate_pipeline_config(opt.config);
    const std::uint64_t budget = opt.memory_budget_bytes ? opt.memory_budget_bytes : default_memory_budget();
    std::vector<BenchRecord> out;
    for (const auto& bc : opt.cases) {
        for (const auto& fmt : opt.formats) {
            BenchRecord rec;
            rec.preset = bc.name;
            rec.format = fmt.to_string();
            rec.threads = opt.config.threads;
            const std::uint64_t need = estimate_run_bytes(bc.grid, fmt, opt.config);
            if (need > budget) {
                rec.skipped = true;
                rec.note = "skipped: needs ~" + std::to_string(need >> 20) + " MiB, budget " +
                           std::to_string(budget >> 20) + " MiB";
                out.push_back(rec);
                continue;
            }
            const DrawProvider draws = DrawProvider::keyed(opt.seed, bc.grid);
            PhaseTimings sum;
            for (unsigned rep = 0; rep < opt.repetitions; ++rep) {
                const RunOutput r = run_reduced(fmt, bc.grid, opt.params, draws, opt.config);
                sum.reorder_in_ms += r.timings.reorder_in_ms;
                sum.compute_ms += r.timings.compute_ms;
                sum.reduce_ms += r.timings.reduce_ms;
                sum.reorder_out_ms += r.timings.reorder_out_ms;
                sum.total_ms += r.timings.total_ms;
                const std::uint64_t sum_bits = surface_checksum(r.reduced);
                if (rep == 0) {
                    rec.checksum = sum_bits;
                    rec.wrap_events = r.diagnostics.wraps();
                    rec.warnings = r.diagnostics.warnings();
                } else if (sum_bits != rec.checksum) {
                    rec.note = "nondeterministic output across repetitions";
                }
            }
            const double n = opt.repetitions;
            rec.reorder_in_ms = sum.reorder_in_ms / n;
            rec.compute_ms = sum.compute_ms / n;
            rec.reduce_ms = sum.reduce_ms / n;
            rec.reorder_out_ms = sum.reorder_out_ms / n;
            rec.total_ms = sum.total_ms / n;
            rec.elements_per_s = static_cast<double>(bc.grid.elements()) / (rec.total_ms / 1000.0);
            out.push_back(rec);
        }
    }
    return out;
}

}  // namespace hflow
