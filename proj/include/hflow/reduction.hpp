// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hflow/core_model.hpp"
#include "hflow/cost_model.hpp"
#include "hflow/error.hpp"
#include "hflow/numerics/format.hpp"
#include "hflow/qe_kernel.hpp"

namespace hflow {

struct PipelineConfig {
    std::uint64_t batch = kDefaultBatch;
    bool double_buffer = true;
    std::size_t stream_capacity = 2;
    unsigned threads = 1;
    bool martingale = true;
    /// A stage blocked on a stream for longer than this raises
    /// PipelineDeadlock. Zero disables the watchdog.
    std::chrono::milliseconds watchdog{120000};
    /// Upper bound on reduction cache bytes per lane; zero means unbounded.
    std::uint64_t cache_budget_bytes = 0;
    /// Called by each stage before it processes a chunk; used to inject
    /// faults and delays in tests.
    std::function<void(std::string_view stage, std::uint64_t batch, std::uint64_t asset)> stage_hook;
};

inline void validate_pipeline_config(const PipelineConfig& c) {
    if (c.batch < 1) throw ValidationError("batch size must be >= 1");
    if (c.stream_capacity < 1) throw ValidationError("stream capacity must be >= 1");
    if (c.threads < 1) throw ValidationError("thread count must be >= 1");
}

/// Reduction cache bytes one lane holds: one B x T cache, or two when
/// ping-ponging.
inline std::uint64_t reduction_cache_bytes(const GridSpec& g, const PipelineConfig& c) {
    return cache_bytes(std::min(c.batch, g.paths()), g.timesteps()) * (c.double_buffer ? 2 : 1);
}

inline void check_cache_budget(const GridSpec& g, const PipelineConfig& c) {
    if (c.cache_budget_bytes == 0) return;
    const std::uint64_t need = reduction_cache_bytes(g, c);
    if (need > c.cache_budget_bytes) {
        throw ValidationError("reduction cache needs " + std::to_string(need) + " bytes, budget is " +
                              std::to_string(c.cache_budget_bytes) + "; reduce the batch size");
    }
}

/// Max over assets for every (path, timestep), host order [path][timestep].
template <class T>
struct ReducedSurface {
    std::vector<T> values;
    GridSpec grid{1, 1, 1};
};

/// max(a, b) where NaN loses to any number.
template <class Arith>
typename Arith::value_type nan_losing_max(const Arith& ar, typename Arith::value_type a,
                                          typename Arith::value_type b) {
    if (ar.is_nan(a)) return b;
    if (ar.is_nan(b)) return a;
    return ar.less(a, b) ? b : a;
}

/// One batch's reduction cache, laid out [path-in-batch][timestep].
template <class Arith>
class ReductionCache {
public:
    using V = typename Arith::value_type;

    void reset(std::uint64_t batch_index, std::uint64_t first_path, std::size_t paths, std::size_t timesteps) {
        batch_index_ = batch_index;
        first_path_ = first_path;
        paths_ = paths;
        timesteps_ = timesteps;
        values_.resize(paths * timesteps);
        filled_ = false;
    }

    /// Folds one asset's chunk, laid out [timestep][path-in-batch].
    void absorb(const Arith& ar, std::span<const V> chunk) {
        for (std::size_t t = 0; t < timesteps_; ++t) {
            const V* row = chunk.data() + t * paths_;
            for (std::size_t j = 0; j < paths_; ++j) {
                V& cell = values_[j * timesteps_ + t];
                cell = filled_ ? nan_losing_max(ar, cell, row[j]) : row[j];
            }
        }
        filled_ = true;
    }

    /// Copies the cache into host rows of `out` and counts all-NaN cells.
    void drain(const Arith& ar, std::span<V> out, Diagnostics& diag) const {
        std::copy(values_.begin(), values_.end(), out.begin() + static_cast<std::ptrdiff_t>(first_path_ * timesteps_));
        for (const V& v : values_)
            if (ar.is_nan(v)) ++diag.nan_cells;
    }

    std::uint64_t batch_index() const noexcept { return batch_index_; }

private:
    std::vector<V> values_;
    std::uint64_t batch_index_ = 0;
    std::uint64_t first_path_ = 0;
    std::size_t paths_ = 0;
    std::size_t timesteps_ = 0;
    bool filled_ = false;
};

/// Max-over-assets reduction of a device-layout price surface, streaming each
/// batch's assets through a B x T cache. With double buffering two caches
/// alternate; the values are the same either way.
template <class Arith>
ReducedSurface<typename Arith::value_type> ls_path_reduction(const Arith& ar,
                                                             const PathSurface<typename Arith::value_type>& prices,
                                                             const PipelineConfig& config = {},
                                                             Diagnostics* diag = nullptr) {
    using V = typename Arith::value_type;
    if (prices.layout != Layout::device) throw ValidationError("ls_path_reduction expects device layout");
    if (config.batch < 1 || prices.batch < 1) throw ValidationError("batch size must be >= 1");
    const GridSpec& g = prices.grid;
    if (prices.values.size() != g.elements()) {
        throw SizeMismatch("price surface holds " + std::to_string(prices.values.size()) + " values, grid needs " +
                           std::to_string(g.elements()));
    }
    PipelineConfig effective = config;
    effective.batch = prices.batch;
    check_cache_budget(g, effective);

    ReducedSurface<V> out;
    out.grid = g;
    out.values.resize(g.paths() * g.timesteps());
    Diagnostics local;
    ReductionCache<Arith> caches[2];
    const std::size_t T = g.timesteps();
    const std::uint64_t nb = batch_count(g.paths(), prices.batch);
    for (std::uint64_t k = 0; k < nb; ++k) {
        ReductionCache<Arith>& cache = caches[config.double_buffer ? (k & 1) : 0];
        const BatchRange br = batch_range(g.paths(), prices.batch, k);
        cache.reset(k, br.first_path, br.count, T);
        const std::size_t n = br.count * T;
        for (std::uint64_t a = 0; a < g.assets(); ++a) {
            const std::size_t base = br.first_path * g.assets() * T + a * n;
            cache.absorb(ar, std::span<const V>(prices.values.data() + base, n));
        }
        cache.drain(ar, std::span<V>(out.values), local);
    }
    if (diag) *diag += local;
    return out;
}

}  // namespace hflow
