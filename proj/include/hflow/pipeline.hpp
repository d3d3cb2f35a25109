// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <exception>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "hflow/core_model.hpp"
#include "hflow/error.hpp"
#include "hflow/numerics/format.hpp"
#include "hflow/qe_kernel.hpp"
#include "hflow/randomness.hpp"
#include "hflow/reduction.hpp"
#include "hflow/stream.hpp"

namespace hflow {

/// Wall-clock milliseconds per phase. Phases overlap when pipelined, so each
/// is the span from the phase's first chunk start to its last chunk end.
struct PhaseTimings {
    double reorder_in_ms = 0.0;
    double compute_ms = 0.0;
    double reduce_ms = 0.0;
    double reorder_out_ms = 0.0;
    double total_ms = 0.0;

    double max_phase() const noexcept { return std::max({reorder_in_ms, compute_ms, reduce_ms, reorder_out_ms}); }
};

template <class T>
struct PipelineResult {
    ReducedSurface<T> reduced;
    PhaseTimings timings;
    Diagnostics diagnostics;
};

enum class Phase { reorder_in, compute, reduce, reorder_out };

namespace detail {

using Clock = std::chrono::steady_clock;

/// Active window of one phase as seen by one thread.
struct PhaseWindow {
    Clock::time_point first{Clock::time_point::max()};
    Clock::time_point last{Clock::time_point::min()};
    double busy_ms = 0.0;

    template <class Fn>
    void time(Fn&& fn) {
        const auto t0 = Clock::now();
        fn();
        const auto t1 = Clock::now();
        first = std::min(first, t0);
        last = std::max(last, t1);
        busy_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
    }

    void merge(const PhaseWindow& o) {
        first = std::min(first, o.first);
        last = std::max(last, o.last);
        busy_ms += o.busy_ms;
    }

    double span_ms() const {
        if (last < first) return 0.0;
        return std::chrono::duration<double, std::milli>(last - first).count();
    }
};

struct PhaseClock {
    PhaseWindow phase[4];
    PhaseWindow& operator[](Phase p) { return phase[static_cast<int>(p)]; }
    void merge(const PhaseClock& o) {
        for (int i = 0; i < 4; ++i) phase[i].merge(o.phase[i]);
    }
};

/// One asset of one path batch travelling through the stages, laid out
/// [timestep][path-in-batch]. Buffers are released as soon as the consuming
/// stage is done with them.
template <class V>
struct Chunk {
    BatchRange batch{};
    std::uint64_t asset = 0;
    std::vector<double> z_v, z_x;
    std::vector<V> v, drift, x;
};

template <class V>
void release(std::vector<V>& buf) {
    std::vector<V>().swap(buf);
}

/// Work shared by the pipelined and sequential runners.
template <class Arith>
struct ChunkWork {
    using V = typename Arith::value_type;

    const GridSpec& grid;
    const DrawProvider& draws;
    const std::vector<QeCoefficients<Arith>>& coeffs;
    bool martingale;

    std::size_t n(const Chunk<V>& c) const { return c.batch.count * grid.timesteps(); }

    void draws_stage(Chunk<V>& c) const {
        c.z_v.resize(n(c));
        c.z_x.resize(n(c));
        draws.fill_chunk(c.batch.first_path, c.batch.count, c.asset, c.z_v.data(), c.z_x.data());
    }

    void variance_stage(const Arith& ar, Chunk<V>& c) const {
        c.v.resize(n(c));
        c.drift.resize(n(c));
        variance_chunk(ar, coeffs[c.asset], martingale, c.batch.count, grid.timesteps(),
                       std::span<const double>(c.z_v), std::span<V>(c.v), std::span<V>(c.drift));
        release(c.z_v);
    }

    void log_price_stage(const Arith& ar, Chunk<V>& c) const {
        c.x.resize(n(c));
        log_price_chunk(ar, coeffs[c.asset], c.batch.count, grid.timesteps(), std::span<const V>(c.v),
                        std::span<const V>(c.drift), std::span<const double>(c.z_x), std::span<V>(c.x));
        release(c.v);
        release(c.drift);
        release(c.z_x);
    }

    void exponential_stage(const Arith& ar, Chunk<V>& c) const {
        exponential_chunk(ar, std::span<const V>(c.x), std::span<V>(c.x));
    }
};

inline PhaseTimings to_timings(const PhaseClock& clock, Clock::time_point start, Clock::time_point end) {
    PhaseTimings t;
    t.reorder_in_ms = clock.phase[0].span_ms();
    t.compute_ms = clock.phase[1].span_ms();
    t.reduce_ms = clock.phase[2].span_ms();
    t.reorder_out_ms = clock.phase[3].span_ms();
    t.total_ms = std::chrono::duration<double, std::milli>(end - start).count();
    return t;
}

inline void call_hook(const PipelineConfig& cfg, std::string_view stage, const BatchRange& b, std::uint64_t asset) {
    if (cfg.stage_hook) cfg.stage_hook(stage, b.index, asset);
}

template <class Arith>
std::vector<QeCoefficients<Arith>> prepare(const Arith& setup, const GridSpec& grid,
                                           const std::vector<HestonParams>& params, const DrawProvider& draws,
                                           const PipelineConfig& config) {
    validate_pipeline_config(config);
    if (!(draws.grid() == grid)) throw ValidationError("draw provider grid does not match simulation grid");
    check_cache_budget(grid, config);
    return make_all_coefficients(setup, expand_params(params, grid.assets()));
}

}  // namespace detail

/// Runs the stage chain one chunk at a time on the calling thread.
template <class Arith>
PipelineResult<typename Arith::value_type> run_sequential(const Arith& proto, const GridSpec& grid,
                                                          const std::vector<HestonParams>& params,
                                                          const DrawProvider& draws, const PipelineConfig& config = {}) {
    using V = typename Arith::value_type;
    using namespace detail;
    const auto start = Clock::now();
    PipelineResult<V> res;
    const Arith ar = proto.with_diagnostics(&res.diagnostics);
    const auto coeffs = prepare(ar, grid, params, draws, config);
    const ChunkWork<Arith> work{grid, draws, coeffs, config.martingale};

    res.reduced.grid = grid;
    res.reduced.values.resize(grid.paths() * grid.timesteps());
    PhaseClock clock;
    ReductionCache<Arith> cache;
    const std::uint64_t batch = std::min(config.batch, grid.paths());
    for (std::uint64_t k = 0; k < batch_count(grid.paths(), batch); ++k) {
        const BatchRange br = batch_range(grid.paths(), batch, k);
        cache.reset(k, br.first_path, br.count, grid.timesteps());
        for (std::uint64_t a = 0; a < grid.assets(); ++a) {
            Chunk<V> c;
            c.batch = br;
            c.asset = a;
            clock[Phase::reorder_in].time([&] { work.draws_stage(c); });
            clock[Phase::compute].time([&] {
                work.variance_stage(ar, c);
                work.log_price_stage(ar, c);
                work.exponential_stage(ar, c);
            });
            clock[Phase::reduce].time([&] { cache.absorb(ar, std::span<const V>(c.x)); });
        }
        clock[Phase::reorder_out].time([&] { cache.drain(ar, std::span<V>(res.reduced.values), res.diagnostics); });
    }
    res.timings = to_timings(clock, start, Clock::now());
    return res;
}

/// Runs draws -> variance -> log price -> exponential -> reduction -> host
/// drain as concurrently running stages joined by bounded streams. With
/// `threads` > 1, path batches are dealt round-robin to that many independent
/// stage chains. Values are bit-identical to run_sequential.
template <class Arith>
PipelineResult<typename Arith::value_type> run_pipeline(const Arith& proto, const GridSpec& grid,
                                                        const std::vector<HestonParams>& params,
                                                        const DrawProvider& draws, const PipelineConfig& config = {}) {
    using V = typename Arith::value_type;
    using namespace detail;
    using ChunkPtr = std::unique_ptr<Chunk<V>>;
    using CachePtr = std::unique_ptr<ReductionCache<Arith>>;

    const auto start = Clock::now();
    PipelineResult<V> res;
    Diagnostics setup_diag;
    const auto coeffs = prepare(proto.with_diagnostics(&setup_diag), grid, params, draws, config);
    const ChunkWork<Arith> work{grid, draws, coeffs, config.martingale};
    res.reduced.grid = grid;
    res.reduced.values.resize(grid.paths() * grid.timesteps());

    const std::uint64_t batch = std::min(config.batch, grid.paths());
    const std::uint64_t nb = batch_count(grid.paths(), batch);
    const unsigned lanes = static_cast<unsigned>(std::min<std::uint64_t>(config.threads, nb));
    const std::size_t cap = config.stream_capacity;
    const auto wd = config.watchdog;

    struct Lane {
        Lane(std::size_t cap, std::chrono::milliseconds wd)
            : to_variance(cap, wd), to_log(cap, wd), to_exp(cap, wd), to_reduce(cap, wd), to_drain(cap, wd),
              free_caches(2, wd) {}
        BoundedStream<ChunkPtr> to_variance, to_log, to_exp, to_reduce;
        BoundedStream<CachePtr> to_drain, free_caches;
        void abort() {
            to_variance.abort();
            to_log.abort();
            to_exp.abort();
            to_reduce.abort();
            to_drain.abort();
            free_caches.abort();
        }
    };
    std::vector<std::unique_ptr<Lane>> lane_state;
    for (unsigned l = 0; l < lanes; ++l) lane_state.push_back(std::make_unique<Lane>(cap, wd));

    std::mutex err_mu;
    std::exception_ptr first_error;
    auto fail = [&](std::exception_ptr e) {
        {
            std::lock_guard lock(err_mu);
            if (!first_error) first_error = e;
        }
        for (auto& l : lane_state) l->abort();
    };

    constexpr int kStages = 6;
    std::vector<Diagnostics> diag(static_cast<std::size_t>(lanes) * kStages);
    std::vector<PhaseClock> clocks(static_cast<std::size_t>(lanes) * kStages);
    std::vector<std::thread> pool;

    auto spawn = [&](unsigned lane, int stage, auto body) {
        const std::size_t slot = static_cast<std::size_t>(lane) * kStages + stage;
        pool.emplace_back([&, lane, slot, body] {
            try {
                const Arith ar = proto.with_diagnostics(&diag[slot]);
                body(*lane_state[lane], ar, clocks[slot], diag[slot]);
            } catch (const StreamAborted&) {
            } catch (...) {
                fail(std::current_exception());
            }
        });
    };

    // Forwards chunks from `in` to `out` through one compute step.
    auto relay = [&](const char* name, BoundedStream<ChunkPtr> Lane::*in, BoundedStream<ChunkPtr> Lane::*out,
                     auto step) {
        return [&, name, in, out, step](Lane& L, const Arith& ar, PhaseClock& clk, Diagnostics&) {
            while (auto c = (L.*in).pop(name)) {
                call_hook(config, name, (*c)->batch, (*c)->asset);
                clk[Phase::compute].time([&] { step(ar, **c); });
                (L.*out).push(std::move(*c), name);
            }
            (L.*out).close();
        };
    };

    for (unsigned lane = 0; lane < lanes; ++lane) {
        spawn(lane, 0, [&, lane](Lane& L, const Arith&, PhaseClock& clk, Diagnostics&) {
            for (std::uint64_t k = lane; k < nb; k += lanes) {
                const BatchRange br = batch_range(grid.paths(), batch, k);
                for (std::uint64_t a = 0; a < grid.assets(); ++a) {
                    call_hook(config, "draws", br, a);
                    auto c = std::make_unique<Chunk<V>>();
                    c->batch = br;
                    c->asset = a;
                    clk[Phase::reorder_in].time([&] { work.draws_stage(*c); });
                    L.to_variance.push(std::move(c), "draws");
                }
            }
            L.to_variance.close();
        });
        spawn(lane, 1, relay("variance", &Lane::to_variance, &Lane::to_log,
                             [&](const Arith& ar, Chunk<V>& c) { work.variance_stage(ar, c); }));
        spawn(lane, 2, relay("log_price", &Lane::to_log, &Lane::to_exp,
                             [&](const Arith& ar, Chunk<V>& c) { work.log_price_stage(ar, c); }));
        spawn(lane, 3, relay("exponential", &Lane::to_exp, &Lane::to_reduce,
                             [&](const Arith& ar, Chunk<V>& c) { work.exponential_stage(ar, c); }));
        spawn(lane, 4, [&](Lane& L, const Arith& ar, PhaseClock& clk, Diagnostics& drain_diag) {
            const bool ping_pong = config.double_buffer;
            if (ping_pong) {
                L.free_caches.push(std::make_unique<ReductionCache<Arith>>(), "reduce");
                L.free_caches.push(std::make_unique<ReductionCache<Arith>>(), "reduce");
            }
            CachePtr single = ping_pong ? nullptr : std::make_unique<ReductionCache<Arith>>();
            CachePtr cache;
            while (auto c = L.to_reduce.pop("reduce")) {
                Chunk<V>& chunk = **c;
                call_hook(config, "reduce", chunk.batch, chunk.asset);
                if (chunk.asset == 0) {
                    if (ping_pong) {
                        auto next = L.free_caches.pop("reduce");
                        if (!next) throw StreamAborted{};
                        cache = std::move(*next);
                    } else {
                        cache = std::move(single);
                    }
                    cache->reset(chunk.batch.index, chunk.batch.first_path, chunk.batch.count, grid.timesteps());
                }
                clk[Phase::reduce].time([&] { cache->absorb(ar, std::span<const V>(chunk.x)); });
                if (chunk.asset + 1 == grid.assets()) {
                    if (ping_pong) {
                        L.to_drain.push(std::move(cache), "reduce");
                    } else {
                        clk[Phase::reorder_out].time(
                            [&] { cache->drain(ar, std::span<V>(res.reduced.values), drain_diag); });
                        single = std::move(cache);
                    }
                }
            }
            L.to_drain.close();
        });
        if (config.double_buffer) {
            spawn(lane, 5, [&](Lane& L, const Arith& ar, PhaseClock& clk, Diagnostics& drain_diag) {
                    while (auto c = L.to_drain.pop("drain")) {
                    call_hook(config, "drain", batch_range(grid.paths(), batch, (*c)->batch_index()), grid.assets());
                    clk[Phase::reorder_out].time(
                        [&] { (*c)->drain(ar, std::span<V>(res.reduced.values), drain_diag); });
                    L.free_caches.push(std::move(*c), "drain");
                }
            });
        }
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);

    PhaseClock clock;
    for (const auto& c : clocks) clock.merge(c);
    res.diagnostics = setup_diag;
    for (const auto& d : diag) res.diagnostics += d;
    res.timings = to_timings(clock, start, Clock::now());
    return res;
}

// ---------------------------------------------------------------------------
// Format-erased entry point
// ---------------------------------------------------------------------------

enum class ExecMode { pipeline, sequential };

/// Reduced surface converted to binary64, host order [path][timestep].
struct RunOutput {
    std::vector<double> reduced;
    GridSpec grid{1, 1, 1};
    NumericFormat format;
    PhaseTimings timings;
    Diagnostics diagnostics;
};

inline RunOutput run_reduced(const NumericFormat& fmt, const GridSpec& grid, const std::vector<HestonParams>& params,
                             const DrawProvider& draws, const PipelineConfig& config = {},
                             ExecMode mode = ExecMode::pipeline) {
    return visit_format(fmt, nullptr, [&](const auto& ar) {
        auto r = mode == ExecMode::pipeline ? run_pipeline(ar, grid, params, draws, config)
                                            : run_sequential(ar, grid, params, draws, config);
        RunOutput out;
        out.grid = grid;
        out.format = fmt;
        out.timings = r.timings;
        out.diagnostics = r.diagnostics;
        out.reduced.resize(r.reduced.values.size());
        for (std::size_t i = 0; i < out.reduced.size(); ++i) out.reduced[i] = ar.to_real(r.reduced.values[i]);
        return out;
    });
}

}  // namespace hflow
