// SPDX-License-Identifier: Apache-2.0
//
// One PASS/FAIL line per acceptance criterion. Exits nonzero if any fail.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hflow/accuracy.hpp"
#include "hflow/cost_model.hpp"
#include "hflow/layout.hpp"
#include "hflow/pipeline.hpp"
#include "hflow/reduction.hpp"
#include "support/oracles.hpp"

using namespace hflow;

namespace {

// Pinned tolerances.
constexpr double kFloatDeviationMax = 0.005;    // percent
constexpr double kHalfLongHorizonMin = 1.0;     // percent
constexpr double kMartingaleSigmas = 3.0;
constexpr double kCallRelativeTolerance = 0.005;
constexpr double kCostRatioMin = 100.0;

struct Outcome {
    bool pass = false;
    std::string measured;
};

std::string fmt(double v, int precision = 6) {
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
    return true;
}

std::string capture(const std::string& cmd) {
    std::string out;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return out;
    char buf[4096];
    for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) out.append(buf, n);
    ::pclose(pipe);
    return out;
}

Outcome preset_fidelity() {
    const std::string expected =
        "preset,assets,timesteps,paths,elements_millions,datapoints_millions,size_mb\n"
        "tiny,5,126,25000,15.75,31.5,252\n"
        "small,10,126,25000,31.5,63,504\n"
        "medium,20,252,25000,126,252,2016\n"
        "large,30,504,25000,378,756,6048\n"
        "huge,50,1260,25000,1575,3150,25200\n";
    const std::string got = capture("'" HFLOW_CLI_PATH "' presets");
    return {got == expected, got == expected ? "5 rows exact" : "output:\n" + got};
}

Outcome dead_format_reading() {
    const std::vector<double> ref{101.5, 99.25, 100.0, 87.0, 140.0};
    const double nonfinite = deviation(std::vector<double>(5, NAN), ref);
    const double inf = deviation(std::vector<double>(5, INFINITY), ref);
    const double zero = deviation(std::vector<double>(5, 0.0), ref);
    return {nonfinite == 100.0 && inf == 100.0 && zero == 100.0,
            "nan " + fmt(nonfinite) + "%, inf " + fmt(inf) + "%, zero " + fmt(zero) + "%"};
}

struct SweepResult {
    DeviationReport report;
    double seconds = 0.0;
};

const SweepResult& tiny_sweep() {
    static const SweepResult r = [] {
        SweepOptions opt;
        for (const char* f : {"double", "float", "half"}) opt.formats.push_back(NumericFormat::parse(f));
        opt.timesteps = {126, 252, 504, 1260, 2520};
        opt.base_grid = problem_size_preset("tiny").grid;
        const auto t0 = std::chrono::steady_clock::now();
        SweepResult out{precision_sweep(opt), 0.0};
        out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return out;
    }();
    return r;
}

Outcome double_self_consistency() {
    const auto& rep = tiny_sweep().report;
    bool ok = true;
    std::string m;
    for (std::size_t row = 0; row < rep.timesteps.size(); ++row) {
        ok = ok && rep.at(row, 0).percent == 0.0 && !rep.at(row, 0).dead;
        m += "T=" + std::to_string(rep.timesteps[row]) + ":" + fmt(rep.at(row, 0).percent) + "% ";
    }
    return {ok, m + "(sweep " + fmt(tiny_sweep().seconds, 4) + " s)"};
}

Outcome float_fidelity() {
    const auto& rep = tiny_sweep().report;
    bool ok = true;
    std::string m;
    for (std::size_t row = 0; row < rep.timesteps.size(); ++row) {
        ok = ok && !rep.at(row, 1).dead && rep.at(row, 1).percent < kFloatDeviationMax;
        m += "T=" + std::to_string(rep.timesteps[row]) + ":" + fmt(rep.at(row, 1).percent, 3) + "% ";
    }
    return {ok, m + "(limit " + fmt(kFloatDeviationMax) + "%)"};
}

Outcome half_trend() {
    const auto& rep = tiny_sweep().report;
    const double first = rep.at(0, 2).percent;
    const double last = rep.at(rep.timesteps.size() - 1, 2).percent;
    std::string m;
    for (std::size_t row = 0; row < rep.timesteps.size(); ++row)
        m += "T=" + std::to_string(rep.timesteps[row]) + ":" + fmt(rep.at(row, 2).percent, 4) + "% ";
    return {last > first && last > kHalfLongHorizonMin, m};
}

Outcome martingale_property() {
    HestonParams p = default_heston();
    p.r = 0.0;
    const GridSpec g(1, 126, 100000);
    const auto out = run_reduced(NumericFormat::float64(), g, {p}, DrawProvider::keyed({1}, g));
    long double sum = 0, sq = 0;
    for (std::uint64_t i = 0; i < g.paths(); ++i) {
        const long double st = out.reduced[i * g.timesteps() + g.timesteps() - 1];
        sum += st;
        sq += st * st;
    }
    const long double n = g.paths();
    const double mean = static_cast<double>(sum / n);
    const double stderr_ = static_cast<double>(std::sqrt((sq - n * (sum / n) * (sum / n)) / (n - 1) / n));
    const double gap = std::fabs(mean - p.s0);
    return {gap <= kMartingaleSigmas * stderr_,
            "mean " + fmt(mean, 8) + ", |gap| " + fmt(gap, 4) + ", 3*stderr " + fmt(kMartingaleSigmas * stderr_, 4)};
}

Outcome batch_schedule_invariance() {
    const GridSpec g = problem_size_preset("tiny").grid;
    const auto draws = DrawProvider::keyed({1}, g);
    const std::vector<HestonParams> params{default_heston()};
    std::vector<double> ref;
    int runs = 0, mismatches = 0;
    for (std::uint64_t B : {457ull, 500ull, 1000ull, 25000ull})
        for (unsigned threads : {1u, 4u, 8u}) {
            PipelineConfig cfg;
            cfg.batch = B;
            cfg.threads = threads;
            auto out = run_reduced(NumericFormat::float64(), g, params, draws, cfg).reduced;
            if (ref.empty()) ref = std::move(out);
            else if (!bit_equal(out, ref)) ++mismatches;
            ++runs;
        }
    return {mismatches == 0, std::to_string(runs) + " runs, " + std::to_string(mismatches) + " mismatches"};
}

Outcome pipeline_transparency() {
    const GridSpec g(2, 4, 8);
    const auto draws = DrawProvider::keyed({3}, g);
    const std::vector<HestonParams> params{default_heston()};
    std::string m;
    bool ok = true;
    for (const char* f : {"double", "float", "half", "fixed:32:16"}) {
        const bool same = visit_format(NumericFormat::parse(f), nullptr, [&](const auto& ar) {
            const auto ref = oracle::scalar_reference(ar, g, params, draws, true);
            PipelineConfig cfg;
            cfg.batch = 3;
            const auto got = run_pipeline(ar, g, params, draws, cfg).reduced.values;
            std::vector<double> real;
            for (const auto& v : got) real.push_back(ar.to_real(v));
            return bit_equal(real, ref);
        });
        ok = ok && same;
        m += std::string(f) + (same ? " equal " : " DIFFER ");
    }
    return {ok, m};
}

Outcome reduction_oracle() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> d(-100.0, 100.0);
    int failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const GridSpec g = oracle::random_grid(rng, 8);
        std::vector<double> host(g.elements());
        for (auto& x : host) x = d(rng);
        const std::uint64_t B = std::uniform_int_distribution<std::uint64_t>(1, g.paths())(rng);
        const PathSurface<double> s{reorder_to_device(host, g, B), Layout::device, g, B};
        if (!bit_equal(ls_path_reduction(DoubleArith{}, s).values, oracle::brute_force_max(host, g))) ++failures;
    }
    return {failures == 0, "100 grids, " + std::to_string(failures) + " mismatches"};
}

Outcome reorder_bijection() {
    std::mt19937_64 rng(2025);
    int failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const GridSpec g = oracle::random_grid(rng, 12);
        const std::uint64_t B = std::uniform_int_distribution<std::uint64_t>(1, g.paths())(rng);
        std::vector<std::uint64_t> host(g.elements());
        std::iota(host.begin(), host.end(), 0);
        if (reorder_from_device(reorder_to_device(host, g, B), g, B) != host) ++failures;
    }
    return {failures == 0, "100 grids, " + std::to_string(failures) + " mismatches"};
}

Outcome fixed_point_conformance() {
    const std::vector<FixedFormat> formats = {{8, 3},   {8, 4},   {16, 6},  {16, 8},
                                              {32, 12}, {32, 16}, {64, 12}, {64, 24}};
    std::mt19937_64 rng(2026);
    std::uint64_t checks = 0, failures = 0;
    for (const auto& f : formats) {
        std::uniform_real_distribution<double> in_range(f.min_value(), f.max_value());
        const auto fmt_ = NumericFormat::fixed_point(f.width, f.int_bits);
        for (int i = 0; i < 10000; ++i) {
            const double x = in_range(rng), y = in_range(rng);
            const auto a = std::get<FixedValue>(quantize(x, fmt_));
            const auto b = std::get<FixedValue>(quantize(y, fmt_));
            failures += a.raw != oracle::quantize_raw(oracle::exact(x), f);
            failures += b.raw != oracle::quantize_raw(oracle::exact(y), f);
            failures += fx_arith(ArithOp::add, a, b).raw != oracle::add_raw(a.raw, b.raw, f);
            failures += fx_arith(ArithOp::sub, a, b).raw != oracle::sub_raw(a.raw, b.raw, f);
            failures += fx_arith(ArithOp::mul, a, b).raw != oracle::mul_raw(a.raw, b.raw, f);
            checks += 5;
        }
    }
    return {failures == 0, std::to_string(checks) + " checks, " + std::to_string(failures) + " mismatches"};
}

Outcome cost_anchors() {
    const auto cache = cache_bytes(500, 1260);
    const auto k1260 = max_kernels({0.1604, 3, 32});
    const auto k504 = max_kernels(scale_budget({0.1604, 3, 32}, 1260, 504));
    bool ordered = true;
    for (const auto& p : size_presets()) {
        const double i = estimate_cycles(DesignVariant::initial, p.grid, 500);
        const double d = estimate_cycles(DesignVariant::dataflow, p.grid, 500);
        const double x = estimate_cycles(DesignVariant::interchange, p.grid, 500);
        const double b = estimate_cycles(DesignVariant::double_buffer, p.grid, 500);
        ordered = ordered && i > d && d > x && x > b;
    }
    const auto tiny = problem_size_preset("tiny").grid;
    const double ratio = estimate_cycles(DesignVariant::initial, tiny, 500) /
                         estimate_cycles(DesignVariant::double_buffer, tiny, 500);
    return {cache == 5'040'000 && k1260 == 6 && k504 == 10 && ordered && ratio >= kCostRatioMin,
            "cache " + std::to_string(cache) + " B, kernels " + std::to_string(k1260) + "/" + std::to_string(k504) +
                ", ordering " + (ordered ? "ok" : "broken") + ", tiny ratio " + fmt(ratio, 5)};
}

Outcome european_call() {
    const HestonParams p = default_heston();
    const double maturity = 0.5, strike = 100.0;
    const std::uint64_t steps = static_cast<std::uint64_t>(std::llround(maturity / p.dt));
    const GridSpec g(1, steps, 200000);
    const auto out = run_reduced(NumericFormat::float64(), g, {p}, DrawProvider::keyed({1}, g));
    long double sum = 0, sq = 0;
    for (std::uint64_t i = 0; i < g.paths(); ++i) {
        const long double payoff = std::max(0.0, out.reduced[i * steps + steps - 1] - strike);
        sum += payoff;
        sq += payoff * payoff;
    }
    const long double n = g.paths();
    const double disc = std::exp(-p.r * maturity);
    const double mc = disc * static_cast<double>(sum / n);
    const double se = disc * static_cast<double>(std::sqrt((sq - n * (sum / n) * (sum / n)) / (n - 1) / n));
    const double ref = oracle::heston_call(p, maturity, strike);
    const double rel = std::fabs(mc - ref) / ref;
    return {rel <= kCallRelativeTolerance, "MC " + fmt(mc, 7) + " (se " + fmt(se, 3) + "), reference " +
                                               fmt(ref, 7) + ", rel err " + fmt(100.0 * rel, 3) + "% (limit " +
                                               fmt(100.0 * kCallRelativeTolerance) + "%)"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"preset fidelity", preset_fidelity},
        {"dead-format reading", dead_format_reading},
        {"double self-consistency", double_self_consistency},
        {"float fidelity", float_fidelity},
        {"half-precision trend", half_trend},
        {"martingale property", martingale_property},
        {"batch/schedule invariance", batch_schedule_invariance},
        {"pipeline transparency", pipeline_transparency},
        {"reduction oracle", reduction_oracle},
        {"reorder bijection", reorder_bijection},
        {"fixed-point conformance", fixed_point_conformance},
        {"cost-model anchors", cost_anchors},
        {"european-call sanity", european_call},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << std::setw(2) << i + 1 << "] " << criteria[i].first << ": "
                  << o.measured << " [" << fmt(secs, 3) << " s]" << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
