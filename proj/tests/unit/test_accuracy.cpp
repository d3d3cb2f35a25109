// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "hflow/accuracy.hpp"
#include "hflow/bench.hpp"

using namespace hflow;

TEST(Deviation, Examples) {
    const std::vector<double> ref{1.0, -2.0, 3.0, 4.0};
    EXPECT_EQ(deviation(ref, ref), 0.0);
    EXPECT_EQ(deviation(std::vector<double>(4, 0.0), ref), 100.0);
    std::vector<double> scaled;
    for (double x : ref) scaled.push_back(x * 1.01);
    EXPECT_NEAR(deviation(scaled, ref), 1.0, 1e-12);
}

TEST(Deviation, NonFiniteTestValuesCountAsZero) {
    const std::vector<double> ref{2.0, 2.0};
    EXPECT_EQ(deviation({NAN, INFINITY}, ref), 100.0);
    EXPECT_EQ(deviation({2.0, NAN}, ref), 50.0);
}

TEST(Deviation, Rejections) {
    EXPECT_THROW(deviation(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), SizeMismatch);
    EXPECT_THROW(deviation(std::vector<double>{1.0, 2.0}, std::vector<double>{0.0, 0.0}), DegenerateReference);
}

TEST(Deviation, InvariantUnderJointPermutationAndNonNegative) {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> d(-10.0, 10.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 64;
        std::vector<double> t(n), r(n);
        for (std::size_t i = 0; i < n; ++i) t[i] = d(rng), r[i] = d(rng);
        const double base = deviation(t, r);
        EXPECT_GE(base, 0.0);
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        std::vector<double> tp(n), rp(n);
        for (std::size_t i = 0; i < n; ++i) tp[i] = t[idx[i]], rp[i] = r[idx[i]];
        EXPECT_NEAR(deviation(tp, rp), base, 1e-12 * std::max(1.0, base));
    }
}

namespace {

SweepOptions small_sweep(std::vector<const char*> formats, std::vector<std::uint64_t> steps) {
    SweepOptions o;
    for (const char* f : formats) o.formats.push_back(NumericFormat::parse(f));
    o.timesteps = std::move(steps);
    o.base_grid = GridSpec(2, 1, 300);
    o.seed = {7};
    return o;
}

}  // namespace

TEST(Sweep, StructureAndDoubleColumn) {
    const auto rep = precision_sweep(small_sweep({"double", "float", "half"}, {20, 60}));
    ASSERT_EQ(rep.timesteps, (std::vector<std::uint64_t>{20, 60}));
    ASSERT_EQ(rep.formats, (std::vector<std::string>{"double", "float", "half"}));
    for (std::size_t row = 0; row < 2; ++row) {
        EXPECT_EQ(rep.at(row, 0).percent, 0.0);
        EXPECT_LT(rep.at(row, 1).percent, 0.005);
        EXPECT_GT(rep.at(row, 2).percent, rep.at(row, 1).percent);
        for (std::size_t col = 0; col < 3; ++col) EXPECT_FALSE(rep.at(row, col).dead);
    }
}

TEST(Sweep, Deterministic) {
    const auto a = precision_sweep(small_sweep({"half", "fixed:16:8"}, {30}));
    const auto b = precision_sweep(small_sweep({"half", "fixed:16:8"}, {30}));
    for (std::size_t col = 0; col < 2; ++col) EXPECT_EQ(a.at(0, col).percent, b.at(0, col).percent);
}

TEST(Sweep, WiderFixedFormatsAreNoWorse) {
    const auto rep = precision_sweep(small_sweep({"fixed:32:16", "fixed:8:4", "fixed:16:8"}, {126}));
    const double wide = rep.at(0, 0).percent;
    EXPECT_LE(wide, rep.at(0, 1).percent);
    EXPECT_LE(wide, rep.at(0, 2).percent);
    EXPECT_GT(rep.at(0, 1).events.wraps(), 0u);
}

TEST(Sweep, Rejections) {
    EXPECT_THROW(precision_sweep(small_sweep({"double"}, {})), ValidationError);
    EXPECT_THROW(precision_sweep(small_sweep({}, {10})), ValidationError);
}

TEST(Sweep, DefaultFormatsAreTheElevenColumns) {
    const auto f = default_sweep_formats();
    ASSERT_EQ(f.size(), 11u);
    EXPECT_EQ(f.front().to_string(), "half");
    EXPECT_EQ(f.back().to_string(), "fixed:64:24");
}

TEST(Bench, AccountingAndDeterminism) {
    BenchOptions o;
    o.cases = {{"mini", GridSpec(2, 30, 400)}};
    o.formats = {NumericFormat::parse("double"), NumericFormat::parse("fixed:8:3")};
    o.repetitions = 2;
    const auto recs = bench_run(o);
    ASSERT_EQ(recs.size(), 2u);
    for (const auto& r : recs) {
        EXPECT_FALSE(r.skipped);
        EXPECT_EQ(r.note, "");
        EXPECT_GT(r.total_ms, 0.0);
        EXPECT_NEAR(r.elements_per_s, 2.0 * 30 * 400 / (r.total_ms / 1000.0), 1e-6 * r.elements_per_s);
    }
    EXPECT_EQ(recs[0].wrap_events, 0u);
    EXPECT_GT(recs[1].wrap_events, 0u);
    const auto again = bench_run(o);
    EXPECT_EQ(again[0].checksum, recs[0].checksum);
    EXPECT_EQ(again[1].checksum, recs[1].checksum);
}

TEST(Bench, OverBudgetCaseIsSkipped) {
    BenchOptions o;
    o.cases = bench_cases({"huge"});
    o.memory_budget_bytes = 64ull << 20;
    const auto recs = bench_run(o);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_TRUE(recs[0].skipped);
    EXPECT_NE(recs[0].note.find("skipped"), std::string::npos);
}

TEST(Bench, RejectsZeroRepetitions) {
    BenchOptions o;
    o.cases = {{"mini", GridSpec(1, 2, 3)}};
    o.repetitions = 0;
    EXPECT_THROW(bench_run(o), ValidationError);
}
