// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "hflow/core_model.hpp"

using namespace hflow;

TEST(Presets, TinyAndHugeGrids) {
    const auto tiny = problem_size_preset("tiny");
    EXPECT_EQ(tiny.grid, GridSpec(5, 126, 25000));
    const auto huge = problem_size_preset("huge");
    EXPECT_EQ(huge.grid, GridSpec(50, 1260, 25000));
}

TEST(Presets, LookupIgnoresCase) { EXPECT_EQ(problem_size_preset("Medium").grid, GridSpec(20, 252, 25000)); }

TEST(Presets, UnknownNameIsRejected) {
    EXPECT_THROW(problem_size_preset("gigantic"), UnknownPreset);
    try {
        problem_size_preset("gigantic");
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "unknown_preset");
        EXPECT_NE(std::string(e.what()).find("gigantic"), std::string::npos);
    }
}

struct TableRow {
    const char* name;
    std::uint64_t elements, datapoints, megabytes;
};

// element counts in units, sizes in 10^6 bytes
constexpr TableRow kTable[] = {
    {"tiny", 15'750'000, 31'500'000, 252},        {"small", 31'500'000, 63'000'000, 504},
    {"medium", 126'000'000, 252'000'000, 2016},   {"large", 378'000'000, 756'000'000, 6048},
    {"huge", 1'575'000'000, 3'150'000'000, 25200},
};

TEST(ElementCount, MatchesProblemSizeTableForEveryPreset) {
    for (const auto& row : kTable) {
        const auto c = element_count(problem_size_preset(row.name).grid);
        EXPECT_EQ(c.elements, row.elements) << row.name;
        EXPECT_EQ(c.datapoints, row.datapoints) << row.name;
        EXPECT_EQ(c.bytes, row.megabytes * 1'000'000) << row.name;
    }
}

TEST(ElementCount, UnitGrid) {
    const auto c = element_count(GridSpec(1, 1, 1));
    EXPECT_EQ(c, (ElementCounts{1, 2, 16}));
}

TEST(ElementCount, DoublingAnyExtentDoublesElements) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::uint64_t> d(1, 5000);
    for (int i = 0; i < 500; ++i) {
        const GridSpec g(d(rng), d(rng), d(rng));
        const auto e = element_count(g).elements;
        EXPECT_EQ(element_count(g.with_assets(2 * g.assets())).elements, 2 * e);
        EXPECT_EQ(element_count(g.with_timesteps(2 * g.timesteps())).elements, 2 * e);
        EXPECT_EQ(element_count(g.with_paths(2 * g.paths())).elements, 2 * e);
    }
}

TEST(GridSpec, ZeroExtentsAreRejected) {
    EXPECT_THROW(GridSpec(0, 1, 1), ValidationError);
    EXPECT_THROW(GridSpec(1, 0, 1), ValidationError);
    EXPECT_THROW(GridSpec(1, 1, 0), ValidationError);
}

TEST(ValidateHeston, FellerSatisfiedGivesNoWarning) {
    const HestonParams p{1.5, 0.04, 0.3, -0.7, 0.04, 100.0, 0.02, 1.0 / 252.0};
    const auto v = validate_heston(p);
    EXPECT_EQ(v.params, p);
    EXPECT_TRUE(v.warnings.empty());
}

TEST(ValidateHeston, RhoOutOfRangeIsRejected) {
    HestonParams p;
    p.rho = -1.5;
    try {
        validate_heston(p);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("rho"), std::string::npos);
    }
}

TEST(ValidateHeston, FellerViolationWarns) {
    HestonParams p;
    p.kappa = 0.5;
    p.theta = 0.04;
    p.sigma = 0.5;
    const auto v = validate_heston(p);
    ASSERT_EQ(v.warnings.size(), 1u);
    EXPECT_NE(v.warnings[0].find("Feller"), std::string::npos);
}

TEST(ValidateHeston, RejectsEachBadField) {
    auto bad = [](auto mutate) {
        HestonParams p;
        mutate(p);
        EXPECT_THROW(validate_heston(p), ValidationError);
    };
    bad([](HestonParams& p) { p.kappa = 0.0; });
    bad([](HestonParams& p) { p.theta = -0.01; });
    bad([](HestonParams& p) { p.sigma = -0.1; });
    bad([](HestonParams& p) { p.v0 = -1e-9; });
    bad([](HestonParams& p) { p.s0 = 0.0; });
    bad([](HestonParams& p) { p.dt = 0.0; });
    bad([](HestonParams& p) { p.r = std::numeric_limits<double>::quiet_NaN(); });
    bad([](HestonParams& p) { p.rho = std::numeric_limits<double>::infinity(); });
}

TEST(ValidateHeston, IsIdempotent) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        HestonParams p;
        p.kappa = 0.05 + 5.0 * u(rng);
        p.theta = 0.2 * u(rng);
        p.sigma = 1.5 * u(rng);
        p.rho = 2.0 * u(rng) - 1.0;
        p.v0 = 0.2 * u(rng);
        p.s0 = 1.0 + 200.0 * u(rng);
        p.r = 0.1 * u(rng) - 0.02;
        p.dt = 1.0 / (1.0 + 1000.0 * u(rng));
        const auto once = validate_heston(p);
        const auto twice = validate_heston(once.params);
        EXPECT_EQ(once.params, twice.params);
        EXPECT_EQ(once.warnings, twice.warnings);
    }
}
