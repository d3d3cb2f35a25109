// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "hflow/report.hpp"

using namespace hflow;

namespace {

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

BenchRecord sample_record(const std::string& preset, const std::string& format) {
    BenchRecord r;
    r.preset = preset;
    r.format = format;
    r.threads = 2;
    r.reorder_in_ms = 1.25;
    r.compute_ms = 10.5;
    r.reduce_ms = 3.0;
    r.reorder_out_ms = 0.75;
    r.total_ms = 12.0;
    r.elements_per_s = 1.5e8;
    r.wrap_events = 4;
    r.warnings = 1;
    r.note = "a, b";
    r.checksum = 0x0123456789abcdefull;
    return r;
}

DeviationReport sample_report() {
    DeviationReport rep;
    rep.formats = {"double", "half", "fixed:8:3"};
    rep.timesteps = {126, 252};
    rep.grid = GridSpec(4, 1, 25000);
    rep.seed = 9;
    for (std::size_t row = 0; row < 2; ++row) {
        std::vector<DeviationCell> cells(3);
        cells[1].percent = 0.01 * static_cast<double>(row + 1);
        cells[2].percent = 100.0;
        cells[2].dead = true;
        cells[2].diagnostic = "fixed divide by zero";
        cells[2].events.wrap_events = 17;
        rep.cells.push_back(cells);
    }
    return rep;
}

}  // namespace

TEST(BenchReport, CsvHasMetaHeaderAndOneRowPerRecord) {
    const ReportMeta meta{"bench", 0xabcull};
    const auto csv = bench_csv({sample_record("tiny", "double"), sample_record("small", "float")}, meta);
    const auto ls = lines(csv);
    ASSERT_EQ(ls.size(), 4u);
    EXPECT_EQ(ls[0], "# tool=hflow version=0.1.0 command=bench config_hash=0000000000000abc");
    EXPECT_EQ(ls[1], kBenchCsvHeader);
    EXPECT_EQ(ls[2].rfind("tiny,double,2,1.250,10.500,3.000,0.750,12.000,150000000.0,4,1,\"a, b\",", 0), 0u);
    EXPECT_THROW(bench_csv({}, meta), ValidationError);
}

TEST(BenchReport, JsonRoundTrip) {
    std::vector<BenchRecord> recs{sample_record("tiny", "double"), sample_record("huge", "fixed:16:8")};
    recs[1].skipped = true;
    EXPECT_EQ(bench_records_from_json(bench_json(recs, {"bench", 1})), recs);
    EXPECT_THROW(bench_records_from_json("{\"records\":[{\"preset\":1}]}"), DataError);
}

TEST(BenchReport, PlotDataOneFilePerFormat) {
    std::vector<BenchRecord> recs{sample_record("tiny", "double"), sample_record("small", "double"),
                                  sample_record("tiny", "fixed:8:3")};
    const auto files = bench_plot_data(recs, {"bench", 1});
    ASSERT_EQ(files.size(), 2u);
    EXPECT_EQ(files[0].first, "runtime_double.csv");
    EXPECT_EQ(files[1].first, "runtime_fixed_8_3.csv");
    EXPECT_EQ(lines(files[0].second).size(), 4u);
}

TEST(DeviationReport, CsvShape) {
    const auto ls = lines(deviation_csv(sample_report(), {"sweep", 2}));
    ASSERT_EQ(ls.size(), 4u);
    EXPECT_EQ(ls[1], "timesteps,double,half,fixed:8:3");
    EXPECT_EQ(ls[2], "126,0.000000,0.010000,100.000000");
    EXPECT_EQ(ls[3], "252,0.000000,0.020000,100.000000");
}

TEST(DeviationReport, JsonRoundTrip) {
    const auto rep = sample_report();
    const auto back = deviation_report_from_json(deviation_json(rep, {"sweep", 2}));
    EXPECT_EQ(back.formats, rep.formats);
    EXPECT_EQ(back.timesteps, rep.timesteps);
    EXPECT_EQ(back.seed, rep.seed);
    EXPECT_EQ(back.grid.assets(), 4u);
    EXPECT_EQ(back.grid.paths(), 25000u);
    for (std::size_t row = 0; row < 2; ++row)
        for (std::size_t col = 0; col < 3; ++col) {
            EXPECT_EQ(back.at(row, col).percent, rep.at(row, col).percent);
            EXPECT_EQ(back.at(row, col).dead, rep.at(row, col).dead);
            EXPECT_EQ(back.at(row, col).diagnostic, rep.at(row, col).diagnostic);
            EXPECT_EQ(back.at(row, col).events, rep.at(row, col).events);
        }
    EXPECT_THROW(deviation_report_from_json("{\"grid\":3}"), DataError);
    EXPECT_THROW(deviation_report_from_json("not json"), ValidationError);
}

TEST(DeviationReport, PlotDataPerFormat) {
    const auto files = deviation_plot_data(sample_report(), {"sweep", 2});
    ASSERT_EQ(files.size(), 3u);
    EXPECT_EQ(files[2].first, "deviation_fixed_8_3.csv");
    EXPECT_EQ(lines(files[2].second).back(), "252,100.000000");
}

TEST(CostReport, CsvRows) {
    const auto ls = lines(cost_csv(cost_table(problem_size_preset("tiny").grid, 100), {"cost", 3}));
    ASSERT_EQ(ls.size(), 6u);
    EXPECT_EQ(ls[1], "variant,cycles,cycles_per_element,ratio_vs_initial,flag");
    EXPECT_EQ(ls[2].rfind("initial,", 0), 0u);
    EXPECT_NE(ls[4].find("B < depth: II degraded"), std::string::npos);
}

TEST(Sinks, Parse) {
    EXPECT_EQ(parse_sink("csv"), Sink::csv);
    EXPECT_EQ(parse_sink("json"), Sink::json);
    EXPECT_EQ(parse_sink("plot-data"), Sink::plot_data);
    EXPECT_THROW(parse_sink("xml"), ValidationError);
}

TEST(Files, WriteAndReadBack) {
    const auto dir = std::filesystem::temp_directory_path() / ("hflow_report_" + std::to_string(::getpid()));
    const auto path = dir / "nested" / "x.txt";
    write_text_file(path, "abc\n");
    EXPECT_EQ(read_text_file(path), "abc\n");
    std::filesystem::remove_all(dir);
    EXPECT_THROW(read_text_file(path), IoError);
}

TEST(Config, DefaultsAndJsonRoundTrip) {
    RunConfig c;
    EXPECT_EQ(c.size, "tiny");
    EXPECT_EQ(c.batch, kDefaultBatch);
    EXPECT_EQ(apply_json(RunConfig{}, to_json(c)), c);
    c.grid = GridSpec(2, 3, 4);
    c.formats = {"half", "fixed:8:3"};
    c.params.push_back(default_heston());
    c.params.back().sigma = 0.5;
    EXPECT_EQ(apply_json(RunConfig{}, to_json(c)), c);
}

TEST(Config, LaterLayersWinFieldByField) {
    std::mt19937_64 rng(61);
    const std::vector<std::string> keys{"seed", "format", "batch", "threads", "reps", "martingale"};
    const auto value = [&](const std::string& k, int salt) -> Json {
        if (k == "format") return salt % 2 ? "half" : "float";
        if (k == "martingale") return salt % 2 == 0;
        return 1 + salt;
    };
    for (int trial = 0; trial < 300; ++trial) {
        Json file = Json::object(), flags = Json::object();
        for (const auto& k : keys) {
            if (rng() % 2) file[k] = value(k, static_cast<int>(rng() % 50));
            if (rng() % 2) flags[k] = value(k, static_cast<int>(rng() % 50));
        }
        const RunConfig c = resolve_config(file, flags);
        const Json out = to_json(c);
        const Json defaults = to_json(RunConfig{});
        for (const auto& k : keys) {
            const Json expect = flags.contains(k) ? flags[k] : file.contains(k) ? file[k] : defaults[k];
            EXPECT_EQ(out[k], expect) << k << " file=" << file.dump() << " flags=" << flags.dump();
        }
    }
}

TEST(Config, ErrorsNameTheField) {
    try {
        apply_json(RunConfig{}, Json{{"bogus", 1}});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
    }
    try {
        apply_json(RunConfig{}, Json{{"batch", "many"}});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("batch"), std::string::npos);
    }
    EXPECT_THROW(apply_json(RunConfig{}, Json::array()), ValidationError);
    EXPECT_THROW(apply_json(RunConfig{}, Json{{"grid", {{"assets", 1}}}}), ValidationError);
    EXPECT_THROW(apply_json(RunConfig{}, Json{{"params", {{"kappa", "x"}}}}), ValidationError);
    EXPECT_THROW(read_json_file("/nonexistent/hflow.json"), IoError);
}

TEST(Config, GridResolution) {
    RunConfig c;
    EXPECT_EQ(resolve_grid(c), problem_size_preset("tiny").grid);
    c.timesteps = {504};
    EXPECT_EQ(resolve_grid(c).timesteps(), 504u);
    c.grid = GridSpec(1, 2, 3);
    c.timesteps.clear();
    EXPECT_EQ(resolve_grid(c), GridSpec(1, 2, 3));
    c.size = "nope";
    c.grid.reset();
    EXPECT_THROW(resolve_grid(c), UnknownPreset);
}

TEST(Config, HashIsStableAndSensitive) {
    RunConfig a, b;
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.seed = 2;
    EXPECT_NE(config_hash(a), config_hash(b));
    EXPECT_EQ(hex64(0xabcull), "0000000000000abc");
}

TEST(Config, PipelineConfigIsValidated) {
    RunConfig c;
    c.batch = 77;
    c.threads = 3;
    const auto p = to_pipeline_config(c);
    EXPECT_EQ(p.batch, 77u);
    EXPECT_EQ(p.threads, 3u);
    c.batch = 0;
    EXPECT_THROW(to_pipeline_config(c), ValidationError);
}
