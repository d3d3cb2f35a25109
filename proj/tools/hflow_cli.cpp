// SPDX-License-Identifier: Apache-2.0
//
// hflow command-line driver: run, sweep, bench, cost, presets.
// Exit codes: 0 success, 1 usage or invalid configuration, 2 runtime failure.

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hflow/hflow.hpp"

namespace fs = std::filesystem;
using hflow::Json;

namespace {

/// Raised for configuration problems detected before any work starts.
struct UsageError : hflow::Error {
    explicit UsageError(const std::string& m) : hflow::Error("usage", m) {}
};

void emit_error(const std::string& code, const std::string& message) {
    std::cerr << Json{{"error", code}, {"message", message}}.dump() << std::endl;
}

std::string shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Storage for every flag, plus the Option handles that tell whether a flag
/// was given.
struct Flags {
    std::string config, size, format, draws, out, martingale, double_buffer;
    std::vector<std::string> formats, sizes, variants, sinks;
    std::vector<std::uint64_t> timesteps;
    std::uint64_t batch = 0, seed = 0, memory_budget_mb = 0, ports = 0, total_ports = 0, depth = 0,
                  stream_capacity = 0;
    unsigned threads = 0, reps = 0;
    double uram = 0.0;
    std::map<std::string, CLI::Option*> given;
};

void add_options(CLI::App* sub, Flags& f) {
    auto& g = f.given;
    g["config"] = sub->add_option("--config", f.config, "JSON config file (flags override it)");
    g["size"] = sub->add_option("--size", f.size, "problem size preset (tiny, small, medium, large, huge)");
    g["format"] = sub->add_option("--format", f.format, "numeric format: double, float, half, fixed:W:I");
    g["formats"] = sub->add_option("--formats", f.formats, "comma-separated format list")->delimiter(',');
    g["timesteps"] = sub->add_option("--timesteps", f.timesteps, "timestep count(s)")->delimiter(',');
    g["batch"] = sub->add_option("--batch", f.batch, "paths per batch (default 500)");
    g["threads"] = sub->add_option("--threads", f.threads, "pipeline lanes (default 1)");
    g["seed"] = sub->add_option("--seed", f.seed, "generator seed (default 1)");
    g["draws"] = sub->add_option("--draws", f.draws, "binary draw file overriding keyed generation");
    g["martingale"] = sub->add_option("--martingale", f.martingale, "martingale correction on|off")
                          ->check(CLI::IsMember({"on", "off"}));
    g["double_buffer"] = sub->add_option("--double-buffer", f.double_buffer, "ping-pong reduction caches on|off")
                             ->check(CLI::IsMember({"on", "off"}));
    g["reps"] = sub->add_option("--reps", f.reps, "bench repetitions (default 5)");
    g["out"] = sub->add_option("--out", f.out, "output directory");
    g["sizes"] = sub->add_option("--sizes", f.sizes, "comma-separated presets for bench")->delimiter(',');
    g["sinks"] = sub->add_option("--sink", f.sinks, "report sinks: csv, json, plot-data")->delimiter(',');
    g["memory_budget_mb"] = sub->add_option("--memory-budget-mb", f.memory_budget_mb, "bench memory budget in MiB");
    g["stream_capacity"] = sub->add_option("--stream-capacity", f.stream_capacity, "bounded stream depth");
    g["variants"] = sub->add_option("--variants", f.variants, "cost model variants")->delimiter(',');
    g["uram"] = sub->add_option("--uram", f.uram, "UltraRAM fraction per kernel");
    g["ports"] = sub->add_option("--ports", f.ports, "memory ports per kernel");
    g["total_ports"] = sub->add_option("--total-ports", f.total_ports, "memory ports available");
    g["depth"] = sub->add_option("--depth", f.depth, "pipeline depth of the log-price stage");
}

bool given(const Flags& f, const std::string& key) { return f.given.at(key)->count() > 0; }

Json flag_layer(const Flags& f) {
    Json j = Json::object();
    auto set = [&](const std::string& key, auto value) {
        if (given(f, key)) j[key] = value;
    };
    set("size", f.size);
    set("format", f.format);
    set("formats", f.formats);
    set("timesteps", f.timesteps);
    set("batch", f.batch);
    set("threads", f.threads);
    set("seed", f.seed);
    set("draws", f.draws);
    if (given(f, "martingale")) j["martingale"] = f.martingale == "on";
    if (given(f, "double_buffer")) j["double_buffer"] = f.double_buffer == "on";
    set("reps", f.reps);
    set("out", f.out);
    set("sizes", f.sizes);
    set("sinks", f.sinks);
    set("memory_budget_mb", f.memory_budget_mb);
    set("stream_capacity", f.stream_capacity);
    set("variants", f.variants);
    set("uram", f.uram);
    set("ports", f.ports);
    set("total_ports", f.total_ports);
    set("depth", f.depth);
    // an explicit --size replaces any grid from the config file
    if (given(f, "size")) j["grid"] = nullptr;
    return j;
}

/// Everything a command needs, checked up front.
struct Resolved {
    hflow::RunConfig cfg;
    hflow::GridSpec grid{1, 1, 1};
    hflow::NumericFormat format;
    std::vector<hflow::NumericFormat> formats;
    hflow::PipelineConfig pipeline;
    std::vector<hflow::Sink> sinks;
    std::string label;  ///< preset name or "custom"
};

Resolved resolve(const std::string& command, const Flags& f) {
    Resolved r;
    const Json file = given(f, "config") ? hflow::read_json_file(f.config) : Json();
    r.cfg = hflow::resolve_config(file, flag_layer(f));
    const auto& c = r.cfg;
    if (command != "sweep" && c.timesteps.size() > 1)
        throw UsageError("'" + command + "' takes a single --timesteps value");
    r.grid = hflow::resolve_grid(c);
    r.label = c.grid ? "custom" : std::string(hflow::problem_size_preset(c.size).name);
    r.format = hflow::NumericFormat::parse(c.format);
    for (const auto& s : c.formats) r.formats.push_back(hflow::NumericFormat::parse(s));
    for (const auto& p : c.params)
        for (const auto& w : hflow::validate_heston(p).warnings) std::cerr << "warning: " << w << "\n";
    hflow::expand_params(c.params, r.grid.assets());
    r.pipeline = hflow::to_pipeline_config(c);
    if (c.reps < 1) throw UsageError("--reps must be >= 1");
    for (const auto& s : c.sinks) r.sinks.push_back(hflow::parse_sink(s));
    for (const auto& v : c.variants) hflow::parse_variant(v);
    hflow::validate_budget({c.uram, c.ports, c.total_ports});
    if (c.depth < 1) throw UsageError("--depth must be >= 1");
    if (!c.draws.empty() && (command == "sweep" || command == "bench"))
        throw UsageError("--draws is only supported by 'run'");
    for (const auto& s : c.sizes) hflow::problem_size_preset(s);
    return r;
}

bool wants(const Resolved& r, hflow::Sink s) {
    return std::find(r.sinks.begin(), r.sinks.end(), s) != r.sinks.end();
}

hflow::ReportMeta meta_for(const std::string& command, const Resolved& r) {
    return {command, hflow::config_hash(r.cfg)};
}

Json grid_json(const hflow::GridSpec& g) {
    return Json{{"assets", g.assets()}, {"timesteps", g.timesteps()}, {"paths", g.paths()}};
}

// ---------------------------------------------------------------------------

int cmd_run(const Resolved& r) {
    const auto& c = r.cfg;
    const hflow::DrawProvider draws = c.draws.empty() ? hflow::DrawProvider::keyed({c.seed}, r.grid)
                                                      : hflow::load_draws(c.draws, r.grid);
    const hflow::RunOutput out = hflow::run_reduced(r.format, r.grid, c.params, draws, r.pipeline);

    const fs::path dir = c.out;
    fs::create_directories(dir);
    const auto meta = meta_for("run", r);
    hflow::write_f64_file(dir / "reduced.bin", out.reduced);

    Json side{{"meta", meta.json()},
              {"file", "reduced.bin"},
              {"encoding", "little-endian binary64"},
              {"layout", "[path][timestep]"},
              {"grid", grid_json(r.grid)},
              {"format", r.format.to_string()},
              {"seed", c.seed},
              {"draws", c.draws.empty() ? Json("keyed") : Json(c.draws)},
              {"batch", c.batch},
              {"double_buffer", c.double_buffer},
              {"martingale", c.martingale},
              {"threads", c.threads},
              {"diagnostics", hflow::diagnostics_json(out.diagnostics)},
              {"timings_ms",
               Json{{"reorder_in", out.timings.reorder_in_ms},
                    {"compute", out.timings.compute_ms},
                    {"reduce", out.timings.reduce_ms},
                    {"reorder_out", out.timings.reorder_out_ms},
                    {"total", out.timings.total_ms}}}};
    hflow::write_text_file(dir / "reduced.json", side.dump(2) + "\n");

    hflow::BenchRecord rec;
    rec.preset = r.label;
    rec.format = r.format.to_string();
    rec.threads = c.threads;
    rec.reorder_in_ms = out.timings.reorder_in_ms;
    rec.compute_ms = out.timings.compute_ms;
    rec.reduce_ms = out.timings.reduce_ms;
    rec.reorder_out_ms = out.timings.reorder_out_ms;
    rec.total_ms = out.timings.total_ms;
    rec.elements_per_s = static_cast<double>(r.grid.elements()) / (out.timings.total_ms / 1000.0);
    rec.wrap_events = out.diagnostics.wraps();
    rec.warnings = out.diagnostics.warnings();
    rec.checksum = hflow::surface_checksum(out.reduced);
    hflow::write_text_file(dir / "bench.csv", hflow::bench_csv({rec}, meta));

    std::cout << Json{{"status", "ok"},
                      {"command", "run"},
                      {"grid", grid_json(r.grid)},
                      {"format", r.format.to_string()},
                      {"wrap_events", out.diagnostics.wraps()},
                      {"warnings", out.diagnostics.warnings()},
                      {"total_ms", out.timings.total_ms},
                      {"checksum", hflow::hex64(rec.checksum)},
                      {"out", dir.string()}}
                     .dump()
              << "\n";
    return 0;
}

void print_deviation_table(const hflow::DeviationReport& rep) {
    std::cout << std::left << std::setw(10) << "timesteps";
    for (const auto& f : rep.formats) std::cout << std::right << std::setw(13) << f;
    std::cout << "\n";
    for (std::size_t row = 0; row < rep.timesteps.size(); ++row) {
        std::cout << std::left << std::setw(10) << rep.timesteps[row];
        for (std::size_t col = 0; col < rep.formats.size(); ++col) {
            const auto& cell = rep.at(row, col);
            std::ostringstream v;
            v << std::fixed << std::setprecision(4) << cell.percent << (cell.dead ? "!" : "%");
            std::cout << std::right << std::setw(13) << v.str();
        }
        std::cout << "\n";
    }
    for (std::size_t row = 0; row < rep.timesteps.size(); ++row)
        for (std::size_t col = 0; col < rep.formats.size(); ++col)
            if (rep.at(row, col).dead)
                std::cout << "dead cell " << rep.formats[col] << " T=" << rep.timesteps[row] << ": "
                          << rep.at(row, col).diagnostic << "\n";
}

void write_files(const fs::path& dir, const std::vector<std::pair<std::string, std::string>>& files) {
    for (const auto& [name, body] : files) hflow::write_text_file(dir / name, body);
}

int cmd_sweep(const Resolved& r) {
    const auto& c = r.cfg;
    hflow::SweepOptions opt;
    opt.formats = r.formats.empty() ? hflow::default_sweep_formats() : r.formats;
    if (!c.timesteps.empty()) opt.timesteps = c.timesteps;
    opt.base_grid = c.grid ? *c.grid : hflow::problem_size_preset(c.size).grid;
    opt.seed = {c.seed};
    opt.params = c.params;
    opt.config = r.pipeline;
    const hflow::DeviationReport rep = hflow::precision_sweep(opt);

    const fs::path dir = c.out;
    const auto meta = meta_for("sweep", r);
    if (wants(r, hflow::Sink::csv)) hflow::write_text_file(dir / "deviation.csv", hflow::deviation_csv(rep, meta));
    if (wants(r, hflow::Sink::json)) hflow::write_text_file(dir / "deviation.json", hflow::deviation_json(rep, meta));
    if (wants(r, hflow::Sink::plot_data)) write_files(dir / "plot", hflow::deviation_plot_data(rep, meta));
    print_deviation_table(rep);
    return 0;
}

int cmd_bench(const Resolved& r) {
    const auto& c = r.cfg;
    hflow::BenchOptions opt;
    opt.cases = hflow::bench_cases(c.sizes);
    opt.formats = r.formats.empty() ? std::vector<hflow::NumericFormat>{r.format} : r.formats;
    opt.repetitions = c.reps;
    opt.seed = {c.seed};
    opt.params = c.params;
    opt.config = r.pipeline;
    opt.memory_budget_bytes = c.memory_budget_mb << 20;
    const auto records = hflow::bench_run(opt);

    const fs::path dir = c.out;
    const auto meta = meta_for("bench", r);
    const std::string csv = hflow::bench_csv(records, meta);
    if (wants(r, hflow::Sink::csv)) hflow::write_text_file(dir / "bench.csv", csv);
    if (wants(r, hflow::Sink::json)) hflow::write_text_file(dir / "bench.json", hflow::bench_json(records, meta));
    if (wants(r, hflow::Sink::plot_data)) write_files(dir / "plot", hflow::bench_plot_data(records, meta));
    std::cout << csv;
    return 0;
}

int cmd_cost(const Resolved& r) {
    const auto& c = r.cfg;
    hflow::StageSpec stage;
    stage.depth = c.depth;
    auto rows = hflow::cost_table(r.grid, c.batch, stage);
    if (!c.variants.empty()) {
        std::vector<hflow::CostRow> kept;
        for (const auto& v : c.variants) {
            const auto want = hflow::parse_variant(v);
            for (const auto& row : rows)
                if (row.variant == want) kept.push_back(row);
        }
        rows = kept;
    }
    const hflow::ResourceBudget budget{c.uram, c.ports, c.total_ports};
    const auto meta = meta_for("cost", r);
    std::string text = hflow::cost_csv(rows, meta);
    text += "\nresource,value\n";
    text += "cache_bytes," + std::to_string(hflow::cache_bytes(std::min(c.batch, r.grid.paths()), r.grid.timesteps())) +
            "\n";
    text += "max_kernels," + std::to_string(hflow::max_kernels(budget)) + "\n";
    if (wants(r, hflow::Sink::csv) && r.cfg.out != "") hflow::write_text_file(fs::path(c.out) / "cost.csv", text);
    std::cout << text;
    return 0;
}

int cmd_presets(const Resolved& r, bool write_file) {
    std::string text = "preset,assets,timesteps,paths,elements_millions,datapoints_millions,size_mb\n";
    for (const auto& p : hflow::size_presets()) {
        const auto counts = hflow::element_count(p.grid);
        text += std::string(p.name) + "," + std::to_string(p.grid.assets()) + "," +
                std::to_string(p.grid.timesteps()) + "," + std::to_string(p.grid.paths()) + "," +
                shortest(static_cast<double>(counts.elements) / 1e6) + "," +
                shortest(static_cast<double>(counts.datapoints) / 1e6) + "," +
                shortest(static_cast<double>(counts.bytes) / 1e6) + "\n";
    }
    if (write_file)
        hflow::write_text_file(fs::path(r.cfg.out) / "presets.csv", meta_for("presets", r).csv_line() + text);
    std::cout << text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hflow: Heston QE Monte Carlo with Longstaff-Schwartz path reduction"};
    app.require_subcommand(1);
    std::map<std::string, Flags> flags;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"run", "run the pipeline and write the reduced surface"},
        {"sweep", "precision deviation table across formats and timestep counts"},
        {"bench", "time presets and formats"},
        {"cost", "analytic cycle and resource model"},
        {"presets", "print the problem size presets"},
    };
    for (const auto& [name, help] : commands) add_options(app.add_subcommand(name, help), flags[name]);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_error("usage", e.what());
        return 1;
    }

    std::string command;
    for (const auto& [name, help] : commands)
        if (app.got_subcommand(name)) command = name;
    const Flags& f = flags.at(command);

    Resolved r;
    try {
        r = resolve(command, f);
    } catch (const hflow::IoError& e) {
        emit_error(e.code(), e.what());
        return 2;
    } catch (const hflow::Error& e) {
        emit_error(e.code(), e.what());
        return 1;
    }

    try {
        if (command == "run") return cmd_run(r);
        if (command == "sweep") return cmd_sweep(r);
        if (command == "bench") return cmd_bench(r);
        if (command == "cost") return cmd_cost(r);
        return cmd_presets(r, given(f, "out"));
    } catch (const hflow::Error& e) {
        emit_error(e.code(), e.what());
        return 2;
    } catch (const std::exception& e) {
        emit_error("internal", e.what());
        return 2;
    }
}
