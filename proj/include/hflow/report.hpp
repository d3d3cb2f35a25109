// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hflow/accuracy.hpp"
#include "hflow/bench.hpp"
#include "hflow/config.hpp"
#include "hflow/cost_model.hpp"
#include "hflow/error.hpp"

namespace hflow {

inline constexpr const char* kToolName = "hflow";
inline constexpr const char* kToolVersion = "0.1.0";

/// Attribution stamped on every output file.
struct ReportMeta {
    std::string command;
    std::uint64_t config_hash = 0;

    std::string csv_line() const {
        return std::string("# tool=") + kToolName + " version=" + kToolVersion + " command=" + command +
               " config_hash=" + hex64(config_hash) + "\n";
    }
    Json json() const {
        return Json{{"tool", kToolName}, {"version", kToolVersion}, {"command", command},
                    {"config_hash", hex64(config_hash)}};
    }
};

enum class Sink { csv, json, plot_data };

inline Sink parse_sink(const std::string& s) {
    if (s == "csv") return Sink::csv;
    if (s == "json") return Sink::json;
    if (s == "plot-data" || s == "plot_data") return Sink::plot_data;
    throw ValidationError("unknown report sink '" + s + "' (csv, json, plot-data)");
}

namespace detail {

inline std::string fmt_double(double v, int precision = 6) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

/// Quotes a CSV field when it holds a separator, quote or newline.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Bench records
// ---------------------------------------------------------------------------

inline const char* kBenchCsvHeader =
    "preset,format,threads,reorder_in_ms,compute_ms,reduce_ms,reorder_out_ms,total_ms,elements_per_s,wrap_events,"
    "warnings,note,checksum";

inline std::string bench_csv(const std::vector<BenchRecord>& records, const ReportMeta& meta) {
    if (records.empty()) throw ValidationError("no bench records to report");
    using detail::fmt_double;
    std::string out = meta.csv_line() + kBenchCsvHeader + "\n";
    for (const auto& r : records) {
        out += detail::csv_field(r.preset) + "," + detail::csv_field(r.format) + "," + std::to_string(r.threads) + "," +
               fmt_double(r.reorder_in_ms, 3) + "," + fmt_double(r.compute_ms, 3) + "," + fmt_double(r.reduce_ms, 3) +
               "," + fmt_double(r.reorder_out_ms, 3) + "," + fmt_double(r.total_ms, 3) + "," +
               fmt_double(r.elements_per_s, 1) + "," + std::to_string(r.wrap_events) + "," +
               std::to_string(r.warnings) + "," + detail::csv_field(r.note) + "," + hex64(r.checksum) + "\n";
    }
    return out;
}

inline Json to_json(const BenchRecord& r) {
    return Json{{"preset", r.preset},
                {"format", r.format},
                {"threads", r.threads},
                {"reorder_in_ms", r.reorder_in_ms},
                {"compute_ms", r.compute_ms},
                {"reduce_ms", r.reduce_ms},
                {"reorder_out_ms", r.reorder_out_ms},
                {"total_ms", r.total_ms},
                {"elements_per_s", r.elements_per_s},
                {"wrap_events", r.wrap_events},
                {"warnings", r.warnings},
                {"skipped", r.skipped},
                {"note", r.note},
                {"checksum", hex64(r.checksum)}};
}

inline BenchRecord bench_record_from_json(const Json& j) {
    try {
        BenchRecord r;
        r.preset = j.at("preset").get<std::string>();
        r.format = j.at("format").get<std::string>();
        r.threads = j.at("threads").get<unsigned>();
        r.reorder_in_ms = j.at("reorder_in_ms").get<double>();
        r.compute_ms = j.at("compute_ms").get<double>();
        r.reduce_ms = j.at("reduce_ms").get<double>();
        r.reorder_out_ms = j.at("reorder_out_ms").get<double>();
        r.total_ms = j.at("total_ms").get<double>();
        r.elements_per_s = j.at("elements_per_s").get<double>();
        r.wrap_events = j.at("wrap_events").get<std::uint64_t>();
        r.warnings = j.at("warnings").get<std::uint64_t>();
        r.skipped = j.at("skipped").get<bool>();
        r.note = j.at("note").get<std::string>();
        r.checksum = std::stoull(j.at("checksum").get<std::string>(), nullptr, 16);
        return r;
    } catch (const std::exception& e) {
        throw DataError(std::string("malformed bench record: ") + e.what());
    }
}

inline std::string bench_json(const std::vector<BenchRecord>& records, const ReportMeta& meta) {
    if (records.empty()) throw ValidationError("no bench records to report");
    Json rows = Json::array();
    for (const auto& r : records) rows.push_back(to_json(r));
    return Json{{"meta", meta.json()}, {"records", rows}}.dump(2) + "\n";
}

inline std::vector<BenchRecord> bench_records_from_json(const std::string& text) {
    const Json j = parse_json_text(text, "bench report");
    std::vector<BenchRecord> out;
    for (const auto& r : j.at("records")) out.push_back(bench_record_from_json(r));
    return out;
}

/// Runtime against preset, one file per format: `preset,total_ms`.
inline std::vector<std::pair<std::string, std::string>> bench_plot_data(const std::vector<BenchRecord>& records,
                                                                        const ReportMeta& meta) {
    if (records.empty()) throw ValidationError("no bench records to report");
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& r : records) {
        const std::string name = "runtime_" + r.format + ".csv";
        auto it = std::find_if(files.begin(), files.end(), [&](const auto& f) { return f.first == name; });
        if (it == files.end()) {
            files.push_back({name, meta.csv_line() + "preset,total_ms\n"});
            it = files.end() - 1;
        }
        if (!r.skipped) it->second += r.preset + "," + detail::fmt_double(r.total_ms, 3) + "\n";
    }
    for (auto& f : files) std::replace(f.first.begin(), f.first.end(), ':', '_');
    return files;
}

// ---------------------------------------------------------------------------
// Deviation reports
// ---------------------------------------------------------------------------

/// `timesteps` then one column per format; values are percentages.
inline std::string deviation_csv(const DeviationReport& rep, const ReportMeta& meta) {
    if (rep.cells.empty()) throw ValidationError("empty deviation report");
    std::string out = meta.csv_line() + "timesteps";
    for (const auto& f : rep.formats) out += "," + f;
    out += "\n";
    for (std::size_t row = 0; row < rep.timesteps.size(); ++row) {
        out += std::to_string(rep.timesteps[row]);
        for (std::size_t col = 0; col < rep.formats.size(); ++col)
            out += "," + detail::fmt_double(rep.at(row, col).percent, 6);
        out += "\n";
    }
    return out;
}

inline Json diagnostics_json(const Diagnostics& d) {
    return Json{{"wrap_events", d.wrap_events},
                {"saturation_events", d.saturation_events},
                {"domain_events", d.domain_events},
                {"martingale_fallbacks", d.martingale_fallbacks},
                {"nan_cells", d.nan_cells}};
}

inline Diagnostics diagnostics_from_json(const Json& j) {
    Diagnostics d;
    d.wrap_events = j.at("wrap_events").get<std::uint64_t>();
    d.saturation_events = j.at("saturation_events").get<std::uint64_t>();
    d.domain_events = j.at("domain_events").get<std::uint64_t>();
    d.martingale_fallbacks = j.at("martingale_fallbacks").get<std::uint64_t>();
    d.nan_cells = j.at("nan_cells").get<std::uint64_t>();
    return d;
}

inline Json to_json(const DeviationReport& rep) {
    Json rows = Json::array();
    for (std::size_t row = 0; row < rep.timesteps.size(); ++row) {
        Json cells = Json::object();
        for (std::size_t col = 0; col < rep.formats.size(); ++col) {
            const DeviationCell& c = rep.at(row, col);
            cells[rep.formats[col]] = Json{{"percent", c.percent},
                                           {"dead", c.dead},
                                           {"diagnostic", c.diagnostic},
                                           {"events", diagnostics_json(c.events)}};
        }
        rows.push_back(Json{{"timesteps", rep.timesteps[row]}, {"cells", cells}});
    }
    return Json{{"grid", Json{{"assets", rep.grid.assets()}, {"paths", rep.grid.paths()}}},
                {"seed", rep.seed},
                {"martingale", rep.martingale},
                {"formats", rep.formats},
                {"rows", rows}};
}

inline std::string deviation_json(const DeviationReport& rep, const ReportMeta& meta) {
    if (rep.cells.empty()) throw ValidationError("empty deviation report");
    Json j = to_json(rep);
    j["meta"] = meta.json();
    return j.dump(2) + "\n";
}

inline DeviationReport deviation_report_from_json(const std::string& text) {
    try {
        const Json j = parse_json_text(text, "deviation report");
        DeviationReport rep;
        rep.grid = GridSpec(j.at("grid").at("assets").get<std::uint64_t>(), 1,
                            j.at("grid").at("paths").get<std::uint64_t>());
        rep.seed = j.at("seed").get<std::uint64_t>();
        rep.martingale = j.at("martingale").get<bool>();
        rep.formats = j.at("formats").get<std::vector<std::string>>();
        for (const auto& row : j.at("rows")) {
            rep.timesteps.push_back(row.at("timesteps").get<std::uint64_t>());
            std::vector<DeviationCell> cells;
            for (const auto& f : rep.formats) {
                const Json& c = row.at("cells").at(f);
                DeviationCell cell;
                cell.percent = c.at("percent").get<double>();
                cell.dead = c.at("dead").get<bool>();
                cell.diagnostic = c.at("diagnostic").get<std::string>();
                cell.events = diagnostics_from_json(c.at("events"));
                cells.push_back(cell);
            }
            rep.cells.push_back(std::move(cells));
        }
        return rep;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw DataError(std::string("malformed deviation report: ") + e.what());
    }
}

/// Deviation against timestep count, one file per format.
inline std::vector<std::pair<std::string, std::string>> deviation_plot_data(const DeviationReport& rep,
                                                                            const ReportMeta& meta) {
    std::vector<std::pair<std::string, std::string>> files;
    for (std::size_t col = 0; col < rep.formats.size(); ++col) {
        std::string name = "deviation_" + rep.formats[col] + ".csv";
        std::replace(name.begin(), name.end(), ':', '_');
        std::string body = meta.csv_line() + "timesteps,deviation_percent\n";
        for (std::size_t row = 0; row < rep.timesteps.size(); ++row)
            body += std::to_string(rep.timesteps[row]) + "," + detail::fmt_double(rep.at(row, col).percent, 6) + "\n";
        files.push_back({name, body});
    }
    return files;
}

// ---------------------------------------------------------------------------
// Cost table
// ---------------------------------------------------------------------------

inline std::string cost_csv(const std::vector<CostRow>& rows, const ReportMeta& meta) {
    std::string out = meta.csv_line() + "variant,cycles,cycles_per_element,ratio_vs_initial,flag\n";
    for (const auto& r : rows) {
        out += std::string(variant_name(r.variant)) + "," + detail::fmt_double(r.cycles, 0) + "," +
               detail::fmt_double(r.cycles_per_element, 4) + "," + detail::fmt_double(r.ratio_vs_initial, 3) + "," +
               detail::csv_field(r.flag) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace hflow
