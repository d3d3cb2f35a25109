// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hflow/core_model.hpp"
#include "hflow/cost_model.hpp"
#include "hflow/error.hpp"
#include "hflow/numerics/format.hpp"
#include "hflow/reduction.hpp"

namespace hflow {

/// Every setting a CLI invocation can carry. The JSON config file uses the
/// same field names.
struct RunConfig {
    std::string size = "tiny";
    std::optional<GridSpec> grid;  ///< explicit grid; wins over `size`
    std::vector<HestonParams> params{default_heston()};
    std::uint64_t seed = 1;
    std::string draws;  ///< draw file; empty means keyed generation
    std::string format = "double";
    std::uint64_t batch = kDefaultBatch;
    bool martingale = true;
    bool double_buffer = true;
    unsigned threads = 1;
    std::uint64_t stream_capacity = 2;
    std::string out = "hflow-out";
    std::vector<std::string> sinks{"csv", "json"};

    std::vector<std::string> formats;        ///< sweep columns; empty means the default eleven
    std::vector<std::uint64_t> timesteps;    ///< sweep rows, or a single override for run
    std::vector<std::string> sizes{"tiny"};  ///< bench presets
    unsigned reps = 5;
    std::uint64_t memory_budget_mb = 0;  ///< 0 means 80% of physical memory

    std::vector<std::string> variants;  ///< cost rows; empty means all four
    double uram = 0.1604;
    std::uint64_t ports = 3;
    std::uint64_t total_ports = 32;
    std::uint64_t depth = 457;

    bool operator==(const RunConfig&) const = default;
};

using Json = nlohmann::ordered_json;

namespace detail {

inline Json params_to_json(const HestonParams& p) {
    return Json{{"kappa", p.kappa}, {"theta", p.theta}, {"sigma", p.sigma}, {"rho", p.rho},
                {"v0", p.v0},       {"s0", p.s0},       {"r", p.r},         {"dt", p.dt}};
}

inline HestonParams params_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("params entries must be objects");
    HestonParams p = default_heston();
    for (const auto& [key, value] : j.items()) {
        if (!value.is_number()) throw ValidationError("params." + key + " must be a number");
        const double v = value.get<double>();
        if (key == "kappa") p.kappa = v;
        else if (key == "theta") p.theta = v;
        else if (key == "sigma") p.sigma = v;
        else if (key == "rho") p.rho = v;
        else if (key == "v0") p.v0 = v;
        else if (key == "s0") p.s0 = v;
        else if (key == "r") p.r = v;
        else if (key == "dt") p.dt = v;
        else throw ValidationError("unknown params field '" + key + "'");
    }
    return p;
}

template <class T>
T get_as(const Json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError("config field '" + key + "' has the wrong type");
    }
}

}  // namespace detail

inline Json to_json(const RunConfig& c) {
    Json j;
    j["size"] = c.size;
    if (c.grid) {
        j["grid"] = Json{{"assets", c.grid->assets()}, {"timesteps", c.grid->timesteps()}, {"paths", c.grid->paths()}};
    }
    Json params = Json::array();
    for (const auto& p : c.params) params.push_back(detail::params_to_json(p));
    j["params"] = params;
    j["seed"] = c.seed;
    j["draws"] = c.draws;
    j["format"] = c.format;
    j["batch"] = c.batch;
    j["martingale"] = c.martingale;
    j["double_buffer"] = c.double_buffer;
    j["threads"] = c.threads;
    j["stream_capacity"] = c.stream_capacity;
    j["out"] = c.out;
    j["sinks"] = c.sinks;
    j["formats"] = c.formats;
    j["timesteps"] = c.timesteps;
    j["sizes"] = c.sizes;
    j["reps"] = c.reps;
    j["memory_budget_mb"] = c.memory_budget_mb;
    j["variants"] = c.variants;
    j["uram"] = c.uram;
    j["ports"] = c.ports;
    j["total_ports"] = c.total_ports;
    j["depth"] = c.depth;
    return j;
}

/// Applies the fields present in `j` on top of `base`. Unknown fields and
/// wrong types are errors.
inline RunConfig apply_json(RunConfig base, const Json& j) {
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    using detail::get_as;
    for (const auto& [key, v] : j.items()) {
        if (key == "size") base.size = get_as<std::string>(v, key);
        else if (key == "grid") {
            if (v.is_null()) {
                base.grid.reset();
                continue;
            }
            if (!v.is_object()) throw ValidationError("config field 'grid' must be an object");
            for (const auto& [gk, gv] : v.items())
                if (gk != "assets" && gk != "timesteps" && gk != "paths")
                    throw ValidationError("unknown grid field '" + gk + "'");
            if (!v.contains("assets") || !v.contains("timesteps") || !v.contains("paths"))
                throw ValidationError("grid needs assets, timesteps and paths");
            base.grid = GridSpec(get_as<std::uint64_t>(v["assets"], "grid.assets"),
                                 get_as<std::uint64_t>(v["timesteps"], "grid.timesteps"),
                                 get_as<std::uint64_t>(v["paths"], "grid.paths"));
        } else if (key == "params") {
            base.params.clear();
            if (v.is_array()) {
                for (const auto& p : v) base.params.push_back(detail::params_from_json(p));
                if (base.params.empty()) throw ValidationError("params list is empty");
            } else {
                base.params.push_back(detail::params_from_json(v));
            }
        } else if (key == "seed") base.seed = get_as<std::uint64_t>(v, key);
        else if (key == "draws") base.draws = get_as<std::string>(v, key);
        else if (key == "format") base.format = get_as<std::string>(v, key);
        else if (key == "batch") base.batch = get_as<std::uint64_t>(v, key);
        else if (key == "martingale") base.martingale = get_as<bool>(v, key);
        else if (key == "double_buffer") base.double_buffer = get_as<bool>(v, key);
        else if (key == "threads") base.threads = get_as<unsigned>(v, key);
        else if (key == "stream_capacity") base.stream_capacity = get_as<std::uint64_t>(v, key);
        else if (key == "out") base.out = get_as<std::string>(v, key);
        else if (key == "sinks") base.sinks = get_as<std::vector<std::string>>(v, key);
        else if (key == "formats") base.formats = get_as<std::vector<std::string>>(v, key);
        else if (key == "timesteps") base.timesteps = get_as<std::vector<std::uint64_t>>(v, key);
        else if (key == "sizes") base.sizes = get_as<std::vector<std::string>>(v, key);
        else if (key == "reps") base.reps = get_as<unsigned>(v, key);
        else if (key == "memory_budget_mb") base.memory_budget_mb = get_as<std::uint64_t>(v, key);
        else if (key == "variants") base.variants = get_as<std::vector<std::string>>(v, key);
        else if (key == "uram") base.uram = get_as<double>(v, key);
        else if (key == "ports") base.ports = get_as<std::uint64_t>(v, key);
        else if (key == "total_ports") base.total_ports = get_as<std::uint64_t>(v, key);
        else if (key == "depth") base.depth = get_as<std::uint64_t>(v, key);
        else throw ValidationError("unknown config field '" + key + "'");
    }
    return base;
}

inline Json parse_json_text(const std::string& text, const std::string& origin) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(origin + ": invalid JSON: " + e.what());
    }
}

inline Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_json_text(ss.str(), path.string());
}

/// Default < file < flags. `flags` holds only the options given explicitly.
inline RunConfig resolve_config(const Json& file, const Json& flags) {
    RunConfig c;
    if (!file.is_null()) c = apply_json(c, file);
    if (!flags.is_null()) c = apply_json(c, flags);
    return c;
}

/// The grid a config describes: the explicit grid, else the named preset,
/// with a single `timesteps` entry overriding T.
inline GridSpec resolve_grid(const RunConfig& c) {
    GridSpec g = c.grid ? *c.grid : problem_size_preset(c.size).grid;
    if (c.timesteps.size() == 1) g = g.with_timesteps(c.timesteps.front());
    return g;
}

inline PipelineConfig to_pipeline_config(const RunConfig& c) {
    PipelineConfig p;
    p.batch = c.batch;
    p.double_buffer = c.double_buffer;
    p.stream_capacity = c.stream_capacity;
    p.threads = c.threads;
    p.martingale = c.martingale;
    validate_pipeline_config(p);
    return p;
}

/// Stable 64-bit FNV-1a hash of the canonical JSON form.
inline std::uint64_t config_hash(const RunConfig& c) {
    const std::string text = to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

}  // namespace hflow
