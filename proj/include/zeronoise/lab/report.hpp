#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "zeronoise/error.hpp"
#include "zeronoise/lab/config.hpp"
#include "zeronoise/lab/experiments.hpp"
#include "zeronoise/transfer.hpp"

#ifndef ZERONOISE_VERSION_STRING
#define ZERONOISE_VERSION_STRING "0.1.0"
#endif

namespace zeronoise::lab {

using Json = nlohmann::ordered_json;

inline std::string version_string() { return ZERONOISE_VERSION_STRING; }

/// 17 significant digits, so every double round-trips.
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// LAB_OUT joined with `dir` unless `dir` is absolute.
inline std::filesystem::path output_root(const std::string& dir) {
    std::filesystem::path p(dir);
    if (p.is_absolute()) {
        return p;
    }
    if (const char* root = std::getenv("LAB_OUT"); root != nullptr && *root != '\0') {
        return (std::filesystem::path(root) / p).lexically_normal();
    }
    return p;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw InputError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InputError("cannot open '" + path.string() + "' for writing");
    }
    out << content;
    out.flush();
    if (!out) {
        throw InputError("write to '" + path.string() + "' failed");
    }
}

inline std::string config_header(const ConfigMap& echo) {
    std::string s;
    for (const auto& [k, v] : echo.entries()) {
        s += "# " + k + " = " + v + "\n";
    }
    s += "# version = " + version_string() + "\n";
    return s;
}

inline Json config_json(const ConfigMap& echo) {
    Json j = Json::object();
    for (const auto& [k, v] : echo.entries()) {
        j[k] = v;
    }
    return j;
}

inline Json checks_json(const std::vector<Check>& checks) {
    Json j = Json::object();
    for (const auto& c : checks) {
        j[c.name] = to_string(c.verdict);
    }
    return j;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline std::string sweep_csv(const SweepReport& r) {
    std::string s = config_header(r.config.echo);
    s += "eps,w1_to_dirac,w1_to_srb,mass_near_zero,mixture_t,mixture_distance\n";
    for (const auto& row : r.rows) {
        s += fmt(row.eps) + "," + fmt(row.w1_to_dirac) + "," + fmt(row.w1_to_srb) + "," + fmt(row.mass_near_zero) +
             "," + fmt(row.mixture_t) + "," + fmt(row.mixture_distance) + "\n";
    }
    return s;
}

inline Json sweep_json(const SweepReport& r) {
    Json j;
    j["experiment"] = to_string(r.config.experiment);
    j["version"] = version_string();
    j["config"] = config_json(r.config.echo);
    j["master_seed"] = r.config.seeds.master_seed;
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"eps", row.eps},
                        {"w1_to_dirac", row.w1_to_dirac},
                        {"w1_to_srb", row.w1_to_srb},
                        {"mass_near_zero", row.mass_near_zero},
                        {"mixture_t", row.mixture_t},
                        {"mixture_distance", row.mixture_distance},
                        {"iterations", row.iterations},
                        {"residual", row.residual},
                        {"multiple", row.multiple},
                        {"renormalized", row.renormalized}});
    }
    j["rows"] = rows;
    j["ratio_last_first"] = r.ratio_last_first;
    j["verdicts"] = checks_json(r.checks);
    return j;
}

/// Writes <experiment>.csv and <experiment>.json; returns the paths written.
inline std::vector<std::filesystem::path> emit(const SweepReport& r) {
    auto dir = output_root(r.config.output_dir);
    std::string stem = to_string(r.config.experiment);
    auto csv = dir / (stem + ".csv");
    auto json = dir / (stem + ".json");
    write_file(csv, sweep_csv(r));
    write_file(json, dump(sweep_json(r)));
    return {csv, json};
}

inline std::string escape_csv(const InstabilityReport& r) {
    std::string s = config_header(r.config.echo);
    s += "trial,x0,escape_step,escaped\n";
    for (std::size_t i = 0; i < r.trials.size(); ++i) {
        const auto& t = r.trials[i];
        s += std::to_string(i) + "," + fmt(t.x0) + "," + (t.steps ? std::to_string(*t.steps) : std::string()) + "," +
             (t.steps ? "1" : "0") + "\n";
    }
    return s;
}

inline std::string density_csv(const GridMeasure& m, const std::string& header = {}) {
    std::string s = header;
    s += "cell_index,cell_left,weight,density\n";
    for (int i = 0; i < m.n_cells(); ++i) {
        s += std::to_string(i) + "," + fmt(m.cell_left(i)) + "," + fmt(m[i]) + "," + fmt(m.density(i)) + "\n";
    }
    return s;
}

inline Json instability_json(const InstabilityReport& r) {
    Json j;
    j["experiment"] = to_string(r.config.experiment);
    j["version"] = version_string();
    j["config"] = config_json(r.config.echo);
    j["master_seed"] = r.config.seeds.master_seed;
    j["band"] = {{"alpha", r.band.alpha},      {"s", r.band.s},     {"u", r.band.u},
                 {"p_s", r.band.p_s},          {"p_u", r.band.p_u}, {"min_derivative", r.band.min_derivative}};
    j["funnel"] = {{"max_distance", r.funnel_max_distance}, {"envelope_holds", r.funnel_envelope}};
    j["escape"] = {{"trials", r.trials.size()},
                   {"escaped_fraction", r.escaped_fraction},
                   {"max_escape_step", r.max_escape_step}};
    j["stationary"] = {{"samples", r.histogram.size()},
                       {"mass_near_zero", r.stationary_mass},
                       {"w1_to_dirac", r.stationary_w1_to_dirac}};
    j["noiseless_srb_mass_near_zero"] = r.srb_mass;
    j["verdicts"] = checks_json(r.checks);
    return j;
}

inline std::vector<std::filesystem::path> emit(const InstabilityReport& r) {
    auto dir = output_root(r.config.output_dir);
    auto escape = dir / "escape.csv";
    auto hist = dir / "stationary_histogram.csv";
    auto json = dir / "thmC_instability.json";
    write_file(escape, escape_csv(r));
    write_file(hist, density_csv(grid_from_samples(r.histogram, r.config.hist_cells), config_header(r.config.echo)));
    write_file(json, dump(instability_json(r)));
    return {escape, hist, json};
}

inline std::string mixing_csv(const MixingReport& r) {
    std::string s = config_header(r.config.echo);
    s += "arc,step,length\n";
    for (std::size_t k = 0; k < r.arcs.size(); ++k) {
        const auto& lengths = r.arcs[k].covering.lengths;
        for (std::size_t n = 0; n < lengths.size(); ++n) {
            s += std::to_string(k) + "," + std::to_string(n) + "," + fmt(lengths[n]) + "\n";
        }
    }
    return s;
}

inline Json mixing_json(const MixingReport& r) {
    Json j;
    j["experiment"] = to_string(r.config.experiment);
    j["version"] = version_string();
    j["config"] = config_json(r.config.echo);
    Json arcs = Json::array();
    for (const auto& a : r.arcs) {
        Json entry = {{"start", a.start}, {"length", a.length}};
        entry["covering_time"] = a.covering.steps ? Json(*a.covering.steps) : Json(nullptr);
        entry["exhausted"] = !a.covering.steps.has_value();
        entry["lengths_nondecreasing"] = a.nondecreasing;
        arcs.push_back(entry);
    }
    j["arcs"] = arcs;
    j["verdicts"] = checks_json(r.checks);
    return j;
}

inline std::vector<std::filesystem::path> emit(const MixingReport& r) {
    auto dir = output_root(r.config.output_dir);
    auto csv = dir / "mixing.csv";
    auto json = dir / "mixing.json";
    write_file(csv, mixing_csv(r));
    write_file(json, dump(mixing_json(r)));
    return {csv, json};
}

}  // namespace zeronoise::lab
