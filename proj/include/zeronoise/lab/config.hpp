#pragma once

// Flat `key = value` configuration: one entry per line, `#` starts a
// comment, arrays are comma-separated. Later assignments (e.g. command-line
// overrides) replace earlier ones; key order of first appearance is kept so
// the echo in reports is stable.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "zeronoise/error.hpp"
#include "zeronoise/perturbation.hpp"
#include "zeronoise/rng.hpp"

namespace zeronoise::lab {

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

class ConfigMap {
public:
    void set(const std::string& key, const std::string& value) {
        for (auto& [k, v] : entries_) {
            if (k == key) {
                v = value;
                return;
            }
        }
        entries_.emplace_back(key, value);
    }

    bool has(const std::string& key) const {
        for (const auto& [k, v] : entries_) {
            if (k == key) {
                return true;
            }
        }
        return false;
    }

    const std::string& get(const std::string& key) const {
        for (const auto& [k, v] : entries_) {
            if (k == key) {
                return v;
            }
        }
        throw ConfigError("missing config key '" + key + "'");
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

    static ConfigMap parse(std::istream& in, const std::string& origin = "<config>") {
        ConfigMap cfg;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto hash = line.find('#'); hash != std::string::npos) {
                line.erase(hash);
            }
            std::string body = trim(line);
            if (body.empty()) {
                continue;
            }
            auto eq = body.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
            }
            std::string key = trim(std::string_view(body).substr(0, eq));
            std::string value = trim(std::string_view(body).substr(eq + 1));
            if (key.empty()) {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            }
            cfg.set(key, value);
        }
        return cfg;
    }

    static ConfigMap load(const std::string& path) {
        std::ifstream in(path);
        if (!in) {
            throw ConfigError("cannot read config file '" + path + "'");
        }
        return parse(in, path);
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

inline double parse_double(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        double v = std::stod(text, &used);
        if (trim(std::string_view(text).substr(used)).empty()) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError("config key '" + key + "': '" + text + "' is not a number");
}

inline std::int64_t parse_int(const std::string& key, const std::string& text) {
    std::string t = trim(text);
    // Accept 1e6-style integers as well as plain digits.
    double v = parse_double(key, t);
    if (v != static_cast<double>(static_cast<std::int64_t>(v))) {
        throw ConfigError("config key '" + key + "': '" + text + "' is not an integer");
    }
    return static_cast<std::int64_t>(v);
}

inline std::uint64_t parse_seed(const std::string& key, const std::string& text) {
    std::string t = trim(text);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
        throw ConfigError("config key '" + key + "': '" + text + "' is not an unsigned 64-bit integer");
    }
    return v;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!trim(item).empty()) {
            out.push_back(parse_double(key, item));
        }
    }
    return out;
}

/// `uniform(eps)` or `interval(lo, hi)`.
inline NoiseKernel parse_noise(const std::string& text) {
    std::string t = trim(text);
    auto open = t.find('(');
    auto close = t.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        throw ConfigError("noise must be 'uniform(eps)' or 'interval(lo, hi)', got '" + text + "'");
    }
    std::string name = trim(std::string_view(t).substr(0, open));
    std::vector<double> args = parse_list("noise", t.substr(open + 1, close - open - 1));
    try {
        if (name == "uniform" && args.size() == 1) {
            return uniform_kernel(args[0]);
        }
        if (name == "interval" && args.size() == 2) {
            return interval_kernel(args[0], args[1]);
        }
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("noise: ") + e.what());
    }
    throw ConfigError("noise must be 'uniform(eps)' or 'interval(lo, hi)', got '" + text + "'");
}

enum class Experiment { thmA_sweep, thmB_sweep, thmC_instability, mixing, diagnostics };

inline const char* to_string(Experiment e) {
    switch (e) {
        case Experiment::thmA_sweep: return "thmA_sweep";
        case Experiment::thmB_sweep: return "thmB_sweep";
        case Experiment::thmC_instability: return "thmC_instability";
        case Experiment::mixing: return "mixing";
        case Experiment::diagnostics: return "diagnostics";
    }
    return "?";
}

inline constexpr std::pair<const char*, const char*> kDefaults[] = {
    {"experiment", "thmB_sweep"},
    {"alpha", "1.5"},
    {"eps_ladder", "0.05, 0.02, 0.01, 0.005"},
    {"cells", "4096"},
    {"quad_order", "5"},
    {"tol", "1e-10"},
    {"max_iter", "1000000"},
    {"n_starts", "3"},
    {"t_grid", "101"},
    {"delta", "0.05"},
    {"seed", "20240601"},
    {"output", "."},
    {"s", "0.9"},
    {"trials", "1000"},
    {"nmax", "1000000"},
    {"orbits", "1000"},
    {"burn_in", "10000"},
    {"keep", "90000"},
    {"hist_cells", "4096"},
    {"funnel_starts", "64"},
    {"funnel_steps", "1000"},
    {"arcs", "0.4, 0.01"},
    {"mixing_nmax", "10000"},
};

inline bool is_known_key(const std::string& key) {
    for (const auto& [k, v] : kDefaults) {
        if (key == k) {
            return true;
        }
    }
    return false;
}

inline Experiment parse_experiment(const std::string& e) {
    for (Experiment x : {Experiment::thmA_sweep, Experiment::thmB_sweep, Experiment::thmC_instability,
                         Experiment::mixing, Experiment::diagnostics}) {
        if (e == to_string(x)) {
            return x;
        }
    }
    throw ConfigError("unknown experiment '" + e + "'");
}

inline const char* default_alpha(Experiment e) {
    switch (e) {
        case Experiment::thmA_sweep:
        case Experiment::thmC_instability: return "0.5";
        case Experiment::mixing: return "1";
        default: return "1.5";
    }
}

/// Typed view of a ConfigMap with the lab defaults filled in.
struct ExperimentConfig {
    Experiment experiment = Experiment::thmB_sweep;
    double alpha = 1.5;
    std::vector<double> eps_ladder;
    int cells = 4096;
    int quad_order = 5;
    double tol = 1e-10;
    std::int64_t max_iter = 1'000'000;
    int n_starts = 3;
    int t_grid = 101;
    double delta = 0.05;
    SeedPolicy seeds;
    std::string output_dir = ".";
    double s = 0.9;
    std::int64_t trials = 1000;
    std::int64_t nmax = 1'000'000;
    std::int64_t orbits = 1000;
    std::int64_t burn_in = 10'000;
    std::int64_t keep = 90'000;
    int hist_cells = 4096;
    std::int64_t funnel_starts = 64;
    std::int64_t funnel_steps = 1000;
    std::vector<double> arcs;  ///< flattened (start, length) pairs
    std::int64_t mixing_nmax = 10'000;

    /// Every key in canonical order with the text it was parsed from
    /// (user text verbatim, otherwise the default).
    ConfigMap echo;

    /// `experiment` in the map wins over `fallback` only when given explicitly.
    static ExperimentConfig from(const ConfigMap& user, Experiment fallback) {
        for (const auto& [k, v] : user.entries()) {
            if (!is_known_key(k)) {
                throw ConfigError("unknown config key '" + k + "'");
            }
        }
        ConfigMap m;
        for (const auto& [k, v] : kDefaults) {
            m.set(k, user.has(k) ? user.get(k) : std::string(v));
        }
        if (!user.has("experiment")) {
            m.set("experiment", to_string(fallback));
        }
        if (!user.has("alpha")) {
            m.set("alpha", default_alpha(parse_experiment(m.get("experiment"))));
        }

        ExperimentConfig c;
        c.echo = m;
        c.experiment = parse_experiment(m.get("experiment"));
        auto integer = [&](const char* key) { return parse_int(key, m.get(key)); };
        auto num = [&](const char* key) { return parse_double(key, m.get(key)); };
        auto narrow = [&](const char* key) {
            std::int64_t v = integer(key);
            if (v < INT32_MIN || v > INT32_MAX) {
                throw ConfigError("config key '" + std::string(key) + "' is out of range");
            }
            return static_cast<int>(v);
        };
        c.alpha = num("alpha");
        c.eps_ladder = parse_list("eps_ladder", m.get("eps_ladder"));
        c.cells = narrow("cells");
        c.quad_order = narrow("quad_order");
        c.tol = num("tol");
        c.max_iter = integer("max_iter");
        c.n_starts = narrow("n_starts");
        c.t_grid = narrow("t_grid");
        c.delta = num("delta");
        c.seeds.master_seed = parse_seed("seed", m.get("seed"));
        c.output_dir = m.get("output");
        c.s = num("s");
        c.trials = integer("trials");
        c.nmax = integer("nmax");
        c.orbits = integer("orbits");
        c.burn_in = integer("burn_in");
        c.keep = integer("keep");
        c.hist_cells = narrow("hist_cells");
        c.funnel_starts = integer("funnel_starts");
        c.funnel_steps = integer("funnel_steps");
        c.arcs = parse_list("arcs", m.get("arcs"));
        c.mixing_nmax = integer("mixing_nmax");
        c.validate();
        return c;
    }

    void validate() const {
        bool sweep = experiment == Experiment::thmA_sweep || experiment == Experiment::thmB_sweep;
        if (sweep) {
            if (eps_ladder.empty()) {
                throw ConfigError("eps_ladder must not be empty");
            }
            for (std::size_t i = 0; i < eps_ladder.size(); ++i) {
                if (!(eps_ladder[i] > 0.0) || (i > 0 && !(eps_ladder[i] < eps_ladder[i - 1]))) {
                    throw ConfigError("eps_ladder must be positive and strictly decreasing");
                }
            }
        }
        if (cells < 8 || hist_cells < 1 || quad_order < 1 || n_starts < 1 || max_iter < 1 || !(tol > 0.0)) {
            throw ConfigError("cells >= 8, hist_cells >= 1, quad_order, n_starts, max_iter >= 1 and tol > 0 required");
        }
        if (t_grid < 11) {
            throw ConfigError("t_grid must be at least 11");
        }
        if (!(delta > 0.0 && delta <= 0.5)) {
            throw ConfigError("delta must lie in (0, 1/2]");
        }
        if (trials < 1 || orbits < 1 || keep < 1 || funnel_starts < 1 || burn_in < 0 || nmax < 0 ||
            mixing_nmax < 0 || funnel_steps < 0 || max_iter > INT32_MAX) {
            throw ConfigError("trials, orbits, keep, funnel_starts >= 1 and burn_in, nmax, funnel_steps, mixing_nmax >= 0 required");
        }
        if (arcs.size() % 2 != 0) {
            throw ConfigError("arcs must be a flat list of (start, length) pairs");
        }
    }
};

}  // namespace zeronoise::lab
