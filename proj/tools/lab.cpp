#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zeronoise/diagnostics.hpp"
#include "zeronoise/lab/config.hpp"
#include "zeronoise/lab/experiments.hpp"
#include "zeronoise/lab/report.hpp"
#include "zeronoise/sampling.hpp"

namespace zn = zeronoise;
namespace lab = zeronoise::lab;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::string header_line(const std::string& key, const std::string& value) { return "# " + key + " = " + value + "\n"; }

std::string echo_header(const std::vector<std::pair<std::string, std::string>>& inputs) {
    std::string s;
    for (const auto& [k, v] : inputs) {
        s += header_line(k, v);
    }
    s += header_line("version", lab::version_string());
    return s;
}

void announce(const std::vector<std::filesystem::path>& paths) {
    for (const auto& p : paths) {
        std::cout << "wrote " << p.string() << "\n";
    }
}

int exit_code(const std::vector<lab::Check>& checks) {
    for (const auto& c : checks) {
        std::cout << c.name << ": " << lab::to_string(c.verdict) << "\n";
    }
    return lab::any_failed(checks) ? kExitFail : kExitPass;
}

zn::RandomSystem make_system(double alpha, double eps, const std::string& mode) {
    std::optional<zn::NoiseKernel> kernel;
    if (mode != "deterministic" && eps != 0.0) {
        kernel = mode == "parametric" ? zn::interval_kernel(1.0 - eps, 1.0) : zn::uniform_kernel(eps);
    }
    if (mode == "additive" || mode == "deterministic") {
        return zn::RandomSystem::additive(zn::IntermittentMap(alpha), kernel);
    }
    if (mode == "parametric") {
        return zn::RandomSystem::parametric(alpha, kernel);
    }
    if (mode == "doubling") {
        return zn::RandomSystem::additive(zn::DoublingMap{}, kernel);
    }
    throw zn::ConfigError("unknown mode '" + mode + "'");
}

zn::GridMeasure read_density(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw zn::InputError("cannot read '" + path + "'");
    }
    std::string line;
    std::vector<double> weights;
    bool header = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        if (!header) {
            if (line.rfind("cell_index,cell_left,weight,density", 0) != 0) {
                throw zn::InputError(path + ":" + std::to_string(lineno) + ": expected the density CSV header");
            }
            header = true;
            continue;
        }
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) {
            fields.push_back(field);
        }
        if (fields.size() != 4) {
            throw zn::InputError(path + ":" + std::to_string(lineno) + ": expected 4 columns");
        }
        try {
            weights.push_back(std::stod(fields[2]));
        } catch (const std::exception&) {
            throw zn::InputError(path + ":" + std::to_string(lineno) + ": bad weight '" + fields[2] + "'");
        }
    }
    if (weights.empty()) {
        throw zn::InputError("'" + path + "' holds no density rows");
    }
    return zn::GridMeasure(std::move(weights));
}

/// `--key value` pairs left over after the subcommand's own flags.
zn::lab::ConfigMap overrides_from(const std::vector<std::string>& extras) {
    lab::ConfigMap m;
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& a = extras[i];
        if (a.rfind("--", 0) != 0) {
            throw zn::ConfigError("unexpected argument '" + a + "'");
        }
        std::string key = a.substr(2);
        std::string value;
        if (auto eq = key.find('='); eq != std::string::npos) {
            value = key.substr(eq + 1);
            key.resize(eq);
        } else if (i + 1 < extras.size()) {
            value = extras[++i];
        } else {
            throw zn::ConfigError("override '" + a + "' has no value");
        }
        for (char& c : key) {
            c = c == '-' ? '_' : c;
        }
        m.set(key, value);
    }
    return m;
}

lab::ExperimentConfig load_config(const std::string& file, const std::vector<std::string>& extras,
                                  lab::Experiment fallback) {
    lab::ConfigMap m = file.empty() ? lab::ConfigMap{} : lab::ConfigMap::load(file);
    const lab::ConfigMap overrides = overrides_from(extras);
    for (const auto& [k, v] : overrides.entries()) {
        m.set(k, v);
    }
    auto cfg = lab::ExperimentConfig::from(m, fallback);
    if (cfg.experiment != fallback) {
        throw zn::ConfigError(std::string("config names experiment '") + lab::to_string(cfg.experiment) +
                              "' but the subcommand runs '" + lab::to_string(fallback) + "'");
    }
    return cfg;
}

void write_json(const std::string& out, const lab::Json& j) {
    if (out.empty() || out == "-") {
        std::cout << lab::dump(j);
    } else {
        auto path = lab::output_root(out);
        lab::write_file(path, lab::dump(j));
        std::cout << "wrote " << path.string() << "\n";
    }
}

std::vector<double> param_grid(const zn::RandomSystem& system, int count) {
    if (system.deterministic()) {
        return {system.neutral_draw()};
    }
    std::vector<double> out;
    const auto& k = *system.kernel();
    for (int i = 0; i < count; ++i) {
        out.push_back(k.lo() + k.width() * i / (count - 1));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-noise limit laboratory for intermittent circle maps"};
    app.set_version_flag("--version", lab::version_string());
    app.require_subcommand(1);

    // ulam
    double alpha = 1.5;
    double eps = 0.01;
    int cells = 4096;
    int quad_order = 5;
    double tol = 1e-10;
    std::string mode = "additive";
    std::string out = "density.csv";
    std::string orbit_out = "orbit.csv";
    std::string escape_out = "escape.csv";
    std::string diagnose_out;
    auto* ulam = app.add_subcommand("ulam", "Stationary density of the annealed Ulam matrix");
    ulam->add_option("--alpha", alpha, "tangency order")->capture_default_str();
    ulam->add_option("--eps", eps, "noise level (0 = deterministic)")->capture_default_str();
    ulam->add_option("--cells", cells, "number of cells")->capture_default_str();
    ulam->add_option("--mode", mode, "additive | parametric | deterministic | doubling")->capture_default_str();
    ulam->add_option("--quad-order", quad_order)->capture_default_str();
    ulam->add_option("--tol", tol)->capture_default_str();
    ulam->add_option("--out", out, "density CSV")->capture_default_str();

    // orbit
    double x0 = 0.3;
    std::int64_t steps = 1000;
    std::uint64_t seed = 20240601;
    auto* orbit = app.add_subcommand("orbit", "One random orbit");
    orbit->add_option("--alpha", alpha)->capture_default_str();
    orbit->add_option("--eps", eps)->capture_default_str();
    orbit->add_option("--mode", mode, "additive | parametric | deterministic | doubling")->capture_default_str();
    orbit->add_option("--x0", x0)->capture_default_str();
    orbit->add_option("--steps", steps)->capture_default_str();
    orbit->add_option("--seed", seed)->capture_default_str();
    orbit->add_option("--out", orbit_out)->capture_default_str();

    // escape
    double s_param = 0.9;
    std::int64_t trials = 1000;
    std::int64_t nmax = 1'000'000;
    auto* escape = app.add_subcommand("escape", "Escape times from the repeller belt");
    escape->add_option("--alpha", alpha)->capture_default_str();
    escape->add_option("--s", s_param)->capture_default_str();
    escape->add_option("--seed", seed)->capture_default_str();
    escape->add_option("--trials", trials)->capture_default_str();
    escape->add_option("--nmax", nmax)->capture_default_str();
    escape->add_option("--out", escape_out)->capture_default_str();

    // measure
    std::string path_a;
    std::string path_b;
    std::string metric = "w1";
    auto* measure = app.add_subcommand("measure", "Distance between two density CSVs");
    measure->add_option("--a", path_a)->required();
    measure->add_option("--b", path_b)->required();
    measure->add_option("--metric", metric, "w1 | tv")->capture_default_str();

    // diagnose
    std::string what;
    std::string family = "intermittent";
    int k_cells = 2;
    int n_blocks = 8;
    int n_omega = 32;
    std::int64_t samples = 1'000'000;
    double delta0 = 0.05;
    double rho0 = 0.2;
    double arc_start = 0.3;
    double arc_length = 0.01;
    int depth = 4;
    double radius = 0.05;
    bool atom = false;
    auto* diagnose = app.add_subcommand("diagnose", "Entropy, Pesin, distortion, gap and partition diagnostics");
    diagnose->add_option("--what", what, "entropy | pesin | distortion | gap | partition")->required();
    diagnose->add_option("--alpha", alpha)->capture_default_str();
    diagnose->add_option("--eps", eps)->capture_default_str();
    diagnose->add_option("--mode", mode, "additive | parametric | deterministic | doubling")->capture_default_str();
    diagnose->add_option("--cells", cells)->capture_default_str();
    diagnose->add_option("--k", k_cells, "partition size")->capture_default_str();
    diagnose->add_option("--n", n_blocks, "block length / refinement depth")->capture_default_str();
    diagnose->add_option("--omega", n_omega, "omega samples")->capture_default_str();
    diagnose->add_option("--samples", samples)->capture_default_str();
    diagnose->add_option("--seed", seed)->capture_default_str();
    diagnose->add_option("--delta0", delta0)->capture_default_str();
    diagnose->add_option("--rho0", rho0)->capture_default_str();
    diagnose->add_option("--start", arc_start)->capture_default_str();
    diagnose->add_option("--length", arc_length)->capture_default_str();
    diagnose->add_option("--depth", depth)->capture_default_str();
    diagnose->add_option("--r", radius)->capture_default_str();
    diagnose->add_flag("--atom", atom, "pesin: use the cell-0 atom instead of the stationary density");
    diagnose->add_option("--out", diagnose_out, "JSON file (default stdout)");

    // experiment drivers
    std::string config_file;
    auto add_driver = [&](const char* name, const char* help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_file, "key = value config file");
        sub->allow_extras();
        return sub;
    };
    auto* sweep_a = add_driver("sweep-a", "Zero-noise sweep for 0 < alpha < 1");
    auto* sweep_b = add_driver("sweep-b", "Zero-noise sweep for alpha >= 1");
    auto* instability = add_driver("instability", "Parametric saddle-node instability experiment");
    auto* mixing = add_driver("mixing", "Covering times of test arcs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitPass : kExitConfig;
    }

    try {
        if (*ulam) {
            auto system = make_system(alpha, eps, mode);
            auto P = zn::assemble_annealed(system, cells, quad_order);
            auto st = zn::stationary(P, tol);
            std::string header = echo_header({{"subcommand", "ulam"},
                                              {"alpha", lab::fmt(alpha)},
                                              {"eps", lab::fmt(eps)},
                                              {"cells", std::to_string(cells)},
                                              {"mode", mode},
                                              {"quad_order", std::to_string(quad_order)},
                                              {"tol", lab::fmt(tol)},
                                              {"residual", lab::fmt(st.residual)},
                                              {"multiple", st.multiple ? "1" : "0"}});
            auto path = lab::output_root(out);
            lab::write_file(path, lab::density_csv(st.measure, header));
            announce({path});
            if (st.multiple) {
                std::cout << "stationary_unique: flagged\n";
            }
            return kExitPass;
        }
        if (*orbit) {
            auto system = make_system(alpha, eps, mode);
            auto rec = zn::random_orbit(system, x0, steps, seed);
            std::string csv = echo_header({{"subcommand", "orbit"},
                                           {"alpha", lab::fmt(alpha)},
                                           {"eps", lab::fmt(eps)},
                                           {"mode", mode},
                                           {"x0", lab::fmt(x0)},
                                           {"steps", std::to_string(steps)},
                                           {"seed", std::to_string(seed)}});
            csv += "step,state,draw,log_deriv\n";
            for (std::size_t n = 0; n < rec.states.size(); ++n) {
                csv += std::to_string(n) + "," + lab::fmt(rec.states[n]) + ",";
                if (n < rec.draws.size()) {
                    csv += lab::fmt(rec.draws[n]) + "," + lab::fmt(rec.log_derivs[n]);
                } else {
                    csv += ",";
                }
                csv += "\n";
            }
            auto path = lab::output_root(orbit_out);
            lab::write_file(path, csv);
            announce({path});
            return kExitPass;
        }
        if (*escape) {
            auto band = zn::choose_expansion_band(alpha, s_param);
            auto kernel = zn::interval_kernel(band.s, band.u);
            auto runs = lab::escape_ensemble(band, kernel, trials, nmax, zn::SeedPolicy{seed}.child(1));
            std::string csv = echo_header({{"subcommand", "escape"},
                                           {"alpha", lab::fmt(alpha)},
                                           {"s", lab::fmt(s_param)},
                                           {"u", lab::fmt(band.u)},
                                           {"seed", std::to_string(seed)},
                                           {"trials", std::to_string(trials)},
                                           {"nmax", std::to_string(nmax)}});
            csv += "trial,x0,escape_step,escaped\n";
            for (std::size_t i = 0; i < runs.size(); ++i) {
                csv += std::to_string(i) + "," + lab::fmt(runs[i].x0) + "," +
                       (runs[i].steps ? std::to_string(*runs[i].steps) : std::string()) + "," +
                       (runs[i].steps ? "1" : "0") + "\n";
            }
            auto path = lab::output_root(escape_out);
            lab::write_file(path, csv);
            announce({path});
            std::cout << "escaped_fraction = " << lab::fmt(lab::escaped_fraction(runs)) << "\n";
            return kExitPass;
        }
        if (*measure) {
            auto a = read_density(path_a);
            auto b = read_density(path_b);
            double value = 0.0;
            if (metric == "w1") {
                value = zn::w1_circle(a, b);
            } else if (metric == "tv") {
                value = zn::tv_grid(a, b);
            } else {
                throw zn::ConfigError("unknown metric '" + metric + "'");
            }
            std::cout << lab::fmt(value) << "\n";
            return kExitPass;
        }
        if (*diagnose) {
            lab::Json j;
            j["what"] = what;
            j["version"] = lab::version_string();
            lab::Json inputs = {{"alpha", alpha}, {"eps", eps}, {"mode", mode}, {"seed", seed}};
            auto system = make_system(alpha, eps, mode);
            auto source_measure = [&] {
                if (atom) {
                    return zn::GridMeasure::atom(cells);
                }
                if (mode == "doubling" && eps == 0.0) {
                    return zn::GridMeasure::uniform(cells);
                }
                return zn::stationary(zn::assemble_annealed(system, cells, quad_order)).measure;
            };
            if (what == "entropy" || what == "pesin") {
                inputs["cells"] = cells;
                inputs["atom"] = atom;
                auto mu = source_measure();
                if (what == "pesin") {
                    double rhs = zn::pesin_rhs(system, mu);
                    j["rhs"] = rhs;
                }
                inputs["k"] = k_cells;
                inputs["n"] = n_blocks;
                inputs["omega"] = n_omega;
                inputs["samples"] = samples;
                auto est = zn::block_entropy(system, mu, k_cells, n_blocks, n_omega, samples, zn::SeedPolicy{seed});
                j["block_lengths"] = est.block_lengths;
                j["h_values"] = est.h_values;
                j["std_errors"] = est.std_errors;
                j["undersampled"] = est.any_undersampled();
                j["subadditive_within_2se"] = zn::subadditive_within(est);
                if (what == "pesin") {
                    auto res = zn::pesin_residual(system, mu, est);
                    j["entropy"] = res.entropy;
                    j["residual"] = res.residual;
                    j["flagged"] = res.flagged;
                }
            } else if (what == "distortion" || what == "gap") {
                auto params = param_grid(system, 11);
                inputs["params"] = params;
                auto run = [&](const auto& fam) {
                    if (what == "gap") {
                        inputs["delta0"] = delta0;
                        inputs["rho0"] = rho0;
                        auto g = zn::expansion_gap(fam, params, delta0, rho0);
                        j["beta"] = g.beta;
                    } else {
                        inputs["start"] = arc_start;
                        inputs["length"] = arc_length;
                        inputs["depth"] = depth;
                        inputs["r"] = radius;
                        std::vector<double> seq(depth, params.front());
                        zn::Xoshiro256 rng = zn::SeedPolicy{seed}.stream(0);
                        for (double& t : seq) {
                            t = system.draw(rng);
                        }
                        auto d = zn::distortion_constant(fam, seq, zn::Arc(arc_start, arc_length), depth, radius);
                        j["C"] = d.C;
                    }
                };
                if (mode == "parametric") {
                    run(zn::SaddleFamily{alpha});
                } else if (mode == "doubling") {
                    run(zn::AdditiveFamily<zn::DoublingMap>{zn::DoublingMap{}});
                } else {
                    run(zn::AdditiveFamily<zn::IntermittentMap>{zn::IntermittentMap(alpha)});
                }
            } else if (what == "partition") {
                inputs["k"] = k_cells;
                inputs["n"] = n_blocks;
                j["diameter"] = zn::partition_diameter(system, seed, k_cells, n_blocks);
            } else {
                throw zn::ConfigError("unknown diagnostic '" + what + "'");
            }
            j["inputs"] = inputs;
            write_json(diagnose_out, j);
            return kExitPass;
        }
        if (*sweep_a || *sweep_b) {
            auto kind = *sweep_a ? lab::Experiment::thmA_sweep : lab::Experiment::thmB_sweep;
            auto* sub = *sweep_a ? sweep_a : sweep_b;
            auto cfg = load_config(config_file, sub->remaining(), kind);
            auto report = *sweep_a ? lab::run_thmA(cfg) : lab::run_thmB(cfg);
            announce(lab::emit(report));
            for (const auto& row : report.rows) {
                std::fprintf(stderr, "eps=%.17g runtime=%.3fs iterations=%d\n", row.eps, row.runtime,
                             row.iterations);
            }
            std::cout << "ratio_last_first = " << lab::fmt(report.ratio_last_first) << "\n";
            return exit_code(report.checks);
        }
        if (*instability) {
            auto cfg = load_config(config_file, instability->remaining(), lab::Experiment::thmC_instability);
            auto report = lab::run_thmC(cfg);
            announce(lab::emit(report));
            return exit_code(report.checks);
        }
        if (*mixing) {
            auto cfg = load_config(config_file, mixing->remaining(), lab::Experiment::mixing);
            auto report = lab::run_mixing(cfg);
            announce(lab::emit(report));
            return exit_code(report.checks);
        }
    } catch (const zn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const zn::ParameterError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const zn::InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const zn::Error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitConfig;
}
