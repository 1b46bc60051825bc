#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zeronoise/dynamics.hpp"
#include "zeronoise/error.hpp"
#include "zeronoise/lab/config.hpp"
#include "zeronoise/measures.hpp"
#include "zeronoise/parallel.hpp"
#include "zeronoise/sampling.hpp"
#include "zeronoise/transfer.hpp"

namespace zeronoise::lab {

enum class Verdict { pass, fail, flagged };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::flagged: return "flagged";
    }
    return "?";
}

struct Check {
    std::string name;
    Verdict verdict;
};

inline Verdict verdict_of(bool ok) { return ok ? Verdict::pass : Verdict::fail; }

inline bool any_failed(const std::vector<Check>& checks) {
    for (const auto& c : checks) {
        if (c.verdict == Verdict::fail) {
            return true;
        }
    }
    return false;
}

/// Runs f, prefixing any library error with the stage name (the error type is kept).
template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    const std::string p = name + ": ";
    try {
        return f();
    } catch (const HypothesisError& e) {
        throw HypothesisError(p + e.what(), e.step());
    } catch (const ConfigError& e) {
        throw ConfigError(p + e.what());
    } catch (const ParameterError& e) {
        throw ParameterError(p + e.what());
    } catch (const InputError& e) {
        throw InputError(p + e.what());
    } catch (const ContractError& e) {
        throw ContractError(p + e.what());
    } catch (const NumericError& e) {
        throw NumericError(p + e.what());
    } catch (const InfeasibleError& e) {
        throw InfeasibleError(p + e.what());
    } catch (const Error& e) {
        throw Error(p + e.what());
    }
}

inline std::string eps_label(double eps) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "eps=%.17g", eps);
    return buf;
}

struct SweepRow {
    double eps = 0.0;
    double w1_to_dirac = 0.0;
    double w1_to_srb = 0.0;
    double mass_near_zero = 0.0;
    double mixture_t = 0.0;
    double mixture_distance = 0.0;
    double runtime = 0.0;  ///< seconds; kept out of emitted files
    int iterations = 0;
    double residual = 0.0;
    bool multiple = false;
    bool renormalized = false;
};

struct SweepReport {
    ExperimentConfig config;
    std::vector<SweepRow> rows;
    double ratio_last_first = 0.0;  ///< w1_to_dirac of the last row over the first
    std::vector<Check> checks;
};

namespace detail {

inline void require_sweep(const ExperimentConfig& c) {
    if (c.eps_ladder.empty()) {
        throw ConfigError("eps_ladder must not be empty");
    }
    for (double eps : c.eps_ladder) {
        if (!(eps > 0.0 && eps <= 0.5)) {
            throw ConfigError("eps_ladder entries must lie in (0, 1/2]");
        }
    }
}

inline GridMeasure srb_measure(const ExperimentConfig& c) {
    return stage("srb", [&] {
        auto st = stationary(assemble_deterministic(IntermittentMap(c.alpha), c.cells), c.tol,
                             static_cast<int>(c.max_iter), c.n_starts);
        return st.measure;
    });
}

template <class Fill>
std::vector<SweepRow> sweep_rows(const ExperimentConfig& c, Fill&& fill) {
    std::vector<SweepRow> rows(c.eps_ladder.size());
    parallel_for(rows.size(), [&](std::size_t i) {
        const auto started = std::chrono::steady_clock::now();
        SweepRow& row = rows[i];
        row.eps = c.eps_ladder[i];
        const std::string label = eps_label(row.eps);
        auto system = stage(label + ": noise", [&] {
            return RandomSystem::additive(IntermittentMap(c.alpha), uniform_kernel(row.eps));
        });
        auto P = stage(label + ": assemble", [&] { return assemble_annealed(system, c.cells, c.quad_order); });
        auto st = stage(label + ": stationary",
                        [&] { return stationary(P, c.tol, static_cast<int>(c.max_iter), c.n_starts); });
        row.iterations = st.iterations;
        row.residual = st.residual;
        row.multiple = st.multiple;
        row.renormalized = P.renormalized();
        stage(label + ": measures", [&] {
            row.w1_to_dirac = w1_circle(st.measure, dirac_zero());
            row.mass_near_zero = mass_near_zero(st.measure, c.delta);
            fill(row, st.measure);
        });
        row.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    });
    return rows;
}

inline Check solver_check(const std::vector<SweepRow>& rows) {
    for (const auto& r : rows) {
        if (r.multiple || r.renormalized) {
            return {"stationary_solutions_clean", Verdict::flagged};
        }
    }
    return {"stationary_solutions_clean", Verdict::pass};
}

}  // namespace detail

/// Zero-noise sweep in the regime with an absolutely continuous physical measure.
inline SweepReport run_thmA(const ExperimentConfig& config) {
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
        throw ParameterError("run_thmA requires alpha in (0, 1)");
    }
    detail::require_sweep(config);
    SweepReport report{config, {}, 0.0, {}};
    const GridMeasure srb = detail::srb_measure(config);
    report.rows = detail::sweep_rows(config, [&](SweepRow& row, const GridMeasure& mu) {
        row.w1_to_srb = w1_circle(mu, srb);
        MixtureEstimate m = distance_to_E(mu, srb, config.t_grid);
        row.mixture_t = m.t_weight;
        row.mixture_distance = m.distance;
    });
    bool nonincreasing = true;
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        nonincreasing = nonincreasing && report.rows[i].mixture_distance <= report.rows[i - 1].mixture_distance;
    }
    report.ratio_last_first = report.rows.back().w1_to_dirac / report.rows.front().w1_to_dirac;
    report.checks.push_back({"mixture_distance_nonincreasing", verdict_of(nonincreasing)});
    report.checks.push_back(detail::solver_check(report.rows));
    return report;
}

/// Zero-noise sweep in the regime where delta_0 is the physical measure; the
/// SRB columns then refer to delta_0 itself (E = {delta_0}).
inline SweepReport run_thmB(const ExperimentConfig& config) {
    if (!(config.alpha >= 1.0) || !std::isfinite(config.alpha)) {
        throw ParameterError("run_thmB requires alpha >= 1");
    }
    detail::require_sweep(config);
    SweepReport report{config, {}, 0.0, {}};
    report.rows = detail::sweep_rows(config, [](SweepRow& row, const GridMeasure&) {
        row.w1_to_srb = row.w1_to_dirac;
        row.mixture_t = 1.0;
        row.mixture_distance = row.w1_to_dirac;
    });
    bool decreasing = true;
    bool increasing = true;
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        decreasing = decreasing && report.rows[i].w1_to_dirac < report.rows[i - 1].w1_to_dirac;
        increasing = increasing && report.rows[i].mass_near_zero > report.rows[i - 1].mass_near_zero;
    }
    report.ratio_last_first = report.rows.back().w1_to_dirac / report.rows.front().w1_to_dirac;
    report.checks.push_back({"w1_to_dirac_decreasing", verdict_of(decreasing)});
    report.checks.push_back({"mass_near_zero_increasing", verdict_of(increasing)});
    report.checks.push_back(detail::solver_check(report.rows));
    return report;
}

struct EscapeTrial {
    double x0;
    std::optional<std::int64_t> steps;
};

/// Escape times of `trials` starts drawn uniformly from the belt
/// [p_u, 1 - p_u]; starts come from child(0) of `seeds`, noise from child(1).
inline std::vector<EscapeTrial> escape_ensemble(const ExpansionBand& band, const NoiseKernel& kernel,
                                                std::int64_t trials, std::int64_t n_max, const SeedPolicy& seeds) {
    if (trials < 1 || n_max < 0) {
        throw ParameterError("escape ensemble needs trials >= 1 and n_max >= 0");
    }
    std::vector<EscapeTrial> out(static_cast<std::size_t>(trials));
    const SeedPolicy starts = seeds.child(0);
    const SeedPolicy noise = seeds.child(1);
    parallel_for(out.size(), [&](std::size_t i) {
        Xoshiro256 rng = starts.stream(i);
        double x0 = band.p_u + (1.0 - 2.0 * band.p_u) * rng.uniform();
        out[i] = {x0, escape_time(band, kernel, x0, n_max, noise.substream_seed(i))};
    });
    return out;
}

inline double escaped_fraction(const std::vector<EscapeTrial>& trials) {
    std::size_t escaped = 0;
    for (const auto& t : trials) {
        escaped += t.steps ? 1 : 0;
    }
    return static_cast<double>(escaped) / static_cast<double>(trials.size());
}

struct InstabilityReport {
    ExperimentConfig config;
    ExpansionBand band;
    double funnel_max_distance = 0.0;
    bool funnel_envelope = true;
    std::vector<EscapeTrial> trials{};
    double escaped_fraction = 0.0;
    std::int64_t max_escape_step = 0;
    EmpiricalMeasure histogram = dirac_zero();
    double stationary_mass = 0.0;
    double stationary_w1_to_dirac = 0.0;
    double srb_mass = 0.0;
    std::vector<Check> checks{};
};

/// Parametric saddle-node noise on an expansion band: every orbit leaves the
/// repeller belt and funnels into 0, while the noiseless map keeps an
/// absolutely continuous physical measure.
inline InstabilityReport run_thmC(const ExperimentConfig& config) {
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
        throw ParameterError("run_thmC requires alpha in (0, 1)");
    }
    if (!(config.s > 0.0 && config.s < 1.0)) {
        throw ParameterError("run_thmC requires s in (0, 1)");
    }
    InstabilityReport r{config, stage("band", [&] { return choose_expansion_band(config.alpha, config.s); })};
    const NoiseKernel kernel = interval_kernel(r.band.s, r.band.u);
    const double p_u = r.band.p_u;

    stage("funnel", [&] {
        std::vector<FunnelResult> runs(static_cast<std::size_t>(config.funnel_starts));
        const SeedPolicy seeds = config.seeds.child(0);
        parallel_for(runs.size(), [&](std::size_t i) {
            Xoshiro256 rng = seeds.stream(2 * i);
            double x0 = wrap_unit((2.0 * rng.uniform() - 1.0) * p_u);
            if (x0 == p_u || x0 == 1.0 - p_u) {
                x0 = 0.0;
            }
            runs[i] = funnel_check(r.band, kernel, x0, config.funnel_steps, seeds.substream_seed(2 * i + 1));
        });
        for (const auto& f : runs) {
            r.funnel_max_distance = std::max(r.funnel_max_distance, f.distance);
            r.funnel_envelope = r.funnel_envelope && f.envelope_holds;
        }
    });

    stage("escape", [&] {
        r.trials = escape_ensemble(r.band, kernel, config.trials, config.nmax, config.seeds.child(1));
        r.escaped_fraction = escaped_fraction(r.trials);
        for (const auto& t : r.trials) {
            r.max_escape_step = std::max(r.max_escape_step, t.steps.value_or(0));
        }
    });

    stage("stationary histogram", [&] {
        RandomSystem system = RandomSystem::parametric(config.alpha, kernel);
        r.histogram = empirical_histogram(system, config.orbits, config.burn_in, config.keep, config.seeds.child(3),
                                          config.hist_cells);
        r.stationary_mass = mass_near_zero(r.histogram, config.delta);
        r.stationary_w1_to_dirac = w1_circle(r.histogram, dirac_zero());
    });

    r.srb_mass = mass_near_zero(detail::srb_measure(config), config.delta);

    r.checks.push_back({"funnel_contracts", verdict_of(r.funnel_envelope && r.funnel_max_distance < p_u)});
    r.checks.push_back({"escaped_fraction_at_least_0.99", verdict_of(r.escaped_fraction >= 0.99)});
    r.checks.push_back({"stationary_mass_near_zero_at_least_0.99", verdict_of(r.stationary_mass >= 0.99)});
    r.checks.push_back({"stationary_w1_to_dirac_at_most_0.01", verdict_of(r.stationary_w1_to_dirac <= 0.01)});
    r.checks.push_back({"noiseless_srb_mass_near_zero_at_most_0.5", verdict_of(r.srb_mass <= 0.5)});
    return r;
}

struct MixingArc {
    double start;
    double length;
    CoveringResult covering;
    bool nondecreasing;
};

struct MixingReport {
    ExperimentConfig config;
    std::vector<MixingArc> arcs;
    std::vector<Check> checks;
};

/// Covering times of the configured arcs under the intermittent map;
/// exhaustion is flagged per arc.
inline MixingReport run_mixing(const ExperimentConfig& config) {
    if (!(config.alpha > 0.0) || !std::isfinite(config.alpha)) {
        throw ParameterError("run_mixing requires alpha > 0");
    }
    if (config.arcs.empty()) {
        throw ConfigError("mixing needs at least one arc");
    }
    if (config.mixing_nmax > INT32_MAX) {
        throw ConfigError("mixing_nmax is out of range");
    }
    MixingReport report{config, {}, {}};
    const IntermittentMap map(config.alpha);
    for (std::size_t k = 0; k + 1 < config.arcs.size(); k += 2) {
        double start = config.arcs[k];
        double length = config.arcs[k + 1];
        std::string label = "arc_" + std::to_string(k / 2);
        auto covering = stage(label, [&] {
            return covering_time(map, Arc(start, length), static_cast<int>(config.mixing_nmax));
        });
        bool nondecreasing = true;
        for (std::size_t n = 1; n < covering.lengths.size(); ++n) {
            nondecreasing = nondecreasing && covering.lengths[n] >= covering.lengths[n - 1];
        }
        report.checks.push_back({label + "_covered", covering.steps ? Verdict::pass : Verdict::flagged});
        report.arcs.push_back({start, length, std::move(covering), nondecreasing});
    }
    return report;
}

}  // namespace zeronoise::lab
