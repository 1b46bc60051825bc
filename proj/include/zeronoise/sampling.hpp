#pragma once

// Seeded Monte Carlo on random systems. Orbit r of an ensemble draws its
// start point and then one parameter per step from SeedPolicy::stream(r);
// single orbits use stream 0 of SeedPolicy{seed}.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "zeronoise/circle.hpp"
#include "zeronoise/dynamics.hpp"
#include "zeronoise/error.hpp"
#include "zeronoise/measures.hpp"
#include "zeronoise/parallel.hpp"
#include "zeronoise/perturbation.hpp"
#include "zeronoise/rng.hpp"

namespace zeronoise {

struct OrbitRecord {
    std::uint64_t seed = 0;
    std::vector<double> states;      ///< states[0] = x0, size draws_used + 1
    std::vector<double> draws;       ///< draws[k] moves states[k] to states[k+1]
    std::vector<double> log_derivs;  ///< log derivative at states[k] under draws[k]
    double log_deriv_sum = 0.0;
    std::int64_t draws_used = 0;
};

inline OrbitRecord random_orbit(const RandomSystem& system, double x0, std::int64_t n, std::uint64_t seed) {
    if (n < 1) {
        throw ParameterError("random_orbit requires n >= 1");
    }
    Xoshiro256 rng = SeedPolicy{seed}.stream(0);
    OrbitRecord rec;
    rec.seed = seed;
    rec.states.reserve(n + 1);
    rec.draws.reserve(n);
    rec.log_derivs.reserve(n);
    double x = wrap_unit(x0);
    rec.states.push_back(x);
    for (std::int64_t k = 0; k < n; ++k) {
        double t = system.draw(rng);
        Evaluation e = system.step_eval(x, t);
        double ld = std::log(e.derivative);
        rec.draws.push_back(t);
        rec.log_derivs.push_back(ld);
        rec.log_deriv_sum += ld;
        x = e.image;
        rec.states.push_back(x);
    }
    rec.draws_used = n;
    return rec;
}

/// (1/n) sum of log derivatives along the random orbit; same stream as random_orbit.
inline double lyapunov(const RandomSystem& system, double x0, std::int64_t n, std::uint64_t seed) {
    if (n < 1) {
        throw ParameterError("lyapunov requires n >= 1");
    }
    Xoshiro256 rng = SeedPolicy{seed}.stream(0);
    double x = wrap_unit(x0);
    double sum = 0.0;
    for (std::int64_t k = 0; k < n; ++k) {
        double t = system.draw(rng);
        Evaluation e = system.step_eval(x, t);
        sum += std::log(e.derivative);
        x = e.image;
    }
    return sum / static_cast<double>(n);
}

namespace detail {

inline void require_ensemble(std::int64_t n_orbits, std::int64_t burn_in, std::int64_t keep) {
    if (n_orbits < 1 || burn_in < 0 || keep < 1) {
        throw ParameterError("ensemble requires n_orbits >= 1, burn_in >= 0, keep >= 1");
    }
}

// Runs orbit r from a uniform start and hands every kept state to sink(x).
template <class Sink>
void run_ensemble_orbit(const RandomSystem& system, std::int64_t burn_in, std::int64_t keep, const SeedPolicy& seeds,
                        std::uint64_t r, Sink&& sink) {
    Xoshiro256 rng = seeds.stream(r);
    double x = rng.uniform();
    for (std::int64_t k = 0; k < burn_in; ++k) {
        x = wrap_unit(system.lift_unchecked(x, system.draw(rng)));
    }
    for (std::int64_t k = 0; k < keep; ++k) {
        x = wrap_unit(system.lift_unchecked(x, system.draw(rng)));
        sink(x);
    }
}

}  // namespace detail

/// Pools the post-burn-in states of n_orbits independent orbits started from
/// uniform random points, in orbit-index order.
inline EmpiricalMeasure empirical_stationary(const RandomSystem& system, std::int64_t n_orbits,
                                             std::int64_t burn_in, std::int64_t keep, const SeedPolicy& seeds) {
    detail::require_ensemble(n_orbits, burn_in, keep);
    std::vector<double> samples(static_cast<std::size_t>(n_orbits * keep));
    parallel_for(static_cast<std::size_t>(n_orbits), [&](std::size_t r) {
        double* out = samples.data() + r * keep;
        detail::run_ensemble_orbit(system, burn_in, keep, seeds, r, [&out](double x) { *out++ = x; });
    });
    return EmpiricalMeasure::from_samples(std::move(samples));
}

/// Same ensemble as empirical_stationary, accumulated as counts on n_cells cells.
inline EmpiricalMeasure empirical_histogram(const RandomSystem& system, std::int64_t n_orbits, std::int64_t burn_in,
                                            std::int64_t keep, const SeedPolicy& seeds, int n_cells) {
    detail::require_ensemble(n_orbits, burn_in, keep);
    if (n_cells < 1) {
        throw ParameterError("empirical_histogram needs at least one cell");
    }
    constexpr std::size_t kBlocks = 64;
    std::vector<std::vector<std::uint64_t>> partial(kBlocks);
    parallel_for(kBlocks, [&](std::size_t b) {
        auto& counts = partial[b];
        counts.assign(n_cells, 0);
        std::size_t first = n_orbits * b / kBlocks;
        std::size_t last = n_orbits * (b + 1) / kBlocks;
        for (std::size_t r = first; r < last; ++r) {
            detail::run_ensemble_orbit(system, burn_in, keep, seeds, r, [&](double x) {
                ++counts[std::min(n_cells - 1, static_cast<int>(x * n_cells))];
            });
        }
    });
    std::vector<std::uint64_t> counts(n_cells, 0);
    for (const auto& p : partial) {
        for (int i = 0; i < n_cells; ++i) {
            counts[i] += p[i];
        }
    }
    return EmpiricalMeasure::from_counts(std::move(counts));
}

namespace detail {

inline RandomSystem band_system(const ExpansionBand& band, const NoiseKernel& kernel) {
    if (kernel.lo() < band.s || kernel.hi() > band.u) {
        throw ParameterError("kernel support must lie inside the expansion band [s, u]");
    }
    return RandomSystem::parametric(band.alpha, kernel);
}

}  // namespace detail

/// First n <= n_max with the random orbit outside the closed belt
/// [p_u, 1 - p_u]; empty when it stays inside for n_max steps.
inline std::optional<std::int64_t> escape_time(const ExpansionBand& band, const NoiseKernel& kernel, double x0,
                                               std::int64_t n_max, std::uint64_t seed) {
    RandomSystem system = detail::band_system(band, kernel);
    double x = wrap_unit(x0);
    if (x < band.p_u || x > 1.0 - band.p_u) {
        throw ParameterError("escape_time requires x0 inside the belt [p_u, 1 - p_u]");
    }
    Xoshiro256 rng = SeedPolicy{seed}.stream(0);
    for (std::int64_t n = 1; n <= n_max; ++n) {
        x = wrap_unit(system.lift_unchecked(x, system.draw(rng)));
        if (x < band.p_u || x > 1.0 - band.p_u) {
            return n;
        }
    }
    return std::nullopt;
}

struct FunnelResult {
    double distance;     ///< circle distance of the n-th state to 0
    bool envelope_holds; ///< f_s <= f_t <= f_u on (0, 1/2) (mirrored on (1/2, 1)) along the orbit
};

/// Iterates a start inside the funnel (1 - p_u, p_u) around 0 for n steps.
inline FunnelResult funnel_check(const ExpansionBand& band, const NoiseKernel& kernel, double x0, std::int64_t n,
                                 std::uint64_t seed) {
    RandomSystem system = detail::band_system(band, kernel);
    double x = wrap_unit(x0);
    if (!(x < band.p_u || x > 1.0 - band.p_u)) {
        throw ParameterError("funnel_check requires x0 inside the funnel (1 - p_u, p_u)");
    }
    const SaddleNodeMap lower(band.alpha, band.s);
    const SaddleNodeMap upper(band.alpha, band.u);
    Xoshiro256 rng = SeedPolicy{seed}.stream(0);
    bool envelope = true;
    for (std::int64_t k = 0; k < n; ++k) {
        double t = system.draw(rng);
        double y = system.lift_unchecked(x, t);
        if (x > 0.0 && x != 0.5) {
            double a = lower.lift(x);
            double b = upper.lift(x);
            double slack = 4e-16 * std::fabs(y);
            bool ok = x < 0.5 ? (a <= y + slack && y <= b + slack) : (b <= y + slack && y <= a + slack);
            envelope = envelope && ok;
        }
        x = wrap_unit(y);
    }
    return {circle_distance(x, 0.0), envelope};
}

}  // namespace zeronoise
