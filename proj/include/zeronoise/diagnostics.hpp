#pragma once

// Entropy, Pesin/Rokhlin residuals and the expansion constants used by the
// instability argument: bounded distortion, the expansion gap, and the decay
// of atom diameters of refined itinerary partitions.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "zeronoise/circle.hpp"
#include "zeronoise/dynamics.hpp"
#include "zeronoise/error.hpp"
#include "zeronoise/measures.hpp"
#include "zeronoise/parallel.hpp"
#include "zeronoise/perturbation.hpp"
#include "zeronoise/quadrature.hpp"
#include "zeronoise/rng.hpp"
#include "zeronoise/transfer.hpp"

namespace zeronoise {

/// Anything that can be iterated as a random orbit.
template <class S>
concept StepSystem = requires(const S& s, Xoshiro256& rng, double x, double t) {
    { s.draw(rng) } -> std::convertible_to<double>;
    { s.step(x, t) } -> std::convertible_to<double>;
};

/// A family of degree-2 circle lifts indexed by a real parameter.
template <class F>
concept LiftFamily = requires(const F& f, double x, double t) {
    { f.lift(x, t) } -> std::convertible_to<double>;
    { f.derivative(x, t) } -> std::convertible_to<double>;
};

/// x -> map(x) + t.
template <CircleMap M>
struct AdditiveFamily {
    M map;
    double lift(double x, double t) const { return map.lift(x) + t; }
    double derivative(double x, double) const { return map.derivative(x); }
};

/// x -> f_t(x) of the saddle-node family.
struct SaddleFamily {
    double alpha;
    double lift(double x, double t) const { return SaddleNodeMap(alpha, t).lift(x); }
    double derivative(double x, double t) const { return SaddleNodeMap(alpha, t).derivative(x); }
};

namespace detail {

// Draws points from a grid density or an empirical measure.
class SourceSampler {
public:
    explicit SourceSampler(const GridMeasure& m) : n_cells_(m.n_cells()) {
        cumulative_.resize(m.n_cells());
        std::partial_sum(m.weights().begin(), m.weights().end(), cumulative_.begin());
    }

    explicit SourceSampler(const EmpiricalMeasure& m) {
        if (m.is_histogram()) {
            *this = SourceSampler(grid_from_samples(m, static_cast<int>(m.counts().size())));
        } else {
            samples_.assign(m.samples().begin(), m.samples().end());
        }
    }

    double operator()(Xoshiro256& rng) const {
        if (!samples_.empty()) {
            auto idx = static_cast<std::size_t>(rng.uniform() * static_cast<double>(samples_.size()));
            return samples_[std::min(idx, samples_.size() - 1)];
        }
        double u = rng.uniform() * cumulative_.back();
        auto cell = static_cast<int>(std::upper_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin());
        cell = std::min(cell, n_cells_ - 1);
        return (cell + rng.uniform()) / n_cells_;
    }

private:
    std::vector<double> cumulative_;
    std::vector<double> samples_;
    int n_cells_ = 0;
};

inline int symbol_of(double x, int k) { return std::min(k - 1, static_cast<int>(x * k)); }

inline double plugin_entropy_mm(std::vector<std::uint32_t>& codes, std::uint64_t alphabet) {
    const double n = static_cast<double>(codes.size());
    double h = 0.0;
    std::uint64_t occupied = 0;
    auto add = [&](std::uint64_t c) {
        double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
        ++occupied;
    };
    if (alphabet <= 4 * codes.size() + 1024) {
        std::vector<std::uint32_t> counts(alphabet, 0);
        for (auto c : codes) {
            ++counts[c];
        }
        for (auto c : counts) {
            if (c > 0) {
                add(c);
            }
        }
    } else {
        std::sort(codes.begin(), codes.end());
        std::size_t run = 1;
        for (std::size_t i = 1; i <= codes.size(); ++i) {
            if (i < codes.size() && codes[i] == codes[i - 1]) {
                ++run;
            } else {
                add(run);
                run = 1;
            }
        }
    }
    // Miller-Madow correction
    return h + (static_cast<double>(occupied) - 1.0) / (2.0 * n);
}

}  // namespace detail

struct EntropyEstimate {
    int partition_size = 0;
    std::vector<int> block_lengths;
    std::vector<double> h_values;    ///< mean over omega-samples of H_n / n
    std::vector<double> std_errors;  ///< standard error of that mean
    std::vector<bool> undersampled;  ///< samples < 10 k^n
    std::int64_t samples_per_block = 0;
    int n_omega = 0;

    bool any_undersampled() const {
        return std::any_of(undersampled.begin(), undersampled.end(), [](bool b) { return b; });
    }
};

/// Block entropy of the random itinerary partition: for each omega-sample a
/// parameter sequence is drawn, `samples` points are drawn from the
/// stationary source, and H(xi v T_w^-1 xi v ... ) is the Miller-Madow
/// corrected plug-in entropy of their length-n itineraries through k equal
/// arcs. Returns H_n / n averaged over omega for n = 1, 2, 4, ..., n_max.
template <StepSystem S, class Source>
EntropyEstimate block_entropy(const S& system, const Source& source, int k_cells, int n_max, int n_omega,
                              std::int64_t samples, const SeedPolicy& seeds) {
    if (k_cells < 1 || n_max < 1 || n_omega < 1 || samples < 1) {
        throw ParameterError("block_entropy: k_cells, n_max, n_omega and samples must be positive");
    }
    if (n_max > 24 || n_max * std::log2(static_cast<double>(k_cells)) > 24.0 + 1e-12) {
        throw ParameterError("block_entropy: word count k^n_max must not exceed 2^24");
    }
    const detail::SourceSampler sampler(source);
    EntropyEstimate est;
    est.partition_size = k_cells;
    est.samples_per_block = samples;
    est.n_omega = n_omega;
    for (int n = 1; n <= n_max; n *= 2) {
        est.block_lengths.push_back(n);
    }
    if (est.block_lengths.back() != n_max) {
        est.block_lengths.push_back(n_max);
    }
    const std::size_t nb = est.block_lengths.size();
    std::vector<std::vector<double>> per_omega(n_omega, std::vector<double>(nb));
    parallel_for(static_cast<std::size_t>(n_omega), [&](std::size_t r) {
        Xoshiro256 rng = seeds.stream(r);
        std::vector<double> omega(n_max > 1 ? n_max - 1 : 0);
        for (double& t : omega) {
            t = system.draw(rng);
        }
        std::vector<std::uint32_t> full(static_cast<std::size_t>(samples));
        for (auto& code : full) {
            double x = sampler(rng);
            std::uint32_t c = static_cast<std::uint32_t>(detail::symbol_of(x, k_cells));
            for (int j = 1; j < n_max; ++j) {
                x = system.step(x, omega[j - 1]);
                c = c * static_cast<std::uint32_t>(k_cells) + static_cast<std::uint32_t>(detail::symbol_of(x, k_cells));
            }
            code = c;
        }
        std::vector<std::uint32_t> prefix(full.size());
        for (std::size_t b = 0; b < nb; ++b) {
            int n = est.block_lengths[b];
            std::uint32_t divisor = 1;
            std::uint64_t alphabet = 1;
            for (int j = 0; j < n_max - n; ++j) {
                divisor *= static_cast<std::uint32_t>(k_cells);
            }
            for (int j = 0; j < n; ++j) {
                alphabet *= static_cast<std::uint64_t>(k_cells);
            }
            for (std::size_t i = 0; i < full.size(); ++i) {
                prefix[i] = full[i] / divisor;
            }
            per_omega[r][b] = detail::plugin_entropy_mm(prefix, alphabet) / n;
        }
    });
    for (std::size_t b = 0; b < nb; ++b) {
        double mean = 0.0;
        for (int r = 0; r < n_omega; ++r) {
            mean += per_omega[r][b];
        }
        mean /= n_omega;
        double var = 0.0;
        for (int r = 0; r < n_omega; ++r) {
            var += (per_omega[r][b] - mean) * (per_omega[r][b] - mean);
        }
        double se = n_omega > 1 ? std::sqrt(var / (n_omega - 1) / n_omega) : 0.0;
        est.h_values.push_back(mean);
        est.std_errors.push_back(se);
        double words = std::pow(static_cast<double>(k_cells), est.block_lengths[b]);
        est.undersampled.push_back(static_cast<double>(samples) < 10.0 * words);
    }
    return est;
}

/// H_{2n}/(2n) <= H_n/n + n_se standard errors for every doubling pair.
inline bool subadditive_within(const EntropyEstimate& e, double n_se = 2.0) {
    for (std::size_t a = 0; a < e.block_lengths.size(); ++a) {
        for (std::size_t b = a + 1; b < e.block_lengths.size(); ++b) {
            if (e.block_lengths[b] != 2 * e.block_lengths[a]) {
                continue;
            }
            double se = std::hypot(e.std_errors[a], e.std_errors[b]);
            if (e.h_values[b] > e.h_values[a] + n_se * se) {
                return false;
            }
        }
    }
    return true;
}

/// int int log f_t'(x) dmu(x) dtheta(t) with cell-midpoint evaluation and
/// Gauss-Legendre quadrature over the kernel support (exact in additive mode).
inline double pesin_rhs(const RandomSystem& system, const GridMeasure& mu, int quad_order = 8) {
    const int n = mu.n_cells();
    std::vector<double> params;
    std::vector<double> weights;
    if (system.mode() == Mode::additive || !system.kernel()) {
        params.push_back(system.neutral_draw());
        weights.push_back(1.0);
    } else {
        const NoiseKernel& k = *system.kernel();
        GaussLegendre rule(quad_order);
        for (int q = 0; q < rule.order(); ++q) {
            params.push_back(k.lo() + k.width() * rule.nodes[q]);
            weights.push_back(rule.weights[q]);
        }
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        if (mu[i] == 0.0) {
            continue;
        }
        double mid = (i + 0.5) / n;
        double inner = 0.0;
        for (std::size_t q = 0; q < params.size(); ++q) {
            inner += weights[q] * std::log(system.derivative_unchecked(mid, params[q]));
        }
        total += mu[i] * inner;
    }
    return total;
}

struct PesinResidual {
    double residual;  ///< |best H_n/n - pesin_rhs|
    double entropy;   ///< best H_n/n: the smallest non-flagged block estimate
    double rhs;
    bool flagged;     ///< only undersampled estimates were available
};

inline PesinResidual pesin_residual(const RandomSystem& system, const GridMeasure& mu, const EntropyEstimate& entropy) {
    if (entropy.h_values.empty()) {
        throw InputError("pesin_residual needs a non-empty entropy estimate");
    }
    double best = INFINITY;
    for (std::size_t b = 0; b < entropy.h_values.size(); ++b) {
        if (!entropy.undersampled[b]) {
            best = std::min(best, entropy.h_values[b]);
        }
    }
    bool flagged = !std::isfinite(best);
    if (flagged) {
        best = *std::min_element(entropy.h_values.begin(), entropy.h_values.end());
    }
    double rhs = pesin_rhs(system, mu);
    return {std::fabs(best - rhs), best, rhs, flagged};
}

struct DistortionReport {
    Arc interval;
    int depth;
    double C;  ///< max over grid pairs of (f^k)'(x) / (f^k)'(y); >= 1
};

/// Bounded-distortion constant of the composition f_{t_{k-1}} o ... o f_{t_0}
/// on `interval`. Every image f^j(I), j < k, must stay inside [r, 1 - r];
/// otherwise a HypothesisError names the first offending step.
template <LiftFamily F>
DistortionReport distortion_constant(const F& family, std::span<const double> params, const Arc& interval, int k,
                                     double r, int grid = 2001) {
    if (k < 0 || static_cast<int>(params.size()) < k || grid < 2 || !(r >= 0.0 && r < 0.5)) {
        throw ParameterError("distortion_constant: need k >= 0 parameters, grid >= 2 and r in [0, 1/2)");
    }
    double a = interval.start().value();
    double b = a + interval.length();
    for (int j = 0; j < k; ++j) {
        if (a < r || b > 1.0 - r) {
            throw HypothesisError("image of the interval leaves [r, 1 - r] at step " + std::to_string(j), j);
        }
        double t = params[j];
        double fa = family.lift(a, t);
        double fb = family.lift(b, t);
        double shift = std::floor(fa);
        a = fa - shift;
        b = fb - shift;
    }
    double max_p = -INFINITY;
    double min_p = INFINITY;
    double x0 = interval.start().value();
    for (int m = 0; m < grid; ++m) {
        double x = x0 + interval.length() * m / (grid - 1);
        double log_p = 0.0;
        for (int j = 0; j < k; ++j) {
            log_p += std::log(family.derivative(x, params[j]));
            x = wrap_unit(family.lift(x, params[j]));
        }
        max_p = std::max(max_p, log_p);
        min_p = std::min(min_p, log_p);
    }
    return {interval, k, k == 0 ? 1.0 : std::exp(max_p - min_p)};
}

struct GapReport {
    double sep_radius;  ///< delta_0: minimum separation, also the excluded radius around 0
    double rho0;
    double beta;        ///< min of d(f_t x, f_t y) - d(x, y) over the constraint grid
};

/// Expansion gap over the grid of (t, x, y) with d(x, y) in [sep_radius, rho0]
/// and y outside B(0, sep_radius).
template <LiftFamily F>
GapReport expansion_gap(const F& family, std::span<const double> params, double sep_radius, double rho0,
                        int grid = 1000) {
    if (!(sep_radius > 0.0 && sep_radius < rho0 && rho0 <= 0.25)) {
        throw ParameterError("expansion_gap requires 0 < delta0 < rho0 <= 1/4");
    }
    if (params.empty() || grid < 2) {
        throw ParameterError("expansion_gap needs at least one parameter and grid >= 2");
    }
    double beta = INFINITY;
    for (double t : params) {
        for (int i = 0; i < grid; ++i) {
            double x = static_cast<double>(i) / grid;
            double fx = wrap_unit(family.lift(x, t));
            for (int m = 0; m <= grid; ++m) {
                double d = sep_radius + (rho0 - sep_radius) * m / grid;
                for (double sign : {1.0, -1.0}) {
                    double y = wrap_unit(x + sign * d);
                    if (circle_distance(y, 0.0) < sep_radius) {
                        continue;
                    }
                    double fy = wrap_unit(family.lift(y, t));
                    beta = std::min(beta, circle_distance(fx, fy) - circle_distance(x, y));
                }
            }
        }
    }
    if (!std::isfinite(beta)) {
        throw ParameterError("expansion_gap: empty constraint set");
    }
    return {sep_radius, rho0, beta};
}

namespace detail {

// Diameter of the union of probe cells {[p/P, (p+1)/P)} for sorted indices.
inline double probe_set_diameter(std::span<const std::uint32_t> idx, std::uint32_t probes) {
    const double cell = 1.0 / probes;
    std::uint64_t max_gap = static_cast<std::uint64_t>(idx.front()) + probes - idx.back();
    for (std::size_t i = 1; i < idx.size(); ++i) {
        max_gap = std::max<std::uint64_t>(max_gap, idx[i] - idx[i - 1]);
    }
    double cover = static_cast<double>(probes - max_gap + 1) * cell;
    if (cover <= 0.5) {
        return cover;
    }
    double best = 0.0;
    for (std::uint32_t p : idx) {
        double antipode = std::fmod(p + 0.5 * probes, static_cast<double>(probes));
        auto it = std::lower_bound(idx.begin(), idx.end(), static_cast<std::uint32_t>(antipode));
        for (auto cand : {it == idx.end() ? idx.front() : *it, it == idx.begin() ? idx.back() : *(it - 1)}) {
            double d = circle_distance(p * cell, cand * cell) + cell;
            best = std::max(best, std::min(0.5, d));
        }
    }
    return best;
}

}  // namespace detail

/// Largest atom diameter of the partition xi v T_w^-1 xi v ... v (T_w^n)^-1 xi
/// for xi = k equal arcs, resolved on a grid of `probes` probe cells. The
/// parameter sequence w is drawn from stream 0 of SeedPolicy{omega_seed}.
template <StepSystem S>
double partition_diameter(const S& system, std::uint64_t omega_seed, int k_cells, int n,
                          std::uint32_t probes = 1U << 20) {
    if (k_cells < 1 || n < 0 || n > 24 || probes < 2) {
        throw ParameterError("partition_diameter: k_cells >= 1, 0 <= n <= 24, probes >= 2 required");
    }
    if ((n + 1) * std::log2(static_cast<double>(k_cells)) > 63.0) {
        throw ParameterError("partition_diameter: itinerary code exceeds 64 bits");
    }
    Xoshiro256 rng = SeedPolicy{omega_seed}.stream(0);
    std::vector<double> omega(n);
    for (double& t : omega) {
        t = system.draw(rng);
    }
    std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed(probes);
    parallel_for(probes, [&](std::size_t m) {
        double x = (m + 0.5) / probes;
        std::uint64_t code = static_cast<std::uint64_t>(detail::symbol_of(x, k_cells));
        for (int j = 0; j < n; ++j) {
            x = system.step(x, omega[j]);
            code = code * static_cast<std::uint64_t>(k_cells) + static_cast<std::uint64_t>(detail::symbol_of(x, k_cells));
        }
        keyed[m] = {code, static_cast<std::uint32_t>(m)};
    });
    std::sort(keyed.begin(), keyed.end());
    double diameter = 0.0;
    std::vector<std::uint32_t> members;
    for (std::size_t i = 0; i < keyed.size();) {
        std::size_t j = i;
        members.clear();
        while (j < keyed.size() && keyed[j].first == keyed[i].first) {
            members.push_back(keyed[j].second);
            ++j;
        }
        diameter = std::max(diameter, detail::probe_set_diameter(members, probes));
        i = j;
    }
    return diameter;
}

}  // namespace zeronoise
