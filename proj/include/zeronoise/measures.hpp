#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "zeronoise/circle.hpp"
#include "zeronoise/error.hpp"
#include "zeronoise/transfer.hpp"

namespace zeronoise {

/// Sample cloud on the circle, stored either as raw points or as counts on
/// the standard cells (mass spread uniformly inside each cell, as for
/// GridMeasure).
class EmpiricalMeasure {
public:
    static EmpiricalMeasure from_samples(std::vector<double> samples) {
        if (samples.empty()) {
            throw InputError("empirical measure needs at least one sample");
        }
        for (double& x : samples) {
            x = wrap_unit(x);
        }
        EmpiricalMeasure m;
        m.samples_ = std::move(samples);
        return m;
    }

    static EmpiricalMeasure from_counts(std::vector<std::uint64_t> counts) {
        std::uint64_t total = 0;
        for (auto c : counts) {
            total += c;
        }
        if (total == 0) {
            throw InputError("empirical histogram needs at least one sample");
        }
        EmpiricalMeasure m;
        m.counts_ = std::move(counts);
        m.histogram_ = true;
        return m;
    }

    bool is_histogram() const noexcept { return histogram_; }
    std::span<const double> samples() const noexcept { return samples_; }
    std::span<const std::uint64_t> counts() const noexcept { return counts_; }

    std::uint64_t size() const noexcept {
        if (!histogram_) {
            return samples_.size();
        }
        std::uint64_t total = 0;
        for (auto c : counts_) {
            total += c;
        }
        return total;
    }

private:
    std::vector<double> samples_;
    std::vector<std::uint64_t> counts_;
    bool histogram_ = false;
};

/// Normalized histogram of the samples on n_cells standard cells.
inline GridMeasure grid_from_samples(const EmpiricalMeasure& m, int n_cells) {
    if (n_cells < 1) {
        throw InputError("grid_from_samples needs at least one cell");
    }
    std::vector<double> w(n_cells, 0.0);
    if (m.is_histogram()) {
        if (static_cast<int>(m.counts().size()) != n_cells) {
            throw InputError("histogram resolution differs from the requested grid");
        }
        for (int i = 0; i < n_cells; ++i) {
            w[i] = static_cast<double>(m.counts()[i]);
        }
    } else {
        for (double x : m.samples()) {
            int cell = std::min(n_cells - 1, static_cast<int>(x * n_cells));
            w[cell] += 1.0;
        }
    }
    return GridMeasure::normalized(std::move(w));
}

struct MixtureEstimate {
    double t_weight;  ///< weight of the Dirac mass at 0
    double distance;  ///< W1 to t delta_0 + (1 - t) mu_SRB
};

namespace detail {

// A measure on [0,1) as atoms at breakpoints plus a constant density on each
// segment [x_k, x_{k+1}). x.front() == 0 and x.back() == 1.
struct Profile {
    std::vector<double> x;
    std::vector<double> atom;     // size x.size() - 1
    std::vector<double> density;  // size x.size() - 1
};

inline Profile profile_of(const GridMeasure& m) {
    const int n = m.n_cells();
    Profile p;
    p.x.resize(n + 1);
    for (int i = 0; i <= n; ++i) {
        p.x[i] = static_cast<double>(i) / n;
    }
    p.atom.assign(n, 0.0);
    p.density.resize(n);
    for (int i = 0; i < n; ++i) {
        p.density[i] = m.density(i);
    }
    return p;
}

inline Profile profile_of(const EmpiricalMeasure& m) {
    if (m.is_histogram()) {
        std::vector<double> w(m.counts().begin(), m.counts().end());
        return profile_of(GridMeasure::normalized(std::move(w)));
    }
    std::vector<double> s(m.samples().begin(), m.samples().end());
    std::sort(s.begin(), s.end());
    const double unit = 1.0 / static_cast<double>(s.size());
    Profile p;
    p.x.push_back(0.0);
    p.atom.push_back(0.0);
    for (double v : s) {
        if (v == p.x.back()) {
            p.atom.back() += unit;
        } else {
            p.x.push_back(v);
            p.atom.push_back(unit);
        }
    }
    p.x.push_back(1.0);
    p.density.assign(p.atom.size(), 0.0);
    return p;
}

// Linear piece of F_mu - F_nu on a segment of the given length.
struct Piece {
    double length;
    double d0;
    double d1;
};

inline std::vector<Piece> cdf_difference(const Profile& a, const Profile& b) {
    std::vector<Piece> pieces;
    pieces.reserve(a.x.size() + b.x.size());
    std::size_t ia = 0;
    std::size_t ib = 0;
    double pos = 0.0;
    double d = 0.0;
    while (pos < 1.0) {
        if (ia + 1 < a.x.size() && a.x[ia] == pos) {
            d += a.atom[ia];
        }
        if (ib + 1 < b.x.size() && b.x[ib] == pos) {
            d -= b.atom[ib];
        }
        double next = std::min(a.x[ia + 1], b.x[ib + 1]);
        double slope = a.density[ia] - b.density[ib];
        double len = next - pos;
        double d_end = d + slope * len;
        pieces.push_back({len, d, d_end});
        d = d_end;
        pos = next;
        if (a.x[ia + 1] == next) {
            ++ia;
        }
        if (b.x[ib + 1] == next) {
            ++ib;
        }
    }
    return pieces;
}

// Lebesgue measure of {D < c} minus that of {D > c}.
inline double median_balance(std::span<const Piece> pieces, double c) {
    double below = 0.0;
    double above = 0.0;
    for (const Piece& p : pieces) {
        if (p.d0 == p.d1) {
            below += p.d0 < c ? p.length : 0.0;
            above += p.d0 > c ? p.length : 0.0;
            continue;
        }
        double lo = std::min(p.d0, p.d1);
        double hi = std::max(p.d0, p.d1);
        double frac = std::clamp((c - lo) / (hi - lo), 0.0, 1.0);
        below += p.length * frac;
        above += p.length * (1.0 - frac);
    }
    return below - above;
}

inline double abs_integral(std::span<const Piece> pieces, double c) {
    double total = 0.0;
    for (const Piece& p : pieces) {
        double a = p.d0 - c;
        double b = p.d1 - c;
        if ((a >= 0.0 && b >= 0.0) || (a <= 0.0 && b <= 0.0)) {
            total += p.length * std::fabs(0.5 * (a + b));
        } else {
            total += p.length * 0.5 * (a * a + b * b) / (std::fabs(a) + std::fabs(b));
        }
    }
    return total;
}

// min_c int |D - c| dx, attained at the Lebesgue median of D.
inline double circle_w1(const Profile& a, const Profile& b) {
    std::vector<Piece> pieces = cdf_difference(a, b);
    double lo = INFINITY;
    double hi = -INFINITY;
    for (const Piece& p : pieces) {
        lo = std::min({lo, p.d0, p.d1});
        hi = std::max({hi, p.d0, p.d1});
    }
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        (median_balance(pieces, mid) < 0.0 ? lo : hi) = mid;
    }
    double c = 0.5 * (lo + hi);
    return std::min({abs_integral(pieces, c), abs_integral(pieces, lo), abs_integral(pieces, hi)});
}

}  // namespace detail

/// Wasserstein-1 distance on the circle, min_c int_0^1 |F_mu - F_nu - c| dx,
/// computed exactly for grid densities and sample clouds (any combination).
template <class A, class B>
double w1_circle(const A& mu, const B& nu) {
    return detail::circle_w1(detail::profile_of(mu), detail::profile_of(nu));
}

/// Total variation (1/2) sum |mu_i - nu_i| on a common grid.
inline double tv_grid(const GridMeasure& mu, const GridMeasure& nu) {
    if (mu.n_cells() != nu.n_cells()) {
        throw InputError("tv_grid: dimension mismatch");
    }
    double s = 0.0;
    for (int i = 0; i < mu.n_cells(); ++i) {
        s += std::fabs(mu[i] - nu[i]);
    }
    return 0.5 * s;
}

namespace detail {

inline void require_delta(double delta) {
    if (!(delta > 0.0 && delta <= 0.5)) {
        throw ParameterError("mass_near_zero requires 0 < delta <= 1/2");
    }
}

}  // namespace detail

/// mu(B(0, delta)) for the arc [1 - delta, 1) u [0, delta); partially covered
/// cells contribute proportionally.
inline double mass_near_zero(const GridMeasure& mu, double delta = 0.05) {
    detail::require_delta(delta);
    const int n = mu.n_cells();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        double a = static_cast<double>(i) / n;
        double b = static_cast<double>(i + 1) / n;
        double covered = std::max(0.0, std::min(b, delta) - a) + std::max(0.0, b - std::max(a, 1.0 - delta));
        total += mu[i] * std::min(1.0, covered * n);
    }
    return std::min(1.0, total);
}

inline double mass_near_zero(const EmpiricalMeasure& mu, double delta = 0.05) {
    detail::require_delta(delta);
    if (mu.is_histogram()) {
        return mass_near_zero(grid_from_samples(mu, static_cast<int>(mu.counts().size())), delta);
    }
    std::uint64_t inside = 0;
    for (double x : mu.samples()) {
        inside += (x < delta || x >= 1.0 - delta) ? 1 : 0;
    }
    return static_cast<double>(inside) / static_cast<double>(mu.samples().size());
}

/// The exact point mass at 0.
inline EmpiricalMeasure dirac_zero() { return EmpiricalMeasure::from_samples({0.0}); }

/// t delta_0 + (1 - t) mu_srb with delta_0 the atom on cell 0 of the same grid.
inline GridMeasure dirac_mixture(const GridMeasure& mu_srb, double t) {
    std::vector<double> w(mu_srb.weights().begin(), mu_srb.weights().end());
    for (double& x : w) {
        x *= 1.0 - t;
    }
    w[0] += t;
    return GridMeasure::normalized(std::move(w));
}

/// Projection onto E = { t delta_0 + (1 - t) mu_SRB }: uniform scan over
/// t_grid values of t, then golden-section refinement between the neighbours
/// of the best scan point (the distance is convex in t).
template <class Measure>
MixtureEstimate distance_to_E(const Measure& mu, const GridMeasure& mu_srb, int t_grid = 101) {
    if (t_grid < 11) {
        throw ParameterError("distance_to_E requires t_grid >= 11");
    }
    const detail::Profile target = detail::profile_of(mu);
    auto dist = [&](double t) { return detail::circle_w1(target, detail::profile_of(dirac_mixture(mu_srb, t))); };
    MixtureEstimate best{0.0, INFINITY};
    int best_k = 0;
    for (int k = 0; k < t_grid; ++k) {
        double t = static_cast<double>(k) / (t_grid - 1);
        double d = dist(t);
        if (d < best.distance) {
            best = {t, d};
            best_k = k;
        }
    }
    double a = static_cast<double>(std::max(0, best_k - 1)) / (t_grid - 1);
    double b = static_cast<double>(std::min(t_grid - 1, best_k + 1)) / (t_grid - 1);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = dist(c);
    double fd = dist(d);
    for (int it = 0; it < 48; ++it) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = dist(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = dist(d);
        }
    }
    for (auto [t, f] : {std::pair{c, fc}, std::pair{d, fd}}) {
        if (f < best.distance) {
            best = {t, f};
        }
    }
    return best;
}

}  // namespace zeronoise
