#pragma once

// Circle maps of degree 2: the intermittent map with an indifferent fixed
// point at 0, the saddle-node family unfolding it, and the doubling map used
// as an exactly solvable reference. Every map is described by a continuous,
// increasing lift on [0, 1] with lift(0) = 0 and lift(1) = 2; images on the
// circle are the lift reduced modulo 1.

#include <cmath>
#include <concepts>
#include <optional>
#include <vector>

#include "zeronoise/circle.hpp"
#include "zeronoise/error.hpp"

namespace zeronoise {

struct Evaluation {
    double image;       ///< in [0, 1)
    double derivative;  ///< of the circle map at the evaluated point
};

template <class M>
concept CircleMap = requires(const M& m, double x) {
    { m.lift(x) } -> std::convertible_to<double>;
    { m.derivative(x) } -> std::convertible_to<double>;
};

/// Lift extended to all of R by lift(x + k) = lift(x) + 2k.
template <CircleMap M>
double lift_on_line(const M& map, double x) {
    double k = std::floor(x);
    return map.lift(x - k) + 2.0 * k;
}

template <CircleMap M>
Evaluation evaluate(const M& map, double x) {
    double y = wrap_unit(x);
    return {wrap_unit(map.lift(y)), map.derivative(y)};
}

namespace detail {

inline void require_alpha(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw ParameterError("tangency order alpha must be positive and finite");
    }
}

// x * (2x)^alpha, exact at x = 1/2 for every alpha.
inline double tangency_term(double x, double alpha) { return x * std::pow(2.0 * x, alpha); }

}  // namespace detail

/// T(x) = x + 2^a x^(1+a) on [0,1/2), x - 2^a (1-x)^(1+a) on [1/2,1).
class IntermittentMap {
public:
    explicit IntermittentMap(double alpha) : alpha_(alpha) { detail::require_alpha(alpha); }

    double alpha() const noexcept { return alpha_; }

    double lift(double x) const noexcept {
        if (x < 0.5) {
            return x + detail::tangency_term(x, alpha_);
        }
        return x - detail::tangency_term(1.0 - x, alpha_) + 1.0;
    }

    double derivative(double x) const noexcept {
        double r = x < 0.5 ? 2.0 * x : 2.0 * (1.0 - x);
        return 1.0 + (1.0 + alpha_) * std::pow(r, alpha_);
    }

    double operator()(double x) const { return evaluate(*this, x).image; }

private:
    double alpha_;
};

/// f_t(x) = t x + 2^a (2-t) x^(1+a) on [0,1/2), mirrored on [1/2,1).
/// f_1 coincides with IntermittentMap bit for bit.
class SaddleNodeMap {
public:
    SaddleNodeMap(double alpha, double t) : alpha_(alpha), t_(t) {
        detail::require_alpha(alpha);
        if (!(t > 0.0 && t <= 1.0)) {
            throw ParameterError("saddle-node parameter t must lie in (0, 1]");
        }
    }

    double alpha() const noexcept { return alpha_; }
    double t() const noexcept { return t_; }

    double lift(double x) const noexcept {
        if (x < 0.5) {
            return t_ * x + (2.0 - t_) * detail::tangency_term(x, alpha_);
        }
        double y = 1.0 - x;
        return x + (1.0 - t_) * y - (2.0 - t_) * detail::tangency_term(y, alpha_) + 1.0;
    }

    double derivative(double x) const noexcept {
        double r = x < 0.5 ? 2.0 * x : 2.0 * (1.0 - x);
        return t_ + (2.0 - t_) * (1.0 + alpha_) * std::pow(r, alpha_);
    }

    /// d f_t(x) / dt, which does not depend on t: x (1 - (2x)^a) on the first
    /// branch and its mirror with opposite sign on the second.
    double parameter_derivative(double x) const noexcept {
        if (x < 0.5) {
            return x - detail::tangency_term(x, alpha_);
        }
        double y = 1.0 - x;
        return -(y - detail::tangency_term(y, alpha_));
    }

    double operator()(double x) const { return evaluate(*this, x).image; }

private:
    double alpha_;
    double t_;
};

/// x -> 2x mod 1.
class DoublingMap {
public:
    double lift(double x) const noexcept { return 2.0 * x; }
    double derivative(double) const noexcept { return 2.0; }
    double operator()(double x) const { return evaluate(*this, x).image; }
};

/// Repelling fixed point of f_s in (0, 1/2): p_s = ((1-s)/(2-s))^(1/a) / 2.
inline double fixed_source(double alpha, double s) {
    detail::require_alpha(alpha);
    if (!(s > 0.0 && s < 1.0)) {
        throw ParameterError("fixed_source requires s in (0, 1)");
    }
    return 0.5 * std::pow((1.0 - s) / (2.0 - s), 1.0 / alpha);
}

/// Parameter band [s, u] on which every f_t is uniformly expanding over
/// [p_u, p_s]; the repeller belt is [p_u, 1 - p_u] and (1 - p_u, p_u) funnels into 0.
struct ExpansionBand {
    double alpha;
    double s;
    double u;
    double p_s;
    double p_u;
    double min_derivative;  ///< certified minimum of f_t' over [s,u] x [p_u,p_s]
};

namespace detail {

inline constexpr int kBandGrid = 2048;
inline constexpr double kBandMargin = 1e-6;

// Minimum of f_t'(x) over a kBandGrid^2 grid of [s,u] x [p_u,p_s] plus the
// corners and p_u. f_t' is increasing in x on [0,1/2) and affine in t, so the
// corners certify the grid.
inline double band_min_derivative(double alpha, double s, double u) {
    double p_s = fixed_source(alpha, s);
    double p_u = fixed_source(alpha, u);
    double best = INFINITY;
    auto probe = [&](double t, double x) {
        double d = SaddleNodeMap(alpha, t).derivative(x);
        best = d < best ? d : best;
    };
    for (int i = 0; i <= kBandGrid; ++i) {
        double t = s + (u - s) * i / kBandGrid;
        probe(t, p_u);
        probe(t, p_s);
        for (int j = 1; j < kBandGrid; ++j) {
            probe(t, p_u + (p_s - p_u) * j / kBandGrid);
        }
    }
    return best;
}

// Analytic minimum candidates: t in {s, u} at x = p_u (and p_s).
inline double band_corner_min(double alpha, double s, double u) {
    double p_s = fixed_source(alpha, s);
    double p_u = fixed_source(alpha, u);
    double best = INFINITY;
    for (double t : {s, u}) {
        for (double x : {p_u, p_s}) {
            double d = SaddleNodeMap(alpha, t).derivative(x);
            best = d < best ? d : best;
        }
    }
    return best;
}

}  // namespace detail

/// Constructive choice of u in (s, 1): bisect for the largest u whose band is
/// certified expanding with margin 1e-6, then return the midpoint of [s, u_max].
inline ExpansionBand choose_expansion_band(double alpha, double s) {
    detail::require_alpha(alpha);
    if (!(s > 0.0 && s < 1.0)) {
        throw ParameterError("choose_expansion_band requires s in (0, 1)");
    }
    auto certified = [&](double u) {
        return detail::band_corner_min(alpha, s, u) > 1.0 + detail::kBandMargin;
    };
    double lo = s + 1e-9;
    if (lo >= 1.0 || !certified(lo)) {
        throw InfeasibleError("no expanding band [s, u] found above s + 1e-9");
    }
    double hi = 1.0 - 1e-12;
    if (!certified(hi)) {
        for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
            double mid = 0.5 * (lo + hi);
            (certified(mid) ? lo : hi) = mid;
        }
    } else {
        lo = hi;
    }
    double u = s + 0.5 * (lo - s);
    if (u <= s) {
        u = lo;
    }
    ExpansionBand band{alpha, s, u, fixed_source(alpha, s), fixed_source(alpha, u), 0.0};
    band.min_derivative = detail::band_min_derivative(alpha, s, u);
    if (!(band.min_derivative > 1.0 + detail::kBandMargin)) {
        throw InfeasibleError("expansion band failed re-verification");
    }
    return band;
}

/// Image of an arc under a degree-2 monotone map, computed in the lift.
template <CircleMap M>
Arc interval_image(const M& map, const Arc& arc) {
    if (arc.is_full()) {
        return Arc::full();
    }
    double a = arc.start().value();
    double lifted_a = map.lift(a);
    double lifted_b = lift_on_line(map, a + arc.length());
    double length = lifted_b - lifted_a;
    if (length >= 1.0) {
        return Arc::full();
    }
    return Arc(wrap_unit(lifted_a), length < 0.0 ? 0.0 : length);
}

struct CoveringResult {
    std::optional<int> steps;     ///< empty when not covered within n_max
    std::vector<double> lengths;  ///< lengths[n] = length of the n-th image
};

/// Smallest n <= n_max with T^n(arc) equal to the whole circle.
template <CircleMap M>
CoveringResult covering_time(const M& map, const Arc& arc, int n_max) {
    CoveringResult result;
    result.lengths.push_back(arc.length());
    if (arc.is_full()) {
        result.steps = 0;
        return result;
    }
    if (arc.length() <= 0.0) {
        return result;
    }
    Arc current = arc;
    for (int n = 1; n <= n_max; ++n) {
        current = interval_image(map, current);
        result.lengths.push_back(current.length());
        if (current.is_full()) {
            result.steps = n;
            return result;
        }
    }
    return result;
}

}  // namespace zeronoise
