#pragma once

#include <cmath>
#include <optional>
#include <variant>
#include <vector>

#include "zeronoise/circle.hpp"
#include "zeronoise/dynamics.hpp"
#include "zeronoise/error.hpp"
#include "zeronoise/rng.hpp"

namespace zeronoise {

/// Absolutely continuous parameter distribution: uniform on [lo, hi].
class NoiseKernel {
public:
    NoiseKernel(double lo, double hi) : lo_(lo), hi_(hi) {
        if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
            throw ParameterError("noise kernel needs finite support with lo < hi");
        }
    }

    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }
    double width() const noexcept { return hi_ - lo_; }
    double center() const noexcept { return 0.5 * (lo_ + hi_); }

    double density(double t) const noexcept { return (t > lo_ && t < hi_) ? 1.0 / width() : 0.0; }

    double cdf(double t) const noexcept {
        if (t <= lo_) {
            return 0.0;
        }
        if (t >= hi_) {
            return 1.0;
        }
        return (t - lo_) / width();
    }

    /// theta([a, b)) for a <= b.
    double mass(double a, double b) const noexcept { return cdf(b) - cdf(a); }

    double quantile(double p) const noexcept { return lo_ + p * width(); }

    bool in_support(double t) const noexcept { return t >= lo_ && t <= hi_; }

    double sample(Xoshiro256& rng) const noexcept { return quantile(rng.uniform()); }

    friend bool operator==(const NoiseKernel&, const NoiseKernel&) = default;

private:
    double lo_;
    double hi_;
};

/// theta_eps = uniform on [-eps, eps].
inline NoiseKernel uniform_kernel(double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw ParameterError("uniform kernel requires eps > 0");
    }
    return NoiseKernel(-eps, eps);
}

/// Uniform kernel on the parameter interval [lo, hi].
inline NoiseKernel interval_kernel(double lo, double hi) {
    if (!(lo < hi)) {
        throw ParameterError("interval kernel requires lo < hi");
    }
    return NoiseKernel(lo, hi);
}

enum class Mode { additive, parametric };

using BaseMap = std::variant<IntermittentMap, DoublingMap>;

/// A parametric family of circle maps together with a noise kernel on its
/// parameters. Additive mode: x -> T(x) + t. Parametric mode: x -> f_t(x).
/// Without a kernel the system is deterministic and every draw is the
/// neutral parameter (0 additive, 1 parametric).
class RandomSystem {
public:
    static RandomSystem additive(BaseMap base, std::optional<NoiseKernel> kernel) {
        if (kernel && (kernel->lo() < -0.5 || kernel->hi() > 0.5)) {
            throw ParameterError("additive noise support must lie in [-1/2, 1/2]");
        }
        return RandomSystem(Mode::additive, std::move(base), kernel);
    }

    static RandomSystem parametric(double alpha, std::optional<NoiseKernel> kernel) {
        if (kernel && (kernel->lo() <= 0.0 || kernel->hi() > 1.0)) {
            throw ParameterError("saddle-node parameter support must lie in (0, 1]");
        }
        return RandomSystem(Mode::parametric, IntermittentMap(alpha), kernel);
    }

    Mode mode() const noexcept { return mode_; }
    const BaseMap& base() const noexcept { return base_; }
    const std::optional<NoiseKernel>& kernel() const noexcept { return kernel_; }
    bool deterministic() const noexcept { return !kernel_.has_value(); }

    /// Tangency order of the underlying family; NaN for the doubling map.
    double alpha() const noexcept {
        if (auto* t = std::get_if<IntermittentMap>(&base_)) {
            return t->alpha();
        }
        return NAN;
    }

    double neutral_draw() const noexcept { return mode_ == Mode::additive ? 0.0 : 1.0; }

    double draw(Xoshiro256& rng) const noexcept { return kernel_ ? kernel_->sample(rng) : neutral_draw(); }

    void check_draw(double draw) const {
        bool ok = kernel_ ? kernel_->in_support(draw) : draw == neutral_draw();
        if (!ok) {
            throw ContractError("draw lies outside the kernel support");
        }
    }

    /// Lifted image of x in [0,1) under the map selected by `draw` (no checks).
    double lift_unchecked(double x, double draw) const noexcept {
        if (mode_ == Mode::parametric) {
            return saddle(draw).lift(x);
        }
        return std::visit([x](const auto& m) { return m.lift(x); }, base_) + draw;
    }

    double derivative_unchecked(double x, double draw) const noexcept {
        if (mode_ == Mode::parametric) {
            return saddle(draw).derivative(x);
        }
        return std::visit([x](const auto& m) { return m.derivative(x); }, base_);
    }

    /// Image and derivative of one step of the random orbit.
    Evaluation step_eval(double x, double draw) const {
        check_draw(draw);
        double y = wrap_unit(x);
        return {wrap_unit(lift_unchecked(y, draw)), derivative_unchecked(y, draw)};
    }

    double step(double x, double draw) const { return step_eval(x, draw).image; }

private:
    RandomSystem(Mode mode, BaseMap base, std::optional<NoiseKernel> kernel)
        : mode_(mode), base_(std::move(base)), kernel_(kernel) {}

    SaddleNodeMap saddle(double t) const noexcept {
        // Support was validated against (0, 1] at construction.
        return SaddleNodeMap(std::get<IntermittentMap>(base_).alpha(), t);
    }

    Mode mode_;
    BaseMap base_;
    std::optional<NoiseKernel> kernel_;
};

struct PointCheck {
    double x;
    double image_radius;          ///< radius of the arc {T_t(x) : t in supp theta}
    bool absolutely_continuous;   ///< t -> T_t(x) pushes theta to an a.c. measure
};

struct NondegeneracyReport {
    double ball_radius = 0.0;  ///< delta_1: minimum image radius over the probes
    bool absolutely_continuous = false;
    std::vector<double> degenerate_points;  ///< probes where the pushforward is singular
};

/// Image-ball radius and absolute continuity of the pushforward at one point.
/// In parametric mode t -> f_t(x) is affine, so the difference quotient over
/// the support is its exact slope.
inline PointCheck nondegeneracy_at(const RandomSystem& system, double x) {
    double y = wrap_unit(x);
    if (!system.kernel()) {
        return {y, 0.0, false};
    }
    const NoiseKernel& k = *system.kernel();
    if (system.mode() == Mode::additive) {
        return {y, 0.5 * k.width(), true};
    }
    double slope = (system.lift_unchecked(y, k.hi()) - system.lift_unchecked(y, k.lo())) / k.width();
    double radius = 0.5 * std::fabs(slope) * k.width();
    return {y, radius, std::fabs(slope) > 1e-12};
}

/// Checks non-degeneracy on the probe grid x_j = j / probes.
inline NondegeneracyReport nondegeneracy_report(const RandomSystem& system, int probes = 4096) {
    if (probes < 1) {
        throw InputError("nondegeneracy_report needs at least one probe");
    }
    NondegeneracyReport report;
    report.ball_radius = INFINITY;
    report.absolutely_continuous = true;
    for (int j = 0; j < probes; ++j) {
        PointCheck c = nondegeneracy_at(system, static_cast<double>(j) / probes);
        report.ball_radius = std::min(report.ball_radius, c.image_radius);
        if (!c.absolutely_continuous) {
            report.absolutely_continuous = false;
            report.degenerate_points.push_back(c.x);
        }
    }
    return report;
}

}  // namespace zeronoise
