#pragma once

#include <algorithm>
#include <cmath>

#include "zeronoise/error.hpp"

namespace zeronoise {

/// Reduce a real number to [0, 1). Throws InputError for non-finite input.
inline double wrap_unit(double x) {
    if (!std::isfinite(x)) {
        throw InputError("circle coordinate is not finite");
    }
    double r = x - std::floor(x);
    // floor can round x - floor(x) up to exactly 1 for tiny negative x
    return r >= 1.0 ? 0.0 : r;
}

/// Point of the circle [0,1)/0~1.
class CirclePoint {
public:
    constexpr CirclePoint() = default;
    explicit CirclePoint(double x) : value_(wrap_unit(x)) {}

    constexpr double value() const noexcept { return value_; }

    friend constexpr bool operator==(CirclePoint, CirclePoint) = default;

private:
    double value_ = 0.0;
};

/// Circle distance min(|x-y|, 1-|x-y|) for coordinates already in [0,1).
inline double circle_distance(double x, double y) noexcept {
    double d = std::fabs(x - y);
    d = d - std::floor(d);
    return std::min(d, 1.0 - d);
}

inline double circle_distance(CirclePoint x, CirclePoint y) noexcept {
    return circle_distance(x.value(), y.value());
}

/// Closed arc [start, start + length] traversed counter-clockwise.
/// length == 1 is the full circle, length == 0 a single point.
class Arc {
public:
    Arc() = default;

    Arc(double start, double length) : start_(start), length_(length) {
        if (!std::isfinite(length) || length < 0.0) {
            throw InputError("arc length must be finite and non-negative");
        }
        length_ = std::min(length, 1.0);
        if (length_ >= 1.0) {
            start_ = CirclePoint(0.0);
        }
    }

    static Arc full() { return Arc(0.0, 1.0); }
    static Arc point(double x) { return Arc(x, 0.0); }

    /// Arc from `a` counter-clockwise to `b` (both taken modulo 1).
    static Arc between(double a, double b) {
        double len = wrap_unit(b) - wrap_unit(a);
        if (len < 0.0) {
            len += 1.0;
        }
        return Arc(a, len);
    }

    CirclePoint start() const noexcept { return start_; }
    double length() const noexcept { return length_; }
    bool is_full() const noexcept { return length_ >= 1.0; }

    /// Lifted endpoint start + length (may exceed 1).
    double lifted_end() const noexcept { return start_.value() + length_; }

    bool contains(double x) const {
        if (is_full()) {
            return true;
        }
        double offset = wrap_unit(x) - start_.value();
        if (offset < 0.0) {
            offset += 1.0;
        }
        return offset <= length_;
    }

private:
    CirclePoint start_{};
    double length_ = 0.0;
};

}  // namespace zeronoise
