#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "zeronoise/error.hpp"

namespace zeronoise {

/// Gauss-Legendre rule mapped to [0, 1]; weights sum to 1.
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendre(int order) {
        if (order < 1 || order > 64) {
            throw ParameterError("Gauss-Legendre order must be in [1, 64]");
        }
        nodes.resize(order);
        weights.resize(order);
        for (int i = 0; i < (order + 1) / 2; ++i) {
            double z = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0;
                double p1 = 0.0;
                for (int k = 1; k <= order; ++k) {
                    double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
                }
                dp = order * (z * p0 - p1) / (z * z - 1.0);
                double dz = p0 / dp;
                z -= dz;
                if (std::fabs(dz) < 1e-15) {
                    break;
                }
            }
            double w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = 0.5 * (1.0 - z);
            nodes[order - 1 - i] = 0.5 * (1.0 + z);
            weights[i] = weights[order - 1 - i] = 0.5 * w;
        }
    }

    int order() const noexcept { return static_cast<int>(nodes.size()); }
};

}  // namespace zeronoise
