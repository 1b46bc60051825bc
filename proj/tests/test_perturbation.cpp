#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "zeronoise/perturbation.hpp"
#include "zeronoise/quadrature.hpp"

using namespace zeronoise;

TEST(UniformKernel, DensityCdfAndMass) {
    NoiseKernel k = uniform_kernel(0.01);
    EXPECT_DOUBLE_EQ(k.cdf(0.0), 0.5);
    EXPECT_DOUBLE_EQ(k.density(0.005), 50.0);
    EXPECT_DOUBLE_EQ(k.density(-0.0099), 50.0);
    EXPECT_EQ(k.density(0.02), 0.0);
    EXPECT_EQ(k.cdf(-0.01), 0.0);
    EXPECT_EQ(k.cdf(0.01), 1.0);
    EXPECT_DOUBLE_EQ(k.mass(-1.0, 1.0), 1.0);
}

TEST(UniformKernel, DensityIntegratesToOne) {
    NoiseKernel k = uniform_kernel(0.2);
    GaussLegendre q(8);
    double total = 0.0;
    const int pieces = 64;
    for (int p = 0; p < pieces; ++p) {
        double a = k.lo() + k.width() * p / pieces;
        double h = k.width() / pieces;
        for (std::size_t i = 0; i < q.nodes.size(); ++i) {
            total += h * q.weights[i] * k.density(a + h * q.nodes[i]);
        }
    }
    EXPECT_NEAR(total, 1.0, 1e-10);
}

TEST(UniformKernel, CdfIsContinuousAndMonotone) {
    NoiseKernel k = uniform_kernel(0.05);
    double prev = 0.0;
    for (int i = -1000; i <= 1000; ++i) {
        double t = i * 1e-4;
        double c = k.cdf(t);
        EXPECT_GE(c, prev);
        EXPECT_LE(c - prev, 1e-4 / k.width() + 1e-15);
        prev = c;
    }
}

TEST(UniformKernel, RejectsNonPositiveEps) {
    EXPECT_THROW(uniform_kernel(0.0), ParameterError);
    EXPECT_THROW(uniform_kernel(-0.1), ParameterError);
}

TEST(IntervalKernel, MidpointAndSupport) {
    NoiseKernel k = interval_kernel(0.9, 0.95);
    EXPECT_NEAR(k.cdf(0.925), 0.5, 1e-14);
    EXPECT_DOUBLE_EQ(k.mass(0.9, 0.95), 1.0);
    Xoshiro256 rng(3);
    for (int i = 0; i < 10'000; ++i) {
        double t = k.sample(rng);
        ASSERT_GE(t, 0.9);
        ASSERT_LE(t, 0.95);
    }
    EXPECT_THROW(interval_kernel(0.5, 0.5), ParameterError);
    EXPECT_THROW(interval_kernel(0.6, 0.5), ParameterError);
}

TEST(NoiseKernel, SamplerMatchesCdf) {
    NoiseKernel k = uniform_kernel(0.3);
    Xoshiro256 rng(12345);
    std::vector<double> xs(100'000);
    for (double& x : xs) {
        x = k.sample(rng);
    }
    std::sort(xs.begin(), xs.end());
    double ks = 0.0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double c = k.cdf(xs[i]);
        ks = std::max({ks, std::fabs(c - i / n), std::fabs(c - (i + 1) / n)});
    }
    EXPECT_LE(ks, 0.01);
}

TEST(RandomSystem, AdditiveStep) {
    auto sys = RandomSystem::additive(IntermittentMap(1.0), uniform_kernel(0.2));
    EXPECT_NEAR(sys.step(0.25, 0.1), 0.475, 1e-15);
    EXPECT_EQ(sys.step(0.25, 0.0), IntermittentMap(1.0)(0.25));
    EXPECT_NEAR(sys.step(0.9, -0.15), wrap_unit(IntermittentMap(1.0)(0.9) - 0.15), 1e-15);
}

TEST(RandomSystem, AdditiveEquivariance) {
    auto sys = RandomSystem::additive(IntermittentMap(0.5), uniform_kernel(0.1));
    for (int i = 0; i < 200; ++i) {
        double x = i / 200.0;
        for (double t : {-0.1, -0.03, 0.07, 0.1}) {
            double lhs = sys.step(x, t);
            double rhs = wrap_unit(sys.step(x, 0.0) + t);
            EXPECT_LT(circle_distance(lhs, rhs), 1e-15);
        }
    }
}

TEST(RandomSystem, StepIsPure) {
    auto sys = RandomSystem::parametric(0.5, interval_kernel(0.9, 0.95));
    for (int i = 0; i < 100; ++i) {
        double x = i / 100.0;
        EXPECT_EQ(sys.step(x, 0.93), sys.step(x, 0.93));
    }
}

TEST(RandomSystem, ParametricAtOneIsTheIntermittentMap) {
    auto sys = RandomSystem::parametric(0.5, interval_kernel(0.5, 1.0));
    IntermittentMap t(0.5);
    for (int i = 0; i < 1000; ++i) {
        double x = i / 1000.0;
        EXPECT_EQ(sys.step(x, 1.0), t(x));
    }
}

TEST(RandomSystem, DrawOutsideSupportViolatesContract) {
    auto sys = RandomSystem::additive(IntermittentMap(1.0), uniform_kernel(0.01));
    EXPECT_THROW(sys.step(0.3, 0.02), ContractError);
    auto det = RandomSystem::additive(IntermittentMap(1.0), std::nullopt);
    EXPECT_THROW(det.step(0.3, 0.001), ContractError);
    EXPECT_NO_THROW(det.step(0.3, 0.0));
}

TEST(RandomSystem, SupportRestrictions) {
    EXPECT_THROW(RandomSystem::additive(IntermittentMap(1.0), interval_kernel(-0.6, 0.1)), ParameterError);
    EXPECT_THROW(RandomSystem::parametric(0.5, interval_kernel(0.0, 0.5)), ParameterError);
    EXPECT_THROW(RandomSystem::parametric(0.5, interval_kernel(0.9, 1.1)), ParameterError);
    EXPECT_NO_THROW(RandomSystem::parametric(0.5, interval_kernel(0.9, 1.0)));
}

TEST(Nondegeneracy, AdditiveBallRadiusIsEps) {
    auto sys = RandomSystem::additive(IntermittentMap(0.5), uniform_kernel(0.01));
    NondegeneracyReport r = nondegeneracy_report(sys);
    EXPECT_NEAR(r.ball_radius, 0.01, 1e-15);
    EXPECT_TRUE(r.absolutely_continuous);
    EXPECT_TRUE(r.degenerate_points.empty());
}

TEST(Nondegeneracy, ParametricIsDegenerateAtZero) {
    auto sys = RandomSystem::parametric(0.5, interval_kernel(0.9, 0.95));
    EXPECT_FALSE(nondegeneracy_at(sys, 0.0).absolutely_continuous);
    EXPECT_EQ(nondegeneracy_at(sys, 0.0).image_radius, 0.0);

    PointCheck c = nondegeneracy_at(sys, 0.3);
    EXPECT_TRUE(c.absolutely_continuous);
    double h = 1e-6;
    double slope = (SaddleNodeMap(0.5, 0.92 + h).lift(0.3) - SaddleNodeMap(0.5, 0.92 - h).lift(0.3)) / (2 * h);
    EXPECT_NEAR(c.image_radius, 0.5 * std::fabs(slope) * 0.05, 1e-9);

    NondegeneracyReport r = nondegeneracy_report(sys);
    EXPECT_FALSE(r.absolutely_continuous);
    ASSERT_FALSE(r.degenerate_points.empty());
    EXPECT_EQ(r.degenerate_points.front(), 0.0);
}
