#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "zeronoise/measures.hpp"
#include "zeronoise/transfer.hpp"

using namespace zeronoise;

namespace {

double overlap(double a0, double a1, double b0, double b1) { return std::max(0.0, std::min(a1, b1) - std::max(a0, b0)); }

// Midpoint-rule integral over the source cell of the exact kernel mass that
// lands in target cell j (all lifts of the cell are counted).
double brute_force_entry(const RandomSystem& sys, int n, int i, int j, int sub = 20000) {
    const NoiseKernel& k = *sys.kernel();
    double total = 0.0;
    for (int m = 0; m < sub; ++m) {
        double x = (i + (m + 0.5) / sub) / n;
        double mass = 0.0;
        if (sys.mode() == Mode::additive) {
            double c = sys.lift_unchecked(x, 0.0);
            for (int shift = -2; shift <= 3; ++shift) {
                double lo = (j + shift * n) / static_cast<double>(n);
                double hi = (j + 1 + shift * n) / static_cast<double>(n);
                mass += overlap(c + k.lo(), c + k.hi(), lo, hi) / k.width();
            }
        } else {
            const int steps = 2000;
            for (int q = 0; q < steps; ++q) {
                double t = k.lo() + k.width() * (q + 0.5) / steps;
                double y = wrap_unit(sys.lift_unchecked(x, t));
                mass += (std::min(n - 1, static_cast<int>(y * n)) == j) ? 1.0 / steps : 0.0;
            }
        }
        total += mass / sub;
    }
    return total;
}

void expect_stochastic(const UlamMatrix& P) {
    for (int i = 0; i < P.n_cells(); ++i) {
        ASSERT_NEAR(P.row_sum(i), 1.0, 1e-10) << "row " << i;
        for (double w : P.row_weights(i)) {
            ASSERT_GE(w, 0.0);
        }
    }
}

}  // namespace

TEST(GridMeasure, ValidatesWeights) {
    EXPECT_THROW(GridMeasure(std::vector<double>{}), InputError);
    EXPECT_THROW(GridMeasure(std::vector<double>{0.5, 0.6}), InputError);
    EXPECT_THROW(GridMeasure(std::vector<double>{1.5, -0.5}), InputError);
    EXPECT_THROW(GridMeasure::normalized({0.0, 0.0}), InputError);
    GridMeasure g = GridMeasure::normalized({1.0, 3.0});
    EXPECT_DOUBLE_EQ(g[1], 0.75);
    EXPECT_DOUBLE_EQ(g.density(1), 1.5);
    EXPECT_DOUBLE_EQ(g.cell_left(1), 0.5);
}

TEST(UlamMatrix, FromRowsValidates) {
    using E = UlamMatrix::Entry;
    EXPECT_THROW(UlamMatrix::from_rows({{E{0, 0.5}}, {E{1, 1.0}}}), InputError);
    EXPECT_THROW(UlamMatrix::from_rows({{E{2, 1.0}}, {E{1, 1.0}}}), InputError);
    EXPECT_THROW(UlamMatrix::from_rows({{E{0, 1.5}, E{1, -0.5}}, {E{1, 1.0}}}), InputError);
    auto P = UlamMatrix::from_rows({{E{0, 0.25}, E{1, 0.75}}, {E{0, 1.0}}});
    EXPECT_DOUBLE_EQ(P.at(0, 1), 0.75);
    EXPECT_EQ(P.at(1, 1), 0.0);
}

TEST(AssembleDeterministic, DoublingMapHasUniformStationaryVector) {
    auto P = assemble_deterministic(DoublingMap{}, 1024);
    expect_stochastic(P);
    for (int i = 0; i < 1024; ++i) {
        auto cols = P.row_cols(i);
        ASSERT_EQ(cols.size(), 2u);
        EXPECT_EQ(cols[0], (2 * i) % 1024);
        EXPECT_DOUBLE_EQ(P.row_weights(i)[0], 0.5);
    }
    auto st = stationary(P);
    EXPECT_FALSE(st.multiple);
    EXPECT_LE(st.residual, 1e-10);
    EXPECT_LE(tv_grid(st.measure, GridMeasure::uniform(1024)), 1e-12);
    EXPECT_LE(invariance_residual(P, GridMeasure::uniform(1024)), 1e-15);
}

TEST(AssembleDeterministic, EntriesAreExactPreimageLengths) {
    IntermittentMap t(1.0);
    const int n = 16;
    auto P = assemble_deterministic(t, n);
    expect_stochastic(P);
    // On [0, 1/2) the inverse of x + 2x^2 is (-1 + sqrt(1 + 8y)) / 4.
    auto inverse = [](double y) { return (-1.0 + std::sqrt(1.0 + 8.0 * y)) / 4.0; };
    for (int i = 0; i < n / 2; ++i) {
        double a = static_cast<double>(i) / n;
        double b = static_cast<double>(i + 1) / n;
        for (int j = 0; j < n; ++j) {
            double lo = std::max(a, inverse(static_cast<double>(j) / n));
            double hi = std::min(b, inverse(static_cast<double>(j + 1) / n));
            double expected = std::max(0.0, hi - lo) * n;
            EXPECT_NEAR(P.at(i, j), expected, 1e-12) << i << " " << j;
        }
    }
}

TEST(AssembleDeterministic, SrbDensityForSmallAlpha) {
    auto P = assemble_deterministic(IntermittentMap(0.5), 4096);
    auto st = stationary(P);
    EXPECT_FALSE(st.multiple);
    EXPECT_LE(invariance_residual(P, st.measure), 1e-8);
    for (int i = 0; i < 4096; ++i) {
        ASSERT_GT(st.measure[i], 0.0);
    }
    for (int i = 0; i + 1 < 4096 / 10; ++i) {
        EXPECT_GE(st.measure[i], st.measure[i + 1]) << i;
    }
}

TEST(AssembleDeterministic, StrongTangencyConcentratesAtZeroUnderRefinement) {
    double previous = 0.0;
    for (int n : {64, 256, 1024}) {
        auto st = stationary(assemble_deterministic(IntermittentMap(1.5), n), 1e-9, 10'000'000);
        double mass = mass_near_zero(st.measure, 0.05);
        EXPECT_GT(mass, previous) << n;
        previous = mass;
    }
}

TEST(AssembleAnnealed, AdditiveRowsConvergeToBruteForce) {
    const int n = 32;
    auto sys = RandomSystem::additive(IntermittentMap(1.5), uniform_kernel(0.04));
    auto coarse = assemble_annealed(sys, n, 5);
    auto fine = assemble_annealed(sys, n, 64);
    expect_stochastic(coarse);
    expect_stochastic(fine);
    double worst_coarse = 0.0;
    double worst_fine = 0.0;
    for (int i : {0, 5, 15, 16, 31}) {
        for (int j = 0; j < n; ++j) {
            double exact = brute_force_entry(sys, n, i, j);
            worst_coarse = std::max(worst_coarse, std::fabs(coarse.at(i, j) - exact));
            worst_fine = std::max(worst_fine, std::fabs(fine.at(i, j) - exact));
        }
    }
    EXPECT_LE(worst_coarse, 1e-2);
    EXPECT_LE(worst_fine, 1e-4);
    EXPECT_LT(worst_fine, worst_coarse);
}

TEST(AssembleAnnealed, ParametricRowsMatchBruteForce) {
    const int n = 16;
    auto sys = RandomSystem::parametric(0.5, interval_kernel(0.6, 0.9));
    auto P = assemble_annealed(sys, n, 64);
    expect_stochastic(P);
    for (int i : {1, 7, 12}) {
        for (int j = 0; j < n; ++j) {
            EXPECT_NEAR(P.at(i, j), brute_force_entry(sys, n, i, j, 2000), 2e-3) << i << " " << j;
        }
    }
}

TEST(AssembleAnnealed, WindowNarrowerThanACellSplitsByOverlap) {
    // Doubling map: T(x) = 2x, so with eps = 1/(4N) the window around each image
    // is half a cell and the row is the cell-average overlap.
    const int n = 64;
    const double eps = 0.25 / n;
    auto sys = RandomSystem::additive(DoublingMap{}, uniform_kernel(eps));
    auto P = assemble_annealed(sys, n, 64);
    expect_stochastic(P);
    for (int i = 0; i < n; ++i) {
        int count = 0;
        for (double w : P.row_weights(i)) {
            count += w > 0.0 ? 1 : 0;
        }
        EXPECT_LE(count, 4);
        int j = (2 * i) % n;
        // The image 2x sweeps [2i/N, (2i+2)/N) with density N/2; the mass leaking
        // into the cell below integrates the overlap fraction to eps N / 8.
        EXPECT_NEAR(P.at(i, (j + n - 1) % n), eps * n / 8.0, 5e-4);
        EXPECT_NEAR(P.at(i, (j + 2) % n), eps * n / 8.0, 5e-4);
    }
}

TEST(AssembleAnnealed, TinyNoiseKeepsRowsNarrow) {
    const int n = 512;
    auto sys = RandomSystem::additive(IntermittentMap(1.5), uniform_kernel(0.1 / n));
    auto P = assemble_annealed(sys, n, 5);
    for (int i = 0; i < 8; ++i) {
        int count = 0;
        for (double w : P.row_weights(i)) {
            count += w > 0.0 ? 1 : 0;
        }
        EXPECT_LE(count, 3) << i;
    }
}

TEST(AssembleAnnealed, RejectsTooFewCells) {
    auto sys = RandomSystem::additive(IntermittentMap(1.5), uniform_kernel(0.1));
    EXPECT_THROW(assemble_annealed(sys, 4), ParameterError);
}

TEST(Stationary, RefinementIsConsistent) {
    auto sys = RandomSystem::additive(IntermittentMap(0.5), uniform_kernel(0.01));
    auto coarse = stationary(assemble_annealed(sys, 1024)).measure;
    auto fine = stationary(assemble_annealed(sys, 2048)).measure;
    EXPECT_LE(w1_circle(coarse, fine), 4.0 / 1024);
}

TEST(Stationary, UniqueForAdditiveNoise) {
    auto sys = RandomSystem::additive(IntermittentMap(0.5), uniform_kernel(0.01));
    auto P = assemble_annealed(sys, 4096);
    auto st = stationary(P);
    EXPECT_FALSE(st.multiple);
    EXPECT_LE(st.start_spread, 1e-9);
    EXPECT_LE(invariance_residual(P, st.measure), 1e-10);
}

TEST(Stationary, TwoDisjointCyclesRaiseMultiplicity) {
    using E = UlamMatrix::Entry;
    auto P = UlamMatrix::from_rows({{E{1, 1.0}}, {E{0, 1.0}}, {E{3, 1.0}}, {E{2, 1.0}}});
    auto st = stationary(P);
    EXPECT_TRUE(st.multiple);
    EXPECT_LE(st.residual, 1e-10);
}

TEST(Stationary, IterationCapCarriesResidual) {
    auto P = assemble_deterministic(IntermittentMap(0.5), 256);
    try {
        stationary(P, 1e-14, 3);
        FAIL() << "expected non-convergence";
    } catch (const NonConvergenceError& e) {
        EXPECT_GT(e.last_residual(), 1e-14);
    }
    EXPECT_THROW(stationary(P, 0.0), ParameterError);
}

TEST(Push, PointMassGivesTheRow) {
    auto P = assemble_deterministic(IntermittentMap(1.0), 64);
    GridMeasure nu = push(P, GridMeasure::atom(64, 10));
    for (int j = 0; j < 64; ++j) {
        EXPECT_NEAR(nu[j], P.at(10, j), 1e-15);
    }
}

TEST(Push, ConservesMassAndChecksDimensions) {
    auto sys = RandomSystem::additive(IntermittentMap(0.7), uniform_kernel(0.02));
    auto P = assemble_annealed(sys, 128);
    Xoshiro256 rng(5);
    std::vector<double> w(128);
    for (double& x : w) {
        x = rng.uniform();
    }
    GridMeasure mu = GridMeasure::normalized(w);
    double raw = 0.0;
    for (int i = 0; i < 128; ++i) {
        for (std::size_t k = 0; k < P.row_cols(i).size(); ++k) {
            raw += mu[i] * P.row_weights(i)[k];
        }
    }
    EXPECT_NEAR(raw, 1.0, 1e-12);
    GridMeasure nu = push(P, mu);
    double total = 0.0;
    for (double x : nu.weights()) {
        total += x;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_THROW(push(P, GridMeasure::uniform(64)), InputError);
}

TEST(Push, StationaryMeasureIsFixed) {
    auto sys = RandomSystem::additive(IntermittentMap(1.5), uniform_kernel(0.05));
    auto P = assemble_annealed(sys, 512);
    auto st = stationary(P);
    GridMeasure nu = push(P, st.measure);
    EXPECT_LE(tv_grid(nu, st.measure) * 2.0, 1e-10);
}
