#pragma once

// Ulam discretization of the annealed transfer operator on the cells
// I_j = [j/N, (j+1)/N). The point 0 is always a cell boundary and cell 0 is
// the canonical near-zero cell.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "zeronoise/dynamics.hpp"
#include "zeronoise/error.hpp"
#include "zeronoise/parallel.hpp"
#include "zeronoise/perturbation.hpp"
#include "zeronoise/quadrature.hpp"
#include "zeronoise/rng.hpp"

namespace zeronoise {

/// Probability measure on the N standard cells, uniform inside each cell.
class GridMeasure {
public:
    /// Validates non-negativity and total mass 1 (within 1e-9), then
    /// renormalizes so the weights sum to 1 within rounding.
    explicit GridMeasure(std::vector<double> weights) : weights_(std::move(weights)) {
        if (weights_.empty()) {
            throw InputError("grid measure needs at least one cell");
        }
        double total = 0.0;
        for (double w : weights_) {
            if (!std::isfinite(w) || w < 0.0) {
                throw InputError("grid measure weights must be finite and non-negative");
            }
            total += w;
        }
        if (std::fabs(total - 1.0) > 1e-9) {
            throw InputError("grid measure weights must sum to 1");
        }
        for (double& w : weights_) {
            w /= total;
        }
    }

    /// Normalizes any non-negative vector with positive mass.
    static GridMeasure normalized(std::vector<double> weights) {
        double total = 0.0;
        for (double w : weights) {
            total += w;
        }
        if (!(total > 0.0) || !std::isfinite(total)) {
            throw InputError("cannot normalize a vector without positive finite mass");
        }
        for (double& w : weights) {
            w /= total;
        }
        return GridMeasure(std::move(weights));
    }

    static GridMeasure uniform(int n_cells) {
        require_cells(n_cells);
        return GridMeasure(std::vector<double>(n_cells, 1.0 / n_cells));
    }

    /// Point mass on one cell; atom(N, 0) is the grid representative of the Dirac mass at 0.
    static GridMeasure atom(int n_cells, int cell = 0) {
        require_cells(n_cells);
        if (cell < 0 || cell >= n_cells) {
            throw InputError("atom cell out of range");
        }
        std::vector<double> w(n_cells, 0.0);
        w[cell] = 1.0;
        return GridMeasure(std::move(w));
    }

    int n_cells() const noexcept { return static_cast<int>(weights_.size()); }
    std::span<const double> weights() const noexcept { return weights_; }
    double operator[](int i) const { return weights_[i]; }
    double cell_left(int i) const noexcept { return static_cast<double>(i) / n_cells(); }
    double density(int i) const noexcept { return weights_[i] * n_cells(); }

private:
    static void require_cells(int n_cells) {
        if (n_cells < 1) {
            throw InputError("grid measure needs at least one cell");
        }
    }

    std::vector<double> weights_;
};

/// Row-stochastic sparse matrix in CSR form.
class UlamMatrix {
public:
    struct Entry {
        int col;
        double weight;
    };

    /// Builds from per-row entry lists; rows must be stochastic within 1e-10.
    static UlamMatrix from_rows(const std::vector<std::vector<Entry>>& rows) {
        UlamMatrix m;
        m.n_ = static_cast<int>(rows.size());
        m.row_ptr_.assign(1, 0);
        for (const auto& row : rows) {
            for (const Entry& e : row) {
                if (e.col < 0 || e.col >= m.n_) {
                    throw InputError("Ulam matrix column out of range");
                }
                if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
                    throw InputError("Ulam matrix entries must be finite and non-negative");
                }
                m.cols_.push_back(e.col);
                m.vals_.push_back(e.weight);
            }
            m.row_ptr_.push_back(m.cols_.size());
        }
        for (int i = 0; i < m.n_; ++i) {
            if (std::fabs(m.row_sum(i) - 1.0) > 1e-10) {
                throw InputError("Ulam matrix row is not stochastic");
            }
        }
        return m;
    }

    int n_cells() const noexcept { return n_; }
    std::size_t nnz() const noexcept { return vals_.size(); }

    std::span<const int> row_cols(int i) const noexcept {
        return {cols_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
    }
    std::span<const double> row_weights(int i) const noexcept {
        return {vals_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
    }

    double row_sum(int i) const noexcept {
        double s = 0.0;
        for (double w : row_weights(i)) {
            s += w;
        }
        return s;
    }

    /// P[i][j], zero when absent.
    double at(int i, int j) const noexcept {
        auto cols = row_cols(i);
        auto it = std::lower_bound(cols.begin(), cols.end(), j);
        if (it == cols.end() || *it != j) {
            return 0.0;
        }
        return row_weights(i)[it - cols.begin()];
    }

    /// True when some row defect exceeded 1e-12 and the row was rescaled.
    bool renormalized() const noexcept { return renormalized_; }
    double max_row_defect() const noexcept { return max_row_defect_; }

private:
    template <class RowFn>
    friend UlamMatrix assemble_rows(int n_cells, RowFn&& row_fn);

    int n_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<int> cols_;
    std::vector<double> vals_;
    bool renormalized_ = false;
    double max_row_defect_ = 0.0;
};

namespace detail {

// Accumulates weights over lifted cell indices, then folds them modulo N
// into sorted columns.
class RowAccumulator {
public:
    explicit RowAccumulator(int n_cells) : n_(n_cells) {}

    void add(std::int64_t lifted_cell, double w) {
        if (w <= 0.0) {
            return;
        }
        std::int64_t j = lifted_cell % n_;
        if (j < 0) {
            j += n_;
        }
        pending_.push_back({static_cast<int>(j), w});
    }

    std::vector<UlamMatrix::Entry> finish() {
        std::stable_sort(pending_.begin(), pending_.end(),
                         [](const auto& a, const auto& b) { return a.col < b.col; });
        std::vector<UlamMatrix::Entry> out;
        for (const auto& e : pending_) {
            if (!out.empty() && out.back().col == e.col) {
                out.back().weight += e.weight;
            } else {
                out.push_back(e);
            }
        }
        pending_.clear();
        return out;
    }

private:
    int n_;
    std::vector<UlamMatrix::Entry> pending_;
};

inline void require_ulam_cells(int n_cells) {
    if (n_cells < 8) {
        throw ParameterError("Ulam discretization needs at least 8 cells");
    }
}

// Inverse of an increasing lift restricted to [a, b], bisected to machine precision.
template <class Lift>
double invert_increasing(const Lift& lift, double a, double b, double target) {
    double fa = lift(a);
    double fb = lift(b);
    if (!(fa <= target && target <= fb)) {
        throw NumericError("branch inversion lost its bracket");
    }
    double lo = a;
    double hi = b;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            return mid;
        }
        (lift(mid) < target ? lo : hi) = mid;
    }
    if (hi - lo > 1e-13) {
        throw NumericError("branch inversion did not converge");
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Runs row_fn(i) -> entries for every row in parallel and packs the result,
/// rescaling rows whose defect exceeds 1e-12 and rejecting defects above 1e-6.
template <class RowFn>
UlamMatrix assemble_rows(int n_cells, RowFn&& row_fn) {
    std::vector<std::vector<UlamMatrix::Entry>> rows(n_cells);
    parallel_for(static_cast<std::size_t>(n_cells), [&](std::size_t i) { rows[i] = row_fn(static_cast<int>(i)); });
    UlamMatrix m;
    m.n_ = n_cells;
    m.row_ptr_.assign(1, 0);
    for (auto& row : rows) {
        double s = 0.0;
        for (const auto& e : row) {
            s += e.weight;
        }
        double defect = std::fabs(s - 1.0);
        m.max_row_defect_ = std::max(m.max_row_defect_, defect);
        if (defect > 1e-6) {
            throw NumericError("Ulam row defect exceeds 1e-6");
        }
        if (defect > 1e-12) {
            m.renormalized_ = true;
            for (auto& e : row) {
                e.weight /= s;
            }
        }
        for (const auto& e : row) {
            m.cols_.push_back(e.col);
            m.vals_.push_back(e.weight);
        }
        m.row_ptr_.push_back(m.cols_.size());
    }
    return m;
}

/// Deterministic Ulam matrix P[i][j] = |I_i cap T^-1 I_j| / |I_i|, using the
/// monotone lift and bisection for the preimages of cell boundaries.
template <CircleMap M>
UlamMatrix assemble_deterministic(const M& map, int n_cells) {
    detail::require_ulam_cells(n_cells);
    const double n = n_cells;
    auto lift = [&map](double x) { return map.lift(x); };
    return assemble_rows(n_cells, [&](int i) {
        double a = i / n;
        double b = (i + 1) / n;
        double ya = lift(a);
        double yb = lift(b);
        detail::RowAccumulator acc(n_cells);
        auto first = static_cast<std::int64_t>(std::floor(ya * n));
        double x_prev = a;
        for (std::int64_t j = first;; ++j) {
            double boundary = (j + 1) / n;
            if (boundary >= yb) {
                acc.add(j, (b - x_prev) * n);
                break;
            }
            double x = detail::invert_increasing(lift, a, b, boundary);
            acc.add(j, (x - x_prev) * n);
            x_prev = x;
        }
        return acc.finish();
    });
}

/// Annealed Ulam matrix of the chain x -> T_t(x), t ~ theta, with
/// Gauss-Legendre quadrature of order quad_order over each source cell. For
/// each quadrature node the kernel mass of every target cell is exact: via the
/// kernel CDF in additive mode, and in parametric mode through the fact that
/// t -> f_t(x) is affine.
inline UlamMatrix assemble_annealed(const RandomSystem& system, int n_cells, int quad_order = 5) {
    detail::require_ulam_cells(n_cells);
    if (!system.kernel()) {
        if (system.mode() == Mode::parametric) {
            return assemble_deterministic(SaddleNodeMap(system.alpha(), 1.0), n_cells);
        }
        return std::visit([n_cells](const auto& m) { return assemble_deterministic(m, n_cells); }, system.base());
    }
    const NoiseKernel kernel = *system.kernel();
    const GaussLegendre rule(quad_order);
    const double n = n_cells;
    return assemble_rows(n_cells, [&](int i) {
        detail::RowAccumulator acc(n_cells);
        for (int q = 0; q < rule.order(); ++q) {
            double x = (i + rule.nodes[q]) / n;
            double wq = rule.weights[q];
            // Image as an affine function offset + slope * t of the parameter.
            double offset;
            double slope;
            if (system.mode() == Mode::additive) {
                offset = system.lift_unchecked(x, 0.0);
                slope = 1.0;
            } else {
                double y_lo = system.lift_unchecked(x, kernel.lo());
                double y_hi = system.lift_unchecked(x, kernel.hi());
                slope = (y_hi - y_lo) / kernel.width();
                offset = y_lo - slope * kernel.lo();
            }
            if (std::fabs(slope) < 1e-14) {
                acc.add(static_cast<std::int64_t>(std::floor((offset + slope * kernel.center()) * n)), wq);
                continue;
            }
            double e0 = offset + slope * kernel.lo();
            double e1 = offset + slope * kernel.hi();
            double lo = std::min(e0, e1);
            double hi = std::max(e0, e1);
            auto j0 = static_cast<std::int64_t>(std::floor(lo * n));
            auto j1 = static_cast<std::int64_t>(std::floor(hi * n));
            for (std::int64_t j = j0; j <= j1; ++j) {
                double ta = (j / n - offset) / slope;
                double tb = ((j + 1) / n - offset) / slope;
                acc.add(j, wq * kernel.mass(std::min(ta, tb), std::max(ta, tb)));
            }
        }
        return acc.finish();
    });
}

/// nu = mu P.
inline GridMeasure push(const UlamMatrix& P, const GridMeasure& mu) {
    if (P.n_cells() != mu.n_cells()) {
        throw InputError("push: dimension mismatch");
    }
    std::vector<double> out(P.n_cells(), 0.0);
    for (int i = 0; i < P.n_cells(); ++i) {
        double wi = mu[i];
        if (wi == 0.0) {
            continue;
        }
        auto cols = P.row_cols(i);
        auto vals = P.row_weights(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            out[cols[k]] += wi * vals[k];
        }
    }
    return GridMeasure::normalized(std::move(out));
}

/// ||mu P - mu||_1.
inline double invariance_residual(const UlamMatrix& P, const GridMeasure& mu) {
    GridMeasure nu = push(P, mu);
    double r = 0.0;
    for (int i = 0; i < mu.n_cells(); ++i) {
        r += std::fabs(nu[i] - mu[i]);
    }
    return r;
}

struct StationaryResult {
    GridMeasure measure;
    double residual;         ///< ||mu P - mu||_1 of the returned vector
    int iterations;          ///< of the first start
    double start_spread;     ///< max l1 distance between the fixed vectors of all starts
    bool multiple;           ///< starts disagreed by more than 10 tol
};

namespace detail {

// Column-major copy of P for a gather matvec with a fixed reduction order.
struct TransposedMatrix {
    std::vector<std::size_t> col_ptr;
    std::vector<int> rows;
    std::vector<double> vals;

    explicit TransposedMatrix(const UlamMatrix& P) {
        int n = P.n_cells();
        col_ptr.assign(n + 1, 0);
        for (int i = 0; i < n; ++i) {
            for (int j : P.row_cols(i)) {
                ++col_ptr[j + 1];
            }
        }
        for (int j = 0; j < n; ++j) {
            col_ptr[j + 1] += col_ptr[j];
        }
        rows.resize(P.nnz());
        vals.resize(P.nnz());
        std::vector<std::size_t> fill(col_ptr.begin(), col_ptr.end() - 1);
        for (int i = 0; i < n; ++i) {
            auto cols = P.row_cols(i);
            auto ws = P.row_weights(i);
            for (std::size_t k = 0; k < cols.size(); ++k) {
                std::size_t slot = fill[cols[k]]++;
                rows[slot] = i;
                vals[slot] = ws[k];
            }
        }
    }

    void apply(std::span<const double> mu, std::span<double> out, unsigned workers) const {
        const std::size_t n = out.size();
        constexpr std::size_t kBlock = 256;
        parallel_for(
            (n + kBlock - 1) / kBlock,
            [&](std::size_t b) {
                std::size_t end = std::min(n, (b + 1) * kBlock);
                for (std::size_t j = b * kBlock; j < end; ++j) {
                    double s = 0.0;
                    for (std::size_t k = col_ptr[j]; k < col_ptr[j + 1]; ++k) {
                        s += mu[rows[k]] * vals[k];
                    }
                    out[j] = s;
                }
            },
            workers);
    }
};

inline std::vector<double> start_vector(int n, int start) {
    std::vector<double> v(n, 1.0 / n);
    if (start == 0) {
        return v;
    }
    Xoshiro256 rng(splitmix64_mix(0x5DEECE66DULL + static_cast<std::uint64_t>(start)));
    double total = 0.0;
    for (double& x : v) {
        x = 0.25 + rng.uniform();
        total += x;
    }
    for (double& x : v) {
        x /= total;
    }
    return v;
}

}  // namespace detail

/// Fixed vector of a row-stochastic matrix by damped power iteration
/// mu <- (mu + mu P) / 2, which has the same fixed vectors as P and also
/// converges for periodic chains. Each start iterates until its residual is
/// below tol / 100 (accepting tol at the iteration cap); the starts must then
/// agree within 10 tol or the multiplicity flag is raised.
inline StationaryResult stationary(const UlamMatrix& P, double tol = 1e-10, int max_iter = 1'000'000,
                                   int n_starts = 3) {
    if (!(tol > 0.0) || max_iter < 1 || n_starts < 1) {
        throw ParameterError("stationary: tol > 0, max_iter >= 1 and n_starts >= 1 required");
    }
    const int n = P.n_cells();
    const detail::TransposedMatrix PT(P);
    const unsigned workers = worker_count();
    std::vector<std::vector<double>> fixed;
    std::vector<double> residuals;
    int first_iterations = 0;
    for (int start = 0; start < n_starts; ++start) {
        std::vector<double> mu = detail::start_vector(n, start);
        std::vector<double> image(n);
        double residual = INFINITY;
        int it = 0;
        for (; it <= max_iter; ++it) {
            PT.apply(mu, image, workers);
            residual = 0.0;
            for (int j = 0; j < n; ++j) {
                residual += std::fabs(image[j] - mu[j]);
            }
            if (residual <= 0.01 * tol || (it == max_iter && residual <= tol)) {
                break;
            }
            if (it == max_iter) {
                throw NonConvergenceError("stationary: max_iter exceeded", residual);
            }
            double total = 0.0;
            for (int j = 0; j < n; ++j) {
                mu[j] = 0.5 * (mu[j] + image[j]);
                total += mu[j];
            }
            for (double& x : mu) {
                x /= total;
            }
        }
        if (start == 0) {
            first_iterations = it;
        }
        fixed.push_back(std::move(mu));
        residuals.push_back(residual);
    }
    double spread = 0.0;
    for (std::size_t s = 1; s < fixed.size(); ++s) {
        double d = 0.0;
        for (int j = 0; j < n; ++j) {
            d += std::fabs(fixed[s][j] - fixed[0][j]);
        }
        spread = std::max(spread, d);
    }
    return StationaryResult{GridMeasure::normalized(std::move(fixed[0])), residuals[0], first_iterations, spread,
                            spread > 10.0 * tol};
}

}  // namespace zeronoise
