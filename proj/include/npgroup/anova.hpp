#pragma once

// Augmented one-way ANOVA over nearest-neighbour windows of a univariate
// score, and its standardization.
//
// Observations are sorted by score (ties by original index). Each interior
// sorted position i, (p-1)/2 <= i < n-(p-1)/2 (0-based), defines a cell made
// of the p sorted positions centred on i, so there are N = n - p + 1 cells
// of exactly p residuals each. Cells overlap; an observation appears in up
// to p cells of the augmented design.

#include "npgroup/error.hpp"
#include "npgroup/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace npgroup {

struct WindowLayout {
    /// order[k] = original index of the k-th smallest score.
    IndexSet order;
    std::size_t p = 0;
    /// windows[c] = sorted positions of cell c (contiguous, size p).
    std::vector<IndexSet> windows;
    std::size_t n_cells = 0;

    std::size_t n() const { return order.size(); }

    /// Original observation indices of the members of cell c.
    IndexSet members(std::size_t cell) const {
        IndexSet out;
        out.reserve(p);
        for (std::size_t pos : windows[cell]) out.push_back(order[pos]);
        return out;
    }
};

/// Stable ascending ordering of `scores` (ties keep original index order).
inline IndexSet score_order(const Vector& scores) {
    IndexSet order(static_cast<std::size_t>(scores.size()));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores(static_cast<Index>(a)) < scores(static_cast<Index>(b));
    });
    return order;
}

inline void check_window_size(std::size_t p) {
    if (p < 3 || p % 2 == 0) throw ValidationError("window size p must be odd and at least 3, got " + std::to_string(p));
}

inline WindowLayout build_windows(const Vector& scores, std::size_t p) {
    check_window_size(p);
    const std::size_t n = static_cast<std::size_t>(scores.size());
    if (n < p)
        throw TooFewObservations("build_windows: n=" + std::to_string(n) + " is smaller than window size p=" +
                                 std::to_string(p));
    for (Index i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores(i))) throw ValidationError("build_windows: non-finite score");
    }
    WindowLayout layout;
    layout.order = score_order(scores);
    layout.p = p;
    layout.n_cells = n - p + 1;
    layout.windows.resize(layout.n_cells);
    for (std::size_t c = 0; c < layout.n_cells; ++c) {
        layout.windows[c].resize(p);
        std::iota(layout.windows[c].begin(), layout.windows[c].end(), c);
    }
    return layout;
}

struct MeanSquares {
    double mst = 0.0;
    double mse = 0.0;
    double difference() const { return mst - mse; }
};

/// Balanced one-way ANOVA mean squares on the augmented design.
inline MeanSquares mst_mse(const Vector& residuals, const WindowLayout& layout) {
    if (static_cast<std::size_t>(residuals.size()) != layout.n())
        throw ValidationError("mst_mse: residuals and layout sizes differ");
    if (layout.n_cells < 2) throw TooFewCells("mst_mse: need at least two cells, got " + std::to_string(layout.n_cells));

    const std::size_t cells = layout.n_cells;
    const double p = static_cast<double>(layout.p);
    std::vector<double> cell_mean(cells);
    double grand = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
        double s = 0.0;
        for (std::size_t pos : layout.windows[c]) s += residuals(static_cast<Index>(layout.order[pos]));
        cell_mean[c] = s / p;
        grand += s;
    }
    grand /= static_cast<double>(cells) * p;

    double between = 0.0;
    double within = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
        const double dm = cell_mean[c] - grand;
        between += dm * dm;
        for (std::size_t pos : layout.windows[c]) {
            const double e = residuals(static_cast<Index>(layout.order[pos])) - cell_mean[c];
            within += e * e;
        }
    }
    MeanSquares ms;
    ms.mst = p * between / static_cast<double>(cells - 1);
    ms.mse = within / (static_cast<double>(cells) * (p - 1.0));
    return ms;
}

/// The augmented observation vector: residuals of cell 1, then cell 2, ...
inline Vector augmented_observations(const Vector& residuals, const WindowLayout& layout) {
    Vector out(static_cast<Index>(layout.n_cells * layout.p));
    Index k = 0;
    for (std::size_t c = 0; c < layout.n_cells; ++c) {
        for (std::size_t pos : layout.windows[c]) out(k++) = residuals(static_cast<Index>(layout.order[pos]));
    }
    return out;
}

/// MST - MSE written as the quadratic form x^T A x on the augmented vector,
/// with A assembled densely:
///
///   A = (Np-1)/(N(N-1)p(p-1)) (J_p (+) ... (+) J_p) - 1/(N(N-1)p) J_{Np} - 1/(N(p-1)) I_{Np}
///
/// O((Np)^2) memory; meant as an independent check of mst_mse.
inline double quadratic_form_oracle(const Vector& residuals, const WindowLayout& layout) {
    if (static_cast<std::size_t>(residuals.size()) != layout.n())
        throw ValidationError("quadratic_form_oracle: residuals and layout sizes differ");
    if (layout.n_cells < 2) throw TooFewCells("quadratic_form_oracle: need at least two cells");
    const double big_n = static_cast<double>(layout.n_cells);
    const double p = static_cast<double>(layout.p);
    const Index dim = static_cast<Index>(layout.n_cells * layout.p);
    const Index block = static_cast<Index>(layout.p);

    Matrix a = Matrix::Constant(dim, dim, -1.0 / (big_n * (big_n - 1.0) * p));
    const double block_coef = (big_n * p - 1.0) / (big_n * (big_n - 1.0) * p * (p - 1.0));
    for (Index c = 0; c < static_cast<Index>(layout.n_cells); ++c) a.block(c * block, c * block, block, block).array() += block_coef;
    a.diagonal().array() -= 1.0 / (big_n * (p - 1.0));

    const Vector x = augmented_observations(residuals, layout);
    return x.dot(a * x);
}

/// Difference-based estimate of E[sigma^4] from neighbour-ordered residuals:
///   1/(4(n-3)) sum_{j=2}^{n-2} (e_j - e_{j-1})^2 (e_{j+2} - e_{j+1})^2
inline double tau2_hat(const Vector& sorted_residuals) {
    const Index n = sorted_residuals.size();
    if (n < 4) throw TooFewObservations("tau2_hat: need at least 4 residuals");
    double acc = 0.0;
    for (Index j = 1; j + 2 < n; ++j) {
        const double a = sorted_residuals(j) - sorted_residuals(j - 1);
        const double b = sorted_residuals(j + 2) - sorted_residuals(j + 1);
        acc += a * a * b * b;
    }
    return acc / (4.0 * static_cast<double>(n - 3));
}

/// Asymptotic variance of sqrt(n)(MST - MSE) in units of tau^2.
inline double variance_constant(std::size_t p) {
    const double pd = static_cast<double>(p);
    return 2.0 * pd * (2.0 * pd - 1.0) / (3.0 * (pd - 1.0));
}

/// Upper-tail standard normal probability, 1 - Phi(z).
inline double upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

struct Standardized {
    double z = 0.0;
    double p_value = 0.5;
};

inline Standardized standardize(double mst, double mse, double tau2, std::size_t n, std::size_t p) {
    if (!(tau2 > 0.0) || !std::isfinite(tau2))
        throw DegenerateVariance("standardize: variance estimate is not positive and finite");
    Standardized s;
    s.z = std::sqrt(static_cast<double>(n)) * (mst - mse) / std::sqrt(variance_constant(p) * tau2);
    s.p_value = upper_tail(s.z);
    return s;
}

/// Everything computed for one residual vector under one score ordering.
struct ScoreStatistic {
    double mst = 0.0;
    double mse = 0.0;
    double tau2 = 0.0;
    double z = 0.0;
    double p_value = 0.5;
    /// Set when the statistic is identically zero (constant scores or an
    /// exact null fit) and z = 0, p = 0.5 are returned without standardizing.
    bool degenerate = false;
};

namespace detail {

inline bool is_constant(const Vector& v) {
    if (v.size() == 0) return true;
    const double lo = v.minCoeff();
    const double hi = v.maxCoeff();
    return hi - lo <= 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
}

}  // namespace detail

/// Tests whether the residuals depend on the scores.
///
/// A constant score carries no ordering information and an identically zero
/// residual vector leaves nothing to test; both return z = 0 (p = 0.5).
/// `residual_scale` is the magnitude below which residuals count as zero.
inline ScoreStatistic score_statistic(const Vector& residuals, const Vector& scores, std::size_t p,
                                      double residual_scale = 0.0) {
    if (residuals.size() != scores.size()) throw ValidationError("score_statistic: residuals and scores sizes differ");
    const WindowLayout layout = build_windows(scores, p);
    if (layout.n_cells < 2) throw TooFewCells("score_statistic: need at least two cells");
    ScoreStatistic st;
    const double max_abs = residuals.cwiseAbs().maxCoeff();
    if (detail::is_constant(scores) || max_abs <= residual_scale) {
        st.degenerate = true;
        return st;
    }
    const MeanSquares ms = mst_mse(residuals, layout);
    Vector sorted(residuals.size());
    for (std::size_t k = 0; k < layout.order.size(); ++k) sorted(static_cast<Index>(k)) = residuals(static_cast<Index>(layout.order[k]));
    st.mst = ms.mst;
    st.mse = ms.mse;
    st.tau2 = tau2_hat(sorted);
    const Standardized s = standardize(ms.mst, ms.mse, st.tau2, layout.n(), p);
    st.z = s.z;
    st.p_value = s.p_value;
    return st;
}

}  // namespace npgroup
