#pragma once

// Univariate surrogates for a block of covariates: the supervised first
// principal component of a tested group, and sliced inverse regression for
// the dimension-reduction matrix used by group selection.

#include "npgroup/anova.hpp"
#include "npgroup/config.hpp"
#include "npgroup/error.hpp"
#include "npgroup/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace npgroup {

namespace detail {

/// Flips `v` so its largest-magnitude coordinate (first one on ties) is positive.
inline void fix_sign(Vector& v) {
    Index arg = 0;
    for (Index i = 1; i < v.size(); ++i) {
        if (std::abs(v(i)) > std::abs(v(arg))) arg = i;
    }
    if (v.size() && v(arg) < 0.0) v = -v;
}

}  // namespace detail

/// Leading unit eigenvector of the sample covariance of column-centred M.
/// Columns are not rescaled unless `standardize` is set.
inline Vector first_pc(const Matrix& m, bool standardize = false) {
    if (m.cols() < 1) throw ValidationError("first_pc: need at least one column");
    if (m.rows() < 2) throw TooFewObservations("first_pc: need at least two rows");
    if (m.cols() == 1) return Vector::Ones(1);

    Matrix centered = m.rowwise() - m.colwise().mean();
    const double denom = static_cast<double>(m.rows() - 1);
    if (standardize) {
        for (Index c = 0; c < centered.cols(); ++c) {
            const double sd = std::sqrt(centered.col(c).squaredNorm() / denom);
            if (sd > 0.0) centered.col(c) /= sd;
        }
    }
    const Matrix cov = centered.transpose() * centered / denom;
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    if (es.info() != Eigen::Success) throw DegenerateCovariance("first_pc: eigen decomposition failed");
    const Index lead = cov.cols() - 1;   // eigenvalues ascending
    const double scale = 1.0 + m.colwise().mean().squaredNorm();
    if (!(es.eigenvalues()(lead) > 1e-14 * scale)) throw DegenerateCovariance("first_pc: covariance is numerically zero");
    Vector coef = es.eigenvectors().col(lead).normalized();
    detail::fix_sign(coef);
    return coef;
}

/// Applies the selection rule to univariate p-values. Only `eligible`
/// coordinates can be chosen. The result is sorted ascending and has at
/// least min(2, |eligible|) members.
inline IndexSet select_by_rule(const std::vector<double>& pvalues, double theta, PcRule rule,
                               const IndexSet& eligible) {
    IndexSet chosen;
    IndexSet rest;
    for (std::size_t j : eligible) (pvalues[j] < theta ? chosen : rest).push_back(j);

    auto by_pvalue = [&](std::size_t a, std::size_t b) {
        return pvalues[a] < pvalues[b] || (pvalues[a] == pvalues[b] && a < b);
    };
    if (rule == PcRule::Rule2 && !rest.empty()) {
        chosen.push_back(*std::min_element(rest.begin(), rest.end(), by_pvalue));
    }
    if (chosen.size() < 2) {
        IndexSet ranked = eligible;
        std::sort(ranked.begin(), ranked.end(), by_pvalue);
        ranked.resize(std::min<std::size_t>(2, ranked.size()));
        chosen = ranked;
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

struct ProjectionResult {
    IndexSet selected;
    Vector coef;
    Vector scores;
    std::vector<double> pvalues;
    /// Constant columns excluded from the component.
    IndexSet dropped;
    std::vector<std::string> warnings;
};

/// Supervised first principal component of Z given null-model residuals.
/// Univariate p-values come from the window test of each column of Z
/// against the same residuals.
inline ProjectionResult supervised_pc_from_residuals(const Vector& residuals, const Matrix& z,
                                                     const TestConfig& cfg, double residual_scale = 0.0) {
    cfg.validate();
    const std::size_t s = static_cast<std::size_t>(z.cols());
    if (s == 0) throw EmptyGroup("supervised_pc: tested group has no columns");
    if (z.rows() != residuals.size()) throw ValidationError("supervised_pc: row counts differ");

    ProjectionResult out;
    out.pvalues.assign(s, 1.0);
    if (s == 1) {
        out.selected = {0};
        out.coef = Vector::Ones(1);
        out.scores = z.col(0);
        out.pvalues[0] = score_statistic(residuals, z.col(0), cfg.p, residual_scale).p_value;
        return out;
    }

    IndexSet eligible;
    for (std::size_t j = 0; j < s; ++j) {
        const Vector col = z.col(static_cast<Index>(j));
        if (detail::is_constant(col)) {
            out.dropped.push_back(j);
            out.warnings.push_back("column " + std::to_string(j) + " of the tested group is constant and was dropped");
            continue;
        }
        eligible.push_back(j);
        out.pvalues[j] = score_statistic(residuals, col, cfg.p, residual_scale).p_value;
    }

    out.coef = Vector::Zero(static_cast<Index>(s));
    if (eligible.empty()) {
        // Nothing varies: any direction gives constant scores.
        out.selected = {0};
        out.coef(0) = 1.0;
        out.scores = z.col(0);
        return out;
    }
    out.selected = select_by_rule(out.pvalues, cfg.theta, cfg.rule, eligible);
    const Vector sub = first_pc(select_columns(z, out.selected), cfg.standardize_pca);
    for (std::size_t k = 0; k < out.selected.size(); ++k) out.coef(static_cast<Index>(out.selected[k])) = sub(static_cast<Index>(k));
    out.scores = z * out.coef;
    return out;
}

inline ProjectionResult supervised_pc(const Vector& y, const Matrix& x_keep, const Matrix& z, const TestConfig& cfg) {
    const LocalPolyFit fit = fit_null_model(y, x_keep, cfg);
    return supervised_pc_from_residuals(fit.residuals, z, cfg, exact_fit_tolerance(y));
}

/// Sliced inverse regression estimate. Rows of b_matrix are the estimated
/// directions in covariate units, each with unit norm in the metric of the
/// sample covariance (b^T Sigma b = 1).
struct SirEstimate {
    Matrix b_matrix;   // k x d
    Vector eigvals;    // all d, descending
    std::size_t n_slices = 0;
    std::size_t k = 0;
};

/// Slice membership: binary responses slice by class; otherwise observations
/// sorted by Y (ties by index) are cut into near-equal contiguous slices.
inline std::vector<IndexSet> make_slices(const Vector& y, std::size_t n_slices) {
    const std::set<double> distinct(y.data(), y.data() + y.size());
    std::vector<IndexSet> slices;
    if (distinct.size() <= 2) {
        for (double level : distinct) {
            IndexSet s;
            for (Index i = 0; i < y.size(); ++i) {
                if (y(i) == level) s.push_back(static_cast<std::size_t>(i));
            }
            slices.push_back(std::move(s));
        }
        return slices;
    }
    const IndexSet order = score_order(y);
    const std::size_t n = order.size();
    for (std::size_t h = 0; h < n_slices; ++h) {
        const std::size_t lo = h * n / n_slices;
        const std::size_t hi = (h + 1) * n / n_slices;
        slices.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(lo), order.begin() + static_cast<std::ptrdiff_t>(hi));
    }
    return slices;
}

inline SirEstimate sir(const Matrix& x, const Vector& y, std::size_t n_slices, std::size_t k) {
    const std::size_t n = static_cast<std::size_t>(x.rows());
    const std::size_t d = static_cast<std::size_t>(x.cols());
    if (static_cast<std::size_t>(y.size()) != n) throw ValidationError("sir: X and Y row counts differ");
    if (n_slices < 2) throw ValidationError("sir: need at least two slices");
    if (n < n_slices) throw TooFewObservations("sir: fewer observations than slices");
    if (k < 1 || k > d) throw ValidationError("sir: number of directions must lie in [1, d]");
    if (n <= d) throw SingularCovariance("sir: covariance is singular (n <= d)");

    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Matrix centered = x.rowwise() - mean;
    const Matrix cov = centered.transpose() * centered / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Matrix> ces(cov);
    const Vector& cev = ces.eigenvalues();
    if (!(cev.minCoeff() > 1e-10 * std::max(cev.maxCoeff(), 1e-300)))
        throw SingularCovariance("sir: covariate covariance is singular or collinear");
    const Matrix inv_sqrt = ces.eigenvectors() * cev.cwiseSqrt().cwiseInverse().asDiagonal() * ces.eigenvectors().transpose();
    const Matrix standardized = centered * inv_sqrt;

    const auto slices = make_slices(y, n_slices);
    Matrix kernel = Matrix::Zero(static_cast<Index>(d), static_cast<Index>(d));
    for (const IndexSet& s : slices) {
        if (s.empty()) continue;
        Vector m = Vector::Zero(static_cast<Index>(d));
        for (std::size_t i : s) m += standardized.row(static_cast<Index>(i)).transpose();
        m /= static_cast<double>(s.size());
        kernel.noalias() += (static_cast<double>(s.size()) / static_cast<double>(n)) * m * m.transpose();
    }

    Eigen::SelfAdjointEigenSolver<Matrix> kes(kernel);
    SirEstimate est;
    est.n_slices = slices.size();
    est.k = k;
    est.eigvals = kes.eigenvalues().reverse().cwiseMax(0.0);
    est.b_matrix.resize(static_cast<Index>(k), static_cast<Index>(d));
    for (std::size_t r = 0; r < k; ++r) {
        Vector eta = kes.eigenvectors().col(static_cast<Index>(d - 1 - r));
        Vector beta = inv_sqrt * eta;
        detail::fix_sign(beta);
        est.b_matrix.row(static_cast<Index>(r)) = beta.transpose();
    }
    return est;
}

}  // namespace npgroup
