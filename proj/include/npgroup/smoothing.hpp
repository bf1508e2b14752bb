#pragma once

// Multivariate local polynomial regression used to fit the null model.
//
// Design columns are the monomials of the centered covariate increment
// (x_j - x0) of total degree <= q, ordered by total degree and, within a
// degree, by exponent vector in descending lexicographic order. For q = 2
// that is (1, d_1, .., d_r, vech{d d^T}) with vech taken column-wise:
//   r = 2:  1, a, b, a^2, ab, b^2

#include "npgroup/error.hpp"
#include "npgroup/types.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace npgroup {

enum class KernelFamily { Epanechnikov, GaussianTruncated };

inline const char* to_string(KernelFamily f) {
    return f == KernelFamily::Epanechnikov ? "epanechnikov" : "gaussian";
}

/// Product kernel with bounded support. Arguments are in bandwidth units.
struct KernelSpec {
    KernelFamily family = KernelFamily::Epanechnikov;
    double support_radius = 1.0;

    static KernelSpec epanechnikov() { return {KernelFamily::Epanechnikov, 1.0}; }
    static KernelSpec gaussian_truncated() { return {KernelFamily::GaussianTruncated, 4.0}; }

    /// Univariate factor.
    double operator()(double u) const {
        const double a = std::abs(u);
        if (a > support_radius) return 0.0;
        switch (family) {
            case KernelFamily::Epanechnikov:
                return 0.75 * (1.0 - u * u);
            case KernelFamily::GaussianTruncated:
                return std::exp(-0.5 * u * u);
        }
        return 0.0;
    }

    /// Product over coordinates; `u` already divided by the bandwidth.
    template <typename Derived>
    double product(const Eigen::MatrixBase<Derived>& u) const {
        double k = 1.0;
        for (Index i = 0; i < u.size(); ++i) {
            k *= (*this)(u(i));
            if (k == 0.0) break;
        }
        return k;
    }
};

/// Diagonal bandwidth matrix H^{1/2} = diag(lambdas), in covariate units.
struct Bandwidth {
    Vector lambdas;

    void validate() const {
        for (Index i = 0; i < lambdas.size(); ++i) {
            if (!(lambdas(i) > 0.0) || !std::isfinite(lambdas(i)))
                throw ValidationError("bandwidth entries must be positive and finite");
        }
    }
};

struct LocalPolyFit {
    int order_q = 1;
    Vector fitted;
    Vector residuals;
    std::size_t effective_columns = 0;
    Bandwidth bandwidth;
    std::size_t ridged_points = 0;   // evaluation points that needed the ridge fallback
};

/// Number of r-variate monomials of total degree <= q.
inline std::size_t gamma_dim(std::size_t r, int q) {
    // C(r + q, q), built incrementally so intermediate values stay exact.
    std::size_t c = 1;
    for (int j = 1; j <= q; ++j) c = c * (r + static_cast<std::size_t>(j)) / static_cast<std::size_t>(j);
    return c;
}

namespace detail {

inline void compositions(int remaining, std::size_t slot, std::vector<int>& cur,
                         std::vector<std::vector<int>>& out) {
    if (slot + 1 == cur.size()) {
        cur[slot] = remaining;
        out.push_back(cur);
        return;
    }
    for (int e = remaining; e >= 0; --e) {
        cur[slot] = e;
        compositions(remaining - e, slot + 1, cur, out);
    }
}

}  // namespace detail

/// Exponent vectors of the design columns, in column order.
inline std::vector<std::vector<int>> monomial_exponents(std::size_t r, int q) {
    std::vector<std::vector<int>> out;
    if (r == 0) {
        out.emplace_back();
        return out;
    }
    std::vector<int> cur(r, 0);
    for (int j = 0; j <= q; ++j) detail::compositions(j, 0, cur, out);
    return out;
}

namespace detail {

template <typename Derived>
void fill_design_row(const Eigen::MatrixBase<Derived>& delta,
                     const std::vector<std::vector<int>>& exps, Vector& row) {
    for (std::size_t c = 0; c < exps.size(); ++c) {
        double v = 1.0;
        for (std::size_t k = 0; k < exps[c].size(); ++k) {
            for (int e = 0; e < exps[c][k]; ++e) v *= delta(static_cast<Index>(k));
        }
        row(static_cast<Index>(c)) = v;
    }
}

}  // namespace detail

inline Vector design_row(const Vector& x_j, const Vector& x0, int q) {
    if (x_j.size() != x0.size()) throw ValidationError("design_row: dimension mismatch");
    const auto exps = monomial_exponents(static_cast<std::size_t>(x0.size()), q);
    Vector row(static_cast<Index>(exps.size()));
    detail::fill_design_row(x_j - x0, exps, row);
    return row;
}

namespace detail {

constexpr double kMaxCondition = 1e12;
constexpr double kRidgeFactor = 1e-8;

inline double condition_number(const Matrix& g) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

}  // namespace detail

/// Equivalent-kernel weights w(x0, X_j), j = 1..n, of the local polynomial
/// estimator at x0: the fitted value is weights . Y.
///
/// The design is built on bandwidth-scaled increments; rescaling columns
/// leaves the intercept coordinate of the solution unchanged.
/// The ridge fallback leaves the intercept unpenalized.
/// `point` only labels a SingularFit.
inline Vector smoother_weights(const Matrix& x, const Vector& x0, const KernelSpec& kernel,
                               const Bandwidth& h, int q, std::size_t point = 0,
                               bool* ridged = nullptr) {
    const Index n = x.rows();
    const std::size_t r = static_cast<std::size_t>(x.cols());
    const auto exps = monomial_exponents(r, q);
    const Index gamma = static_cast<Index>(exps.size());

    Vector weights = Vector::Zero(n);
    Vector kw(n);
    Matrix design(n, gamma);
    Vector row(gamma);
    Vector u(static_cast<Index>(r));
    Matrix gram = Matrix::Zero(gamma, gamma);
    for (Index j = 0; j < n; ++j) {
        u = (x.row(j).transpose() - x0).cwiseQuotient(h.lambdas);
        kw(j) = kernel.product(u);
        if (kw(j) == 0.0) continue;
        detail::fill_design_row(u, exps, row);
        design.row(j) = row.transpose();
        gram.selfadjointView<Eigen::Lower>().rankUpdate(row, kw(j));
    }
    gram = Matrix(gram.selfadjointView<Eigen::Lower>());

    if (ridged) *ridged = false;
    if (detail::condition_number(gram) > detail::kMaxCondition) {
        const double trace = gram.trace();
        if (!(trace > 0.0)) throw SingularFit(point);
        gram.diagonal().tail(gamma - 1).array() += detail::kRidgeFactor * trace / static_cast<double>(gamma);
        if (detail::condition_number(gram) > detail::kMaxCondition) throw SingularFit(point);
        if (ridged) *ridged = true;
    }

    const Vector a = gram.ldlt().solve(Vector::Unit(gamma, 0));
    for (Index j = 0; j < n; ++j) {
        if (kw(j) != 0.0) weights(j) = kw(j) * design.row(j).dot(a);
    }
    return weights;
}

/// Fits Y on X at every design point. With no covariates (X has zero
/// columns) the null model is a constant and the fit is the sample mean.
inline LocalPolyFit local_poly_fit(const Matrix& x, const Vector& y, const KernelSpec& kernel,
                                   const Bandwidth& h, int q) {
    const Index n = x.rows();
    const std::size_t r = static_cast<std::size_t>(x.cols());
    if (y.size() != n) throw ValidationError("local_poly_fit: X and Y row counts differ");
    if (q < 0) throw ValidationError("local_poly_fit: order must be non-negative");
    LocalPolyFit fit;
    fit.order_q = q;
    fit.effective_columns = gamma_dim(r, q);
    fit.bandwidth = h;
    if (static_cast<std::size_t>(n) <= fit.effective_columns)
        throw TooFewObservations("local_poly_fit: need more observations than design columns");

    if (r == 0) {
        fit.fitted = Vector::Constant(n, y.mean());
    } else {
        if (h.lambdas.size() != static_cast<Index>(r))
            throw ValidationError("local_poly_fit: bandwidth dimension mismatch");
        h.validate();
        fit.fitted.resize(n);
        for (Index i = 0; i < n; ++i) {
            bool ridged = false;
            const Vector w = smoother_weights(x, x.row(i).transpose(), kernel, h, q,
                                              static_cast<std::size_t>(i), &ridged);
            fit.fitted(i) = w.dot(y);
            if (ridged) ++fit.ridged_points;
        }
    }
    fit.residuals = y - fit.fitted;
    return fit;
}

/// Admissible open interval (lo, hi) for the exponent a in lambda ~ n^{-a}:
/// n lambda^{4(q+1)} -> 0 needs a > 1/(4(q+1)); n lambda^{2r} / log^2 n -> inf
/// needs a < 1/(2r).
struct RateBand {
    double lo;
    double hi;
    bool feasible() const { return lo < hi; }
    /// Geometric midpoint; 1/4 for r = 1, q = 1.
    double midpoint() const { return std::sqrt(lo * hi); }
};

inline RateBand rate_band(std::size_t r, int q) {
    return {1.0 / (4.0 * (q + 1)), 1.0 / (2.0 * static_cast<double>(r))};
}

/// lambda_i = constant * sd(X_i) * n^{-a}, with a the midpoint of the rate band.
inline Bandwidth default_bandwidth(const Matrix& x, int q, double constant = 1.0) {
    const Index n = x.rows();
    const std::size_t r = static_cast<std::size_t>(x.cols());
    if (n < 10) throw TooFewObservations("default_bandwidth: need at least 10 observations");
    if (r == 0) return {};
    const RateBand band = rate_band(r, q);
    if (!band.feasible()) throw InfeasibleRates(r, q);
    const double shrink = std::pow(static_cast<double>(n), -band.midpoint());

    Bandwidth h;
    h.lambdas.resize(static_cast<Index>(r));
    for (Index c = 0; c < static_cast<Index>(r); ++c) {
        const double mean = x.col(c).mean();
        const double sd = std::sqrt((x.col(c).array() - mean).square().sum() / static_cast<double>(n - 1));
        if (!(sd > 0.0)) throw ValidationError("default_bandwidth: covariate column " + std::to_string(c) + " is constant");
        h.lambdas(c) = constant * sd * shrink;
    }
    return h;
}

}  // namespace npgroup
