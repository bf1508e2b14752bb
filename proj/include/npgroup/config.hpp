#pragma once

#include "npgroup/error.hpp"
#include "npgroup/smoothing.hpp"
#include "npgroup/types.hpp"

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>

namespace npgroup {

/// How the tested coordinates feeding the supervised principal component
/// are chosen from their univariate p-values.
enum class PcRule {
    Rule1,   // {j : p_j < theta}
    Rule2,   // Rule1 plus the smallest p-value among the rest
};

inline const char* to_string(PcRule r) { return r == PcRule::Rule1 ? "rule1" : "rule2"; }

struct TestConfig {
    std::size_t p = 11;
    double theta = 0.05;
    PcRule rule = PcRule::Rule1;
    int q = 1;
    KernelSpec kernel = KernelSpec::epanechnikov();
    /// Multiplier c in lambda = c * sd * n^{-a}.
    double bandwidth_constant = 1.0;
    /// Explicit bandwidth; must match the number of null covariates.
    std::optional<Vector> bandwidth;
    /// Rescale tested columns to unit variance before the principal component.
    bool standardize_pca = false;

    void validate() const {
        if (p < 3 || p % 2 == 0) throw ValidationError("window size p must be odd and >= 3");
        if (!(theta > 0.0 && theta < 1.0)) throw ValidationError("theta must lie in (0, 1)");
        if (q < 0) throw ValidationError("local polynomial order q must be >= 0");
        if (!(bandwidth_constant > 0.0)) throw ValidationError("bandwidth constant must be positive");
    }
};

/// The four test variants: a) Rule 1, theta .05; b) Rule 1, .2;
/// c) Rule 2, .05; d) Rule 2, .2.
inline TestConfig variant_config(char variant, TestConfig base = {}) {
    switch (variant) {
        case 'a': base.rule = PcRule::Rule1; base.theta = 0.05; break;
        case 'b': base.rule = PcRule::Rule1; base.theta = 0.2; break;
        case 'c': base.rule = PcRule::Rule2; base.theta = 0.05; break;
        case 'd': base.rule = PcRule::Rule2; base.theta = 0.2; break;
        default: throw ValidationError(std::string("unknown test variant '") + variant + "' (expected a-d)");
    }
    return base;
}

/// Residual magnitude treated as an exact null fit.
inline double exact_fit_tolerance(const Vector& y) {
    const double scale = y.size() ? y.cwiseAbs().maxCoeff() : 0.0;
    return 1e-10 * std::max(1.0, scale);
}

/// Null-model fit of Y on the covariates in `x_keep`.
inline LocalPolyFit fit_null_model(const Vector& y, const Matrix& x_keep, const TestConfig& cfg) {
    cfg.validate();
    if (x_keep.rows() != y.size()) throw ValidationError("null model: X and Y row counts differ");
    Bandwidth h;
    if (x_keep.cols() > 0) {
        if (cfg.bandwidth) {
            h.lambdas = *cfg.bandwidth;
            if (h.lambdas.size() != x_keep.cols())
                throw ValidationError("bandwidth override has " + std::to_string(h.lambdas.size()) +
                                      " entries for " + std::to_string(x_keep.cols()) + " null covariates");
        } else {
            h = default_bandwidth(x_keep, cfg.q, cfg.bandwidth_constant);
        }
    }
    return local_poly_fit(x_keep, y, cfg.kernel, h, cfg.q);
}

}  // namespace npgroup
