#pragma once

// Backward elimination of covariate groups. Each round tests every active
// group against the rest (both projected through the SIR directions),
// applies the Benjamini-Yekutieli step-up rule to the group p-values, and
// either keeps every active group or drops the one with the largest p-value.

#include "npgroup/config.hpp"
#include "npgroup/error.hpp"
#include "npgroup/group_test.hpp"
#include "npgroup/projection.hpp"
#include "npgroup/types.hpp"

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace npgroup {

/// Largest rank l (1-based) with p_(l) <= (l/d) alpha / sum_{j<=d} 1/j, or 0.
inline std::size_t by_cutoff(const std::vector<double>& pvalues, double alpha) {
    const std::size_t d = pvalues.size();
    if (d == 0) return 0;
    std::vector<double> sorted = pvalues;
    std::sort(sorted.begin(), sorted.end());
    double harmonic = 0.0;
    for (std::size_t j = 1; j <= d; ++j) harmonic += 1.0 / static_cast<double>(j);
    std::size_t k = 0;
    for (std::size_t l = 1; l <= d; ++l) {
        const double threshold = static_cast<double>(l) / static_cast<double>(d) * alpha / harmonic;
        if (sorted[l - 1] <= threshold) k = l;
    }
    return k;
}

struct GroupMap {
    std::vector<IndexSet> groups;
    std::vector<std::string> labels;

    std::size_t size() const { return groups.size(); }

    std::string label(std::size_t g) const {
        return g < labels.size() ? labels[g] : "g" + std::to_string(g + 1);
    }

    /// Disjoint, nonempty, and covering 0..d_total-1 exactly.
    void validate(std::size_t d_total) const {
        if (groups.empty()) throw EmptyInput("group map has no groups");
        std::vector<int> seen(d_total, 0);
        for (std::size_t g = 0; g < groups.size(); ++g) {
            if (groups[g].empty()) throw ValidationError("group " + label(g) + " is empty");
            for (std::size_t c : groups[g]) {
                if (c >= d_total) throw ValidationError("group " + label(g) + " references column " + std::to_string(c) + " out of range");
                if (seen[c]++) throw OverlappingGroups(std::to_string(c));
            }
        }
        for (std::size_t c = 0; c < d_total; ++c) {
            if (!seen[c]) throw UnassignedColumn(std::to_string(c));
        }
    }

    /// Consecutive groups of `size` columns over d_total columns.
    static GroupMap sequential(std::size_t d_total, std::size_t size) {
        GroupMap gm;
        for (std::size_t start = 0; start < d_total; start += size) {
            IndexSet g;
            for (std::size_t c = start; c < std::min(d_total, start + size); ++c) g.push_back(c);
            gm.groups.push_back(std::move(g));
        }
        return gm;
    }
};

struct SelectConfig {
    TestConfig test;
    double alpha = 0.05;
    std::size_t k = 2;                      // SIR directions
    std::optional<std::size_t> n_slices;    // default: 2 for binary Y, else 10
    /// Stop with the empty set once every remaining p-value exceeds alpha.
    bool stop_when_empty = false;
    /// Extension: re-estimate SIR on the surviving columns after each elimination.
    bool refit_sir = false;

    void validate() const {
        test.validate();
        if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
        if (k < 1) throw ValidationError("number of SIR directions must be >= 1");
        if (n_slices && *n_slices < 2) throw ValidationError("SIR needs at least two slices");
    }
};

struct SelectionIteration {
    std::vector<std::size_t> active;    // group indices, ascending
    std::vector<double> z;              // aligned with active
    std::vector<double> pvalues;        // aligned with active
    std::size_t cutoff_k = 0;
    std::optional<std::size_t> eliminated;
    std::size_t directions_null = 0;    // SIR rows used for the null covariates (capped)
};

struct SelectionTrace {
    std::vector<SelectionIteration> iterations;
    std::vector<std::size_t> retained;
    SelectConfig config;
    std::size_t n_slices = 0;
    Vector sir_eigvals;
    std::vector<std::string> notes;
};

inline bool is_binary(const Vector& y) {
    std::set<double> distinct;
    for (Index i = 0; i < y.size() && distinct.size() <= 2; ++i) distinct.insert(y(i));
    return distinct.size() <= 2;
}

namespace detail {

/// X_cols * B(0:rows, cols)^T.
inline Matrix project(const Matrix& x, const Matrix& b, const IndexSet& cols, std::size_t rows) {
    Matrix out = Matrix::Zero(x.rows(), static_cast<Index>(rows));
    for (std::size_t k = 0; k < cols.size(); ++k) {
        const Index c = static_cast<Index>(cols[k]);
        for (std::size_t r = 0; r < rows; ++r) out.col(static_cast<Index>(r)) += b(static_cast<Index>(r), c) * x.col(c);
    }
    return out;
}

}  // namespace detail

inline SelectionTrace backward_select(const Vector& y, const Matrix& x, const GroupMap& gm, const SelectConfig& cfg) {
    cfg.validate();
    const std::size_t n = static_cast<std::size_t>(y.size());
    const std::size_t d_total = static_cast<std::size_t>(x.cols());
    if (static_cast<std::size_t>(x.rows()) != n) throw ValidationError("backward_select: X and Y row counts differ");
    gm.validate(d_total);
    if (d_total >= n) throw ValidationError("backward_select: need fewer covariates than observations");

    SelectionTrace trace;
    trace.config = cfg;
    trace.n_slices = cfg.n_slices.value_or(is_binary(y) ? 2 : 10);
    const std::size_t k_dirs = std::min(cfg.k, d_total);
    if (k_dirs < cfg.k) trace.notes.push_back("SIR directions capped at " + std::to_string(k_dirs));

    SirEstimate est = sir(x, y, trace.n_slices, k_dirs);
    trace.sir_eigvals = est.eigvals;
    // Column c of `b` holds the SIR loadings of covariate c.
    Matrix b = est.b_matrix;

    std::vector<std::size_t> active(gm.size());
    std::iota(active.begin(), active.end(), std::size_t{0});

    while (!active.empty()) {
        if (cfg.refit_sir && !trace.iterations.empty()) {
            IndexSet cols;
            for (std::size_t g : active) cols.insert(cols.end(), gm.groups[g].begin(), gm.groups[g].end());
            std::sort(cols.begin(), cols.end());
            const std::size_t kk = std::min(cfg.k, cols.size());
            const SirEstimate refit = sir(select_columns(x, cols), y, trace.n_slices, kk);
            b = Matrix::Zero(static_cast<Index>(kk), static_cast<Index>(d_total));
            for (std::size_t j = 0; j < cols.size(); ++j) b.col(static_cast<Index>(cols[j])) = refit.b_matrix.col(static_cast<Index>(j));
        }
        const std::size_t rows = static_cast<std::size_t>(b.rows());

        SelectionIteration it;
        it.active = active;
        for (std::size_t g : active) {
            IndexSet keep;
            for (std::size_t other : active) {
                if (other != g) keep.insert(keep.end(), gm.groups[other].begin(), gm.groups[other].end());
            }
            std::sort(keep.begin(), keep.end());
            const std::size_t rows_null = std::min(rows, keep.size());
            const std::size_t rows_group = std::min(rows, gm.groups[g].size());
            it.directions_null = std::max(it.directions_null, rows_null);
            const Matrix x_role = detail::project(x, b, keep, rows_null);
            const Matrix z_role = detail::project(x, b, gm.groups[g], rows_group);
            const TestResult tr = group_test(y, x_role, z_role, cfg.test);
            it.z.push_back(tr.z);
            it.pvalues.push_back(tr.p_value);
        }
        it.cutoff_k = by_cutoff(it.pvalues, cfg.alpha);

        if (it.cutoff_k == active.size()) {
            trace.retained = active;
            trace.iterations.push_back(std::move(it));
            break;
        }
        if (cfg.stop_when_empty &&
            std::all_of(it.pvalues.begin(), it.pvalues.end(), [&](double pv) { return pv > cfg.alpha; })) {
            trace.notes.push_back("stopped: every remaining p-value exceeds alpha");
            trace.iterations.push_back(std::move(it));
            break;
        }
        std::size_t worst = 0;
        for (std::size_t i = 1; i < it.pvalues.size(); ++i) {
            if (it.pvalues[i] > it.pvalues[worst]) worst = i;
        }
        it.eliminated = active[worst];
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(worst));
        trace.iterations.push_back(std::move(it));
    }
    return trace;
}

}  // namespace npgroup
