#pragma once

// Seeded generators for the model-checking and group-selection designs, and
// a replication engine that turns them into rejection-rate and selection
// tables.

#include "npgroup/config.hpp"
#include "npgroup/config_json.hpp"
#include "npgroup/error.hpp"
#include "npgroup/group_test.hpp"
#include "npgroup/rng.hpp"
#include "npgroup/selection.hpp"
#include "npgroup/types.hpp"

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace npgroup {

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

enum class CheckDesign { Additive, NonAdditive, Hetero };

inline const char* to_string(CheckDesign d) {
    switch (d) {
        case CheckDesign::Additive: return "additive";
        case CheckDesign::NonAdditive: return "nonadditive";
        case CheckDesign::Hetero: return "hetero";
    }
    return "?";
}

/// A model-checking dataset split into null and tested columns.
struct ModelCheckData {
    Dataset data;
    IndexSet null_cols;
    IndexSet test_cols;

    Matrix x_null() const { return select_columns(data.x, null_cols); }
    Matrix z_test() const { return select_columns(data.x, test_cols); }
};

/// sign(a) |a|^b: keeps a^b real for negative bases.
inline double signed_power(double base, double exponent) {
    if (base == 0.0) return 0.0;
    return std::copysign(std::pow(std::abs(base), exponent), base);
}

/// Model-checking designs; all covariates are iid N(0, 1):
///   additive     Y = X1 + theta (Z1 + Z2 + Z3) + e,                   e ~ N(0, 1)
///   nonadditive  Y = X1^X2 (1 + theta (Z1 + Z2)) + X2^(theta(Z1+Z2)) + e, e ~ N(0, .1^2)
///   hetero       Y = X1 + theta sin(Z1 Z2) + Z1 Z2 e,                  e ~ N(0, .5^2)
/// Real powers use signed_power. Each row draws its covariates in column
/// order and then its error.
template <typename Rng>
ModelCheckData gen_model_check(CheckDesign design, double theta, std::size_t n, Rng& rng) {
    if (n < 1) throw ValidationError("gen_model_check: n must be >= 1");
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    ModelCheckData out;
    const Index rows = static_cast<Index>(n);
    out.data.y.resize(rows);
    switch (design) {
        case CheckDesign::Additive:
            out.data.names = {"x1", "z1", "z2", "z3"};
            out.null_cols = {0};
            out.test_cols = {1, 2, 3};
            break;
        case CheckDesign::NonAdditive:
            out.data.names = {"x1", "x2", "z1", "z2"};
            out.null_cols = {0, 1};
            out.test_cols = {2, 3};
            break;
        case CheckDesign::Hetero:
            out.data.names = {"x1", "z1", "z2"};
            out.null_cols = {0};
            out.test_cols = {1, 2};
            break;
    }
    const Index cols = static_cast<Index>(out.data.names.size());
    out.data.x.resize(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index c = 0; c < cols; ++c) out.data.x(i, c) = normal(rng);
        const double eps = normal(rng);
        const auto x = out.data.x.row(i);
        switch (design) {
            case CheckDesign::Additive:
                out.data.y(i) = x(0) + theta * (x(1) + x(2) + x(3)) + eps;
                break;
            case CheckDesign::NonAdditive: {
                const double zs = x(2) + x(3);
                out.data.y(i) = signed_power(x(0), x(1)) * (1.0 + theta * zs) + signed_power(x(1), theta * zs) + 0.1 * eps;
                break;
            }
            case CheckDesign::Hetero:
                out.data.y(i) = x(0) + theta * std::sin(x(1) * x(2)) + x(1) * x(2) * 0.5 * eps;
                break;
        }
    }
    return out;
}

inline ModelCheckData gen_model_check(CheckDesign design, double theta, std::size_t n, std::uint64_t seed) {
    CounterRng rng(seed, 0);
    return gen_model_check(design, theta, n, rng);
}

/// A selection dataset with its grouping and the indices of the groups
/// that truly enter the regression function.
struct GroupData {
    Dataset data;
    GroupMap groups;
    IndexSet true_groups;
};

/// Mean function of the continuous selection models given latent X_3, X_6.
inline double continuous_signal(int model, double x3, double x6) {
    const double a = x3 * x3 * x3 + x3 * x3 + x3;
    const double b = x6 * x6 * x6 / 3.0 - x6 * x6 + 2.0 * x6 / 3.0;
    switch (model) {
        case 1: return a + b;
        case 2: return std::sin(a) + b;
        case 3: return 10.0 * std::sin(a) + 5.0 * std::sin(b);
        default: throw ValidationError("continuous selection model must be 1, 2 or 3");
    }
}

/// Continuous selection Models 1-3: sixteen latent X_i = (Z_i + W)/sqrt(2)
/// (pairwise correlation 1/2), each contributing the columns X_i^3, X_i^2,
/// X_i as one group; e ~ N(0, 2^2). Groups 3 and 6 are active.
/// Each row draws W, then Z_1..Z_16, then the error.
template <typename Rng>
GroupData gen_group_continuous(int model, std::size_t n, Rng& rng) {
    if (model < 1 || model > 3) throw ValidationError("continuous selection model must be 1, 2 or 3");
    if (n < 1) throw ValidationError("gen_group_continuous: n must be >= 1");
    constexpr Index kLatent = 16;
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    GroupData out;
    const Index rows = static_cast<Index>(n);
    out.data.y.resize(rows);
    out.data.x.resize(rows, 3 * kLatent);
    for (Index l = 0; l < kLatent; ++l) {
        const std::string idx = std::to_string(l + 1);
        out.data.names.insert(out.data.names.end(), {"x" + idx + "_3", "x" + idx + "_2", "x" + idx + "_1"});
        out.groups.groups.push_back({static_cast<std::size_t>(3 * l), static_cast<std::size_t>(3 * l + 1),
                                     static_cast<std::size_t>(3 * l + 2)});
        out.groups.labels.push_back("g" + idx);
    }
    out.true_groups = {2, 5};
    Vector latent(kLatent);
    for (Index i = 0; i < rows; ++i) {
        const double w = normal(rng);
        for (Index l = 0; l < kLatent; ++l) latent(l) = (normal(rng) + w) / std::numbers::sqrt2;
        const double eps = 2.0 * normal(rng);
        for (Index l = 0; l < kLatent; ++l) {
            const double v = latent(l);
            out.data.x(i, 3 * l) = v * v * v;
            out.data.x(i, 3 * l + 1) = v * v;
            out.data.x(i, 3 * l + 2) = v;
        }
        out.data.y(i) = continuous_signal(model, latent(2), latent(5)) + eps;
    }
    return out;
}

inline double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

/// Success probability of the logistic selection models at covariate row x
/// (15 entries for Models 1-2, 12 for Model 3). The leading coefficient of
/// beta is the intercept against (1, X).
inline double logistic_probability(int model, const Vector& x) {
    static constexpr double beta1[16] = {1, -2.2, 2, 0, 0, 0, 0, 0, 0, 0, 1, 2, 0, 0, 0, 0};
    static constexpr double beta2[16] = {1, -2.2, 3, 0, 0, 0, 0, 0, 0, 0, 1, 3, 0, 0, 0, 0};
    switch (model) {
        case 1:
        case 2: {
            if (x.size() != 15) throw ValidationError("logistic models 1-2 take 15 covariates");
            const double* beta = model == 1 ? beta1 : beta2;
            double eta = beta[0];
            for (Index j = 0; j < 15; ++j) eta += beta[j + 1] * x(j);
            return logistic(eta);
        }
        case 3:
            if (x.size() != 12) throw ValidationError("logistic model 3 takes 12 covariates");
            return logistic(18.0 * std::sin(std::numbers::pi * x(1)) + 18.0 * std::sin(std::numbers::pi * x(7)));
        default:
            throw ValidationError("logistic selection model must be 1, 2 or 3");
    }
}

/// Logistic selection Models 1-3. Models 1-2: X_1..X_15 iid U(0,1) in five
/// sequential groups of three; active groups hold X_1, X_2, X_10, X_11.
/// Model 3: X_1..X_11 iid U(0,3), X_12 ~ N(-3,1), four groups of three;
/// active groups hold X_2 and X_8. Each row draws its covariates in order,
/// then the Bernoulli response.
template <typename Rng>
GroupData gen_group_logistic(int model, std::size_t n, Rng& rng) {
    if (model < 1 || model > 3) throw ValidationError("logistic selection model must be 1, 2 or 3");
    if (n < 1) throw ValidationError("gen_group_logistic: n must be >= 1");
    const Index d = model == 3 ? 12 : 15;
    boost::random::uniform_real_distribution<double> uniform(0.0, model == 3 ? 3.0 : 1.0);
    boost::random::normal_distribution<double> shifted(-3.0, 1.0);
    GroupData out;
    const Index rows = static_cast<Index>(n);
    out.data.y.resize(rows);
    out.data.x.resize(rows, d);
    for (Index c = 0; c < d; ++c) out.data.names.push_back("x" + std::to_string(c + 1));
    out.groups = GroupMap::sequential(static_cast<std::size_t>(d), 3);
    out.true_groups = model == 3 ? IndexSet{0, 2} : IndexSet{0, 3};
    Vector row(d);
    for (Index i = 0; i < rows; ++i) {
        for (Index c = 0; c < d; ++c) row(c) = (model == 3 && c == 11) ? shifted(rng) : uniform(rng);
        out.data.x.row(i) = row.transpose();
        boost::random::bernoulli_distribution<double> coin(logistic_probability(model, row));
        out.data.y(i) = coin(rng) ? 1.0 : 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Replication engine
// ---------------------------------------------------------------------------

/// Runs body(i) for i in [0, count) on up to `jobs` threads. Results must be
/// written to slots indexed by i; the first exception is rethrown.
template <typename Body>
void parallel_for(std::size_t count, std::size_t jobs, Body&& body) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (error) std::rethrow_exception(error);
}

enum class StudyKind { Rejection, Selection };

/// Named designs: table1..table3 are rejection studies (additive,
/// nonadditive, hetero); table4 and table5 are selection studies
/// (continuous and logistic, model chosen by `model`).
struct SimConfig {
    std::string design = "table1";
    std::vector<double> grid;     // rejection: theta values
    int model = 1;                // selection: model index 1..3
    std::size_t n = 200;
    std::size_t replications = 500;
    std::uint64_t seed = 1;
    char variant = 'a';
    TestConfig test = variant_config('a');
    SelectConfig select;
    double alpha = 0.05;
    std::size_t jobs = 1;

    /// Selection settings with the shared test settings and alpha applied.
    SelectConfig resolved_select() const {
        SelectConfig sel = select;
        sel.test = test;
        sel.alpha = alpha;
        return sel;
    }

    StudyKind kind() const {
        return design == "table4" || design == "table5" ? StudyKind::Selection : StudyKind::Rejection;
    }

    CheckDesign check_design() const {
        if (design == "table1") return CheckDesign::Additive;
        if (design == "table2") return CheckDesign::NonAdditive;
        if (design == "table3") return CheckDesign::Hetero;
        throw ValidationError("design '" + design + "' is not a rejection study");
    }

    void validate() const {
        if (design != "table1" && design != "table2" && design != "table3" && design != "table4" && design != "table5")
            throw ValidationError("unknown design '" + design + "' (expected table1..table5)");
        if (replications < 1) throw ValidationError("replications must be >= 1");
        if (kind() == StudyKind::Rejection && grid.empty()) throw ValidationError("effect grid is empty");
        if (kind() == StudyKind::Selection && (model < 1 || model > 3)) throw ValidationError("model must be 1, 2 or 3");
        if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
        if (n < 10) throw ValidationError("n must be >= 10");
        test.validate();
        select.validate();
    }

    /// Defaults for a named design: effect grid, sample size, and for
    /// selection designs the model.
    static SimConfig for_design(const std::string& design, int model = 1) {
        SimConfig cfg;
        cfg.design = design;
        cfg.model = model;
        if (design == "table1") cfg.grid = {0.0, 0.2, 0.4, 0.6, 0.8};
        else if (design == "table2") cfg.grid = {0.0, 0.02, 0.04, 0.06, 0.08};
        else if (design == "table3") cfg.grid = {0.0, 0.3, 0.6, 1.0, 2.0};
        if (design == "table4") cfg.n = 100;
        else if (design == "table5") cfg.n = model == 3 ? 200 : 100;
        else cfg.n = 200;
        cfg.validate();
        return cfg;
    }
};

inline Json to_json(const SimConfig& cfg) {
    Json j;
    j["command"] = "simulate";
    j["design"] = cfg.design;
    if (cfg.kind() == StudyKind::Rejection) {
        j["grid"] = cfg.grid;
        j["variant"] = std::string(1, cfg.variant);
        append_test_config(j, cfg.test);
    } else {
        j["model"] = cfg.model;
        j["variant"] = std::string(1, cfg.variant);
        append_select_config(j, cfg.resolved_select());
    }
    j["n"] = cfg.n;
    j["reps"] = cfg.replications;
    j["seed"] = cfg.seed;
    j["alpha"] = cfg.alpha;
    return j;
}

/// One grid point of a study.
struct SimRow {
    double theta = 0.0;          // rejection studies
    int model = 0;               // selection studies
    std::size_t completed = 0;   // replications that produced a result
    std::size_t failed = 0;      // replications lost to numerical failures
    double rate = 0.0;
    double rate_se = 0.0;
    double mean_correct = 0.0;
    double se_correct = 0.0;
    double mean_incorrect = 0.0;
    double se_incorrect = 0.0;
};

struct SimReport {
    StudyKind kind = StudyKind::Rejection;
    SimConfig config;
    std::vector<SimRow> rows;
    std::vector<std::string> notes;
    /// Not serialized, so reports stay byte-identical across runs.
    double wall_seconds = 0.0;
};

/// Monte Carlo standard error of a proportion.
inline double proportion_se(double rate, std::size_t reps) {
    return reps ? std::sqrt(rate * (1.0 - rate) / static_cast<double>(reps)) : 0.0;
}

inline SimReport run_rejection_study(const SimConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const CheckDesign design = cfg.check_design();
    SimReport report;
    report.kind = StudyKind::Rejection;
    report.config = cfg;
    const std::size_t reps = cfg.replications;
    for (std::size_t g = 0; g < cfg.grid.size(); ++g) {
        // 1 reject, 0 accept, -1 numerical failure
        std::vector<int> outcome(reps, -1);
        parallel_for(reps, cfg.jobs, [&](std::size_t r) {
            CounterRng rng(cfg.seed, CounterRng::stream_id(g, r));
            const ModelCheckData d = gen_model_check(design, cfg.grid[g], cfg.n, rng);
            try {
                const TestResult tr = group_test(d.data.y, d.x_null(), d.z_test(), cfg.test);
                outcome[r] = tr.p_value < cfg.alpha ? 1 : 0;
            } catch (const NumericalError&) {
                outcome[r] = -1;
            }
        });
        SimRow row;
        row.theta = cfg.grid[g];
        std::size_t rejections = 0;
        for (int o : outcome) {
            if (o < 0) ++row.failed;
            else { ++row.completed; rejections += static_cast<std::size_t>(o); }
        }
        row.rate = row.completed ? static_cast<double>(rejections) / static_cast<double>(row.completed) : 0.0;
        row.rate_se = proportion_se(row.rate, row.completed);
        report.rows.push_back(row);
    }
    if (design == CheckDesign::NonAdditive)
        report.notes.push_back("real powers computed as sign(a)|a|^b");
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

struct SelectionScore {
    std::size_t correct = 0;
    std::size_t incorrect = 0;
};

inline SelectionScore score_selection(const std::vector<std::size_t>& retained, const IndexSet& truth) {
    SelectionScore s;
    for (std::size_t g : retained) {
        if (std::find(truth.begin(), truth.end(), g) != truth.end()) ++s.correct;
        else ++s.incorrect;
    }
    return s;
}

inline GroupData generate_selection_data(const SimConfig& cfg, CounterRng& rng) {
    return cfg.design == "table4" ? gen_group_continuous(cfg.model, cfg.n, rng)
                                  : gen_group_logistic(cfg.model, cfg.n, rng);
}

inline SimReport run_selection_study(const SimConfig& cfg) {
    cfg.validate();
    if (cfg.kind() != StudyKind::Selection) throw ValidationError("design '" + cfg.design + "' is not a selection study");
    const auto start = std::chrono::steady_clock::now();
    SimReport report;
    report.kind = StudyKind::Selection;
    report.config = cfg;
    const SelectConfig sel = cfg.resolved_select();

    const std::size_t reps = cfg.replications;
    std::vector<std::optional<SelectionScore>> scores(reps);
    parallel_for(reps, cfg.jobs, [&](std::size_t r) {
        CounterRng rng(cfg.seed, CounterRng::stream_id(0, r));
        const GroupData d = generate_selection_data(cfg, rng);
        try {
            const SelectionTrace tr = backward_select(d.data.y, d.data.x, d.groups, sel);
            scores[r] = score_selection(tr.retained, d.true_groups);
        } catch (const NumericalError&) {
            scores[r].reset();
        }
    });

    SimRow row;
    row.model = cfg.model;
    std::vector<double> correct, incorrect;
    for (const auto& s : scores) {
        if (!s) { ++row.failed; continue; }
        correct.push_back(static_cast<double>(s->correct));
        incorrect.push_back(static_cast<double>(s->incorrect));
    }
    row.completed = correct.size();
    auto mean_se = [](const std::vector<double>& v, double& mean, double& se) {
        mean = 0.0;
        se = 0.0;
        if (v.empty()) return;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        if (v.size() < 2) return;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    };
    mean_se(correct, row.mean_correct, row.se_correct);
    mean_se(incorrect, row.mean_incorrect, row.se_incorrect);
    report.rows.push_back(row);
    if (cfg.design == "table5" && cfg.model != 3)
        report.notes.push_back("correct/incorrect are counts of groups; the original table may count covariates for models 1-2");
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

inline SimReport run_study(const SimConfig& cfg) {
    return cfg.kind() == StudyKind::Rejection ? run_rejection_study(cfg) : run_selection_study(cfg);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

inline std::string pad_right(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace detail

inline std::string to_csv(const SimReport& rep) {
    std::ostringstream os;
    const auto& cfg = rep.config;
    if (rep.kind == StudyKind::Rejection) {
        os << "design,variant,theta,n,completed,failed,rate,se\n";
        for (const auto& r : rep.rows) {
            os << cfg.design << ',' << cfg.variant << ',' << detail::fmt_g(r.theta) << ',' << cfg.n << ','
               << r.completed << ',' << r.failed << ',' << detail::fmt(r.rate, 4) << ',' << detail::fmt(r.rate_se, 4)
               << '\n';
        }
    } else {
        os << "design,model,n,completed,failed,mean_correct,se_correct,mean_incorrect,se_incorrect\n";
        for (const auto& r : rep.rows) {
            os << cfg.design << ',' << r.model << ',' << cfg.n << ',' << r.completed << ',' << r.failed << ','
               << detail::fmt(r.mean_correct, 4) << ',' << detail::fmt(r.se_correct, 4) << ','
               << detail::fmt(r.mean_incorrect, 4) << ',' << detail::fmt(r.se_incorrect, 4) << '\n';
        }
    }
    for (const auto& note : rep.notes) os << "# note: " << note << '\n';
    os << config_footer(to_json(cfg)) << '\n';
    return os.str();
}

/// Aligned text table laid out like the published tables: one method row,
/// one column per grid point (rejection), or one row per model (selection).
inline std::string to_table(const SimReport& rep) {
    std::ostringstream os;
    const auto& cfg = rep.config;
    if (rep.kind == StudyKind::Rejection) {
        os << "Rejection rates, " << to_string(cfg.check_design()) << " model (" << cfg.design << "), n = " << cfg.n
           << ", " << cfg.replications << " replications, alpha = " << detail::fmt_g(cfg.alpha) << "\n";
        const std::size_t w = 9;
        os << detail::pad_right("Method", 16);
        for (const auto& r : rep.rows) os << detail::pad(detail::fmt_g(r.theta), w);
        os << '\n' << detail::pad_right(std::string("ANOVA-type-") + cfg.variant, 16);
        for (const auto& r : rep.rows) os << detail::pad(detail::fmt(r.rate), w);
        os << '\n' << detail::pad_right("  (MC s.e.)", 16);
        for (const auto& r : rep.rows) os << detail::pad(detail::fmt(r.rate_se), w);
        os << '\n';
        std::size_t failed = 0;
        for (const auto& r : rep.rows) failed += r.failed;
        if (failed) os << "failed replications: " << failed << '\n';
    } else {
        os << "Selection results, " << (cfg.design == "table4" ? "continuous" : "logistic") << " model (" << cfg.design
           << "), n = " << cfg.n << ", " << cfg.replications << " replications, alpha = " << detail::fmt_g(cfg.alpha)
           << "\n";
        os << detail::pad_right("Model", 10) << detail::pad_right("Method", 14) << detail::pad("Corr.Selected", 15)
           << detail::pad("Incorr.Selected", 17) << '\n';
        for (const auto& r : rep.rows) {
            os << detail::pad_right("Model " + std::to_string(r.model), 10) << detail::pad_right("ANOVA-type", 14)
               << detail::pad(detail::fmt(r.mean_correct), 15) << detail::pad(detail::fmt(r.mean_incorrect), 17) << '\n';
            os << detail::pad_right("", 10) << detail::pad_right("  (MC s.e.)", 14)
               << detail::pad(detail::fmt(r.se_correct), 15) << detail::pad(detail::fmt(r.se_incorrect), 17) << '\n';
            if (r.failed) os << "failed replications: " << r.failed << '\n';
        }
    }
    for (const auto& note : rep.notes) os << "# note: " << note << '\n';
    os << config_footer(to_json(cfg)) << '\n';
    return os.str();
}

}  // namespace npgroup
