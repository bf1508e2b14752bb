#pragma once

// Command-line front end: `test`, `select` and `simulate`.
//
// Settings resolve as flags > config file > defaults. The config file is a
// flat JSON object whose keys are the long flag names with '-' written as
// '_' (for example {"p": 11, "theta": 0.2, "bandwidth_constant": 1.5}).
// Every report ends with `# npgroup-config: <resolved config>`.
//
// Exit codes: 0 success, 2 invalid input or flags, 3 numerical failure.

#include "npgroup/config.hpp"
#include "npgroup/config_json.hpp"
#include "npgroup/csv.hpp"
#include "npgroup/error.hpp"
#include "npgroup/group_test.hpp"
#include "npgroup/selection.hpp"
#include "npgroup/simulation.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace npgroup::cli {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

/// Raw flag values; each is applied only when given on the command line.
struct Flags {
    std::string config_path;
    std::size_t p = 11;
    double theta = 0.05;
    int rule = 1;
    int q = 1;
    std::string kernel = "epanechnikov";
    std::vector<double> bandwidth;
    double bandwidth_constant = 1.0;
    bool standardize_pca = false;
    double alpha = 0.05;
    std::size_t k = 2;
    std::optional<std::size_t> slices;
    bool stop_when_empty = false;
    bool refit_sir = false;
    std::optional<std::uint64_t> seed;
    std::string out;

    // test / select
    std::string data;
    std::string response = "y";
    std::vector<std::string> null_cols;
    std::vector<std::string> test_cols;
    std::vector<std::string> groups;

    // simulate
    std::string design = "table1";
    std::vector<double> theta_grid;
    int model = 1;
    std::size_t n = 0;
    std::size_t reps = 500;
    char variant = 'a';
    std::string format = "table";
    std::size_t jobs = 1;
};

/// Settings after applying defaults, the config file and flags.
struct Resolved {
    TestConfig test;
    SelectConfig select;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    bool seed_from_entropy = false;
    Flags flags;
};

namespace detail {

inline std::vector<std::string> split_list(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    for (const auto& item : items) {
        std::istringstream is(item);
        std::string tok;
        while (std::getline(is, tok, ',')) {
            if (!tok.empty()) out.push_back(tok);
        }
    }
    return out;
}

inline KernelSpec parse_kernel(const std::string& name) {
    if (name == "epanechnikov") return KernelSpec::epanechnikov();
    if (name == "gaussian") return KernelSpec::gaussian_truncated();
    throw ValidationError("unknown kernel '" + name + "' (expected epanechnikov or gaussian)");
}

inline PcRule parse_rule(int rule) {
    if (rule == 1) return PcRule::Rule1;
    if (rule == 2) return PcRule::Rule2;
    throw ValidationError("rule must be 1 or 2");
}

/// Applies the config file's keys to `flags` where the flag was not given.
inline void apply_config_file(const std::string& path, Flags& flags, const CLI::App& sub) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config file '" + path + "': " + e.what());
    }
    if (!j.is_object()) throw ValidationError("config file must hold a flat JSON object");

    static const std::vector<std::string> known = {
        "p", "theta", "rule", "q", "kernel", "bandwidth", "bandwidth_constant", "standardize_pca", "alpha", "K",
        "slices", "stop_when_empty", "refit_sir", "seed", "model", "n", "reps", "variant", "jobs", "design"};
    // Keys for options the command lacks are ignored; flags on the command line win.
    auto skip = [&](const std::string& flag) {
        try {
            return sub.get_option("--" + flag)->count() > 0;
        } catch (const CLI::OptionNotFound&) {
            return true;
        }
    };
    try {
        for (const auto& [key, value] : j.items()) {
            if (std::find(known.begin(), known.end(), key) == known.end())
                throw ValidationError("config file: unknown key '" + key + "'");
            std::string flag = key;
            std::replace(flag.begin(), flag.end(), '_', '-');
            if (skip(flag)) continue;
            if (key == "p") flags.p = value.get<std::size_t>();
            else if (key == "theta") flags.theta = value.get<double>();
            else if (key == "rule") flags.rule = value.get<int>();
            else if (key == "q") flags.q = value.get<int>();
            else if (key == "kernel") flags.kernel = value.get<std::string>();
            else if (key == "bandwidth") flags.bandwidth = value.is_array() ? value.get<std::vector<double>>() : std::vector<double>{value.get<double>()};
            else if (key == "bandwidth_constant") flags.bandwidth_constant = value.get<double>();
            else if (key == "standardize_pca") flags.standardize_pca = value.get<bool>();
            else if (key == "alpha") flags.alpha = value.get<double>();
            else if (key == "K") flags.k = value.get<std::size_t>();
            else if (key == "slices") flags.slices = value.get<std::size_t>();
            else if (key == "stop_when_empty") flags.stop_when_empty = value.get<bool>();
            else if (key == "refit_sir") flags.refit_sir = value.get<bool>();
            else if (key == "seed") flags.seed = value.get<std::uint64_t>();
            else if (key == "model") flags.model = value.get<int>();
            else if (key == "n") flags.n = value.get<std::size_t>();
            else if (key == "reps") flags.reps = value.get<std::size_t>();
            else if (key == "variant") flags.variant = value.get<std::string>().at(0);
            else if (key == "jobs") flags.jobs = value.get<std::size_t>();
            else if (key == "design") flags.design = value.get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config file '" + path + "': " + e.what());
    }
}

inline bool option_given(const CLI::App& sub, const std::string& name) {
    try {
        return sub.get_option(name)->count() > 0;
    } catch (const CLI::OptionNotFound&) {
        return false;
    }
}

inline Resolved resolve(Flags flags, const CLI::App& sub) {
    if (!flags.config_path.empty()) apply_config_file(flags.config_path, flags, sub);
    Resolved r;
    r.test.p = flags.p;
    r.test.theta = flags.theta;
    r.test.rule = parse_rule(flags.rule);
    r.test.q = flags.q;
    r.test.kernel = parse_kernel(flags.kernel);
    r.test.bandwidth_constant = flags.bandwidth_constant;
    r.test.standardize_pca = flags.standardize_pca;
    if (!flags.bandwidth.empty()) r.test.bandwidth = Eigen::Map<const Vector>(flags.bandwidth.data(), static_cast<Index>(flags.bandwidth.size()));
    r.alpha = flags.alpha;
    r.select.test = r.test;
    r.select.alpha = flags.alpha;
    r.select.k = flags.k;
    r.select.n_slices = flags.slices;
    r.select.stop_when_empty = flags.stop_when_empty;
    r.select.refit_sir = flags.refit_sir;
    if (flags.seed) {
        r.seed = *flags.seed;
    } else {
        std::random_device rd;
        r.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        r.seed_from_entropy = true;
    }
    r.test.validate();
    r.select.validate();
    if (!(r.alpha > 0.0 && r.alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    r.flags = std::move(flags);
    return r;
}

inline void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << contents;
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

inline std::string join(const std::vector<std::string>& v, const char* sep = ",") {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
    return s;
}

inline Json base_json(const std::string& command, const Resolved& r) {
    Json j;
    j["command"] = command;
    if (!r.flags.data.empty()) j["data"] = r.flags.data;
    j["response"] = r.flags.response;
    return j;
}

inline void finish_json(Json& j, const Resolved& r) {
    j["seed"] = r.seed;
    if (r.seed_from_entropy) j["seed_source"] = "entropy";
}

}  // namespace detail

inline int cmd_test(const Resolved& r, std::ostream& out) {
    const Dataset ds = dataset_from_table(read_csv(r.flags.data), r.flags.response);
    if (ds.n() < 10) throw ValidationError("need at least 10 observations, got " + std::to_string(ds.n()));
    const auto null_cols = detail::split_list(r.flags.null_cols);
    const auto test_cols = detail::split_list(r.flags.test_cols);
    if (test_cols.empty()) throw EmptyGroup("--test-cols names no columns");
    auto indices = [&](const std::vector<std::string>& names) {
        IndexSet idx;
        for (const auto& nme : names) idx.push_back(npgroup::detail::column_index(ds.names, nme));
        return idx;
    };
    const IndexSet ni = indices(null_cols);
    const IndexSet ti = indices(test_cols);
    for (std::size_t a : ni) {
        if (std::find(ti.begin(), ti.end(), a) != ti.end()) throw OverlappingGroups(ds.names[a]);
    }
    const TestResult res = group_test(ds.y, select_columns(ds.x, ni), select_columns(ds.x, ti), r.test);

    std::vector<std::string> selected;
    for (std::size_t k : res.diagnostics.selected) selected.push_back(test_cols[k]);
    std::vector<std::string> bw;
    for (Index i = 0; i < res.diagnostics.bandwidth.size(); ++i) bw.push_back(detail::fmt(res.diagnostics.bandwidth(i)));

    std::ostringstream os;
    os << "group test: " << r.flags.response << " ~ {" << detail::join(null_cols) << "} + {" << detail::join(test_cols)
       << "}\n";
    os << "n          " << res.n << "\n";
    os << "p          " << res.p << "\n";
    os << "MST        " << detail::fmt(res.mst) << "\n";
    os << "MSE        " << detail::fmt(res.mse) << "\n";
    os << "tau2_hat   " << detail::fmt(res.tau2_hat) << "\n";
    os << "z          " << detail::fmt(res.z) << "\n";
    os << "p_value    " << detail::fmt(res.p_value) << "\n";
    os << "bandwidth  " << (bw.empty() ? std::string("none") : detail::join(bw)) << "\n";
    os << "selected   " << detail::join(selected) << "\n";
    os << "column p-values:";
    for (std::size_t k = 0; k < test_cols.size(); ++k) os << ' ' << test_cols[k] << '=' << detail::fmt(res.diagnostics.column_pvalues[k]);
    os << "\n";
    if (res.diagnostics.degenerate) os << "# note: degenerate statistic (constant scores or exact null fit)\n";
    for (const auto& w : res.diagnostics.warnings) os << "# warning: " << w << "\n";

    Json j = detail::base_json("test", r);
    j["null_cols"] = null_cols;
    j["test_cols"] = test_cols;
    append_test_config(j, r.test);
    j["alpha"] = r.alpha;
    detail::finish_json(j, r);
    const std::string footer = config_footer(j);
    out << os.str() << footer << "\n";

    if (!r.flags.out.empty()) {
        std::ostringstream csv;
        csv << "n,p,mst,mse,tau2_hat,z,p_value,selected\n";
        csv << res.n << ',' << res.p << ',' << detail::fmt(res.mst) << ',' << detail::fmt(res.mse) << ','
            << detail::fmt(res.tau2_hat) << ',' << detail::fmt(res.z) << ',' << detail::fmt(res.p_value) << ','
            << csv_escape(detail::join(selected, " ")) << "\n"
            << footer << "\n";
        detail::write_file(r.flags.out, csv.str());
    }
    return kExitOk;
}

inline int cmd_select(const Resolved& r, std::ostream& out) {
    if (r.flags.groups.empty()) throw ValidationError("--groups is required");
    const auto [ds, gm] = ingest_csv(r.flags.data, r.flags.response, r.flags.groups);
    if (ds.n() < 10) throw ValidationError("need at least 10 observations, got " + std::to_string(ds.n()));
    const SelectionTrace tr = backward_select(ds.y, ds.x, gm, r.select);

    std::ostringstream os;
    std::ostringstream csv;
    csv << "iteration,group,z,p_value,cutoff_k,eliminated\n";
    os << "backward group selection: " << gm.size() << " groups, n = " << ds.n() << ", alpha = " << detail::fmt(r.alpha)
       << ", SIR slices = " << tr.n_slices << "\n";
    for (std::size_t it = 0; it < tr.iterations.size(); ++it) {
        const auto& rec = tr.iterations[it];
        os << "iteration " << it + 1 << ": d = " << rec.active.size() << ", k = " << rec.cutoff_k;
        if (rec.eliminated) os << ", eliminated " << gm.label(*rec.eliminated);
        os << "\n";
        for (std::size_t a = 0; a < rec.active.size(); ++a) {
            const std::string label = gm.label(rec.active[a]);
            os << "  " << std::left << std::setw(12) << label << std::right << " z = " << std::setw(10)
               << detail::fmt(rec.z[a]) << "  p = " << detail::fmt(rec.pvalues[a]) << "\n";
            csv << it + 1 << ',' << csv_escape(label) << ',' << detail::fmt(rec.z[a]) << ',' << detail::fmt(rec.pvalues[a])
                << ',' << rec.cutoff_k << ',' << (rec.eliminated && *rec.eliminated == rec.active[a] ? 1 : 0) << "\n";
        }
    }
    std::vector<std::string> retained;
    for (std::size_t g : tr.retained) retained.push_back(gm.label(g));
    os << "retained: " << (retained.empty() ? std::string("(none)") : detail::join(retained, " ")) << "\n";
    for (const auto& note : tr.notes) os << "# note: " << note << "\n";

    Json j = detail::base_json("select", r);
    std::vector<std::string> groups_echo;
    for (std::size_t g = 0; g < gm.size(); ++g) {
        std::vector<std::string> cols;
        for (std::size_t c : gm.groups[g]) cols.push_back(ds.names[c]);
        groups_echo.push_back(gm.label(g) + ":" + detail::join(cols));
    }
    j["groups"] = groups_echo;
    append_select_config(j, r.select);
    detail::finish_json(j, r);
    const std::string footer = config_footer(j);
    out << os.str() << footer << "\n";
    if (!r.flags.out.empty()) detail::write_file(r.flags.out, csv.str() + footer + "\n");
    return kExitOk;
}

inline int cmd_simulate(const Resolved& r, const CLI::App& sub, std::ostream& out, std::ostream& err) {
    SimConfig cfg = SimConfig::for_design(r.flags.design, r.flags.model);
    if (!r.flags.theta_grid.empty()) cfg.grid = r.flags.theta_grid;
    if (r.flags.n) cfg.n = r.flags.n;
    cfg.replications = r.flags.reps;
    cfg.seed = r.seed;
    cfg.variant = r.flags.variant;
    cfg.test = variant_config(r.flags.variant, r.test);
    // Explicit --theta-threshold / --rule override the variant.
    if (detail::option_given(sub, "--theta-threshold")) cfg.test.theta = r.test.theta;
    if (detail::option_given(sub, "--rule")) cfg.test.rule = r.test.rule;
    cfg.select = r.select;
    cfg.alpha = r.alpha;
    cfg.jobs = r.flags.jobs;
    cfg.validate();

    const SimReport rep = run_study(cfg);
    out << (r.flags.format == "csv" ? to_csv(rep) : to_table(rep));
    if (r.seed_from_entropy) out << "# seed drawn from entropy: " << r.seed << "\n";
    err << "simulate: " << cfg.design << " finished in " << std::fixed << std::setprecision(2) << rep.wall_seconds << " s\n";
    if (!r.flags.out.empty()) detail::write_file(r.flags.out, to_csv(rep));
    return kExitOk;
}

/// Runs the command line; never throws.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Nonparametric group significance testing and group variable selection", "npgroup"};
    app.require_subcommand(1);
    Flags flags;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config_path, "Flat JSON config file (flags take precedence)");
        sub->add_option("--p", flags.p, "Window size (odd, >= 3)");
        sub->add_option("--rule", flags.rule, "Supervised-PC selection rule (1 or 2)");
        sub->add_option("--q", flags.q, "Local polynomial order");
        sub->add_option("--kernel", flags.kernel, "epanechnikov or gaussian (truncated at 4 bandwidths)");
        sub->add_option("--bandwidth", flags.bandwidth, "Explicit bandwidth, one value per null covariate")->delimiter(',');
        sub->add_option("--bandwidth-constant", flags.bandwidth_constant, "Constant c in c * sd * n^-a");
        sub->add_flag("--standardize-pca", flags.standardize_pca, "Scale tested columns before the principal component");
        sub->add_option("--alpha", flags.alpha, "Significance / FDR level");
        sub->add_option("--seed", flags.seed, "Random seed (drawn from entropy and reported when absent)");
        sub->add_option("--out", flags.out, "Also write the report as CSV to this file");
    };

    auto* test = app.add_subcommand("test", "Test whether a group of columns affects the regression function");
    add_common(test);
    test->add_option("--theta", flags.theta, "Univariate p-value threshold for the supervised PC");
    test->add_option("--data", flags.data, "Input CSV file")->required();
    test->add_option("--response", flags.response, "Response column");
    test->add_option("--null-cols", flags.null_cols, "Null-model covariates (comma separated)")->delimiter(',');
    test->add_option("--test-cols", flags.test_cols, "Tested covariates (comma separated)")->delimiter(',')->required();

    auto* select = app.add_subcommand("select", "Backward group variable selection");
    add_common(select);
    select->add_option("--theta", flags.theta, "Univariate p-value threshold for the supervised PC");
    select->add_option("--data", flags.data, "Input CSV file")->required();
    select->add_option("--response", flags.response, "Response column");
    select->add_option("--groups", flags.groups, "Inline groups name:col1,col2 ... or a column,group mapping file")->required();
    select->add_option("--K", flags.k, "Number of SIR directions");
    select->add_option("--slices", flags.slices, "SIR slices (default 10, or 2 for a binary response)");
    select->add_flag("--stop-when-empty", flags.stop_when_empty, "Stop with no groups once every p-value exceeds alpha");
    select->add_flag("--refit-sir", flags.refit_sir, "Re-estimate SIR after each elimination");

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo replication of the rejection and selection tables");
    add_common(simulate);
    simulate->add_option("--design", flags.design, "table1 .. table5");
    simulate->add_option("--theta", flags.theta_grid, "Effect values replacing the design grid")->delimiter(',');
    simulate->add_option("--theta-threshold", flags.theta, "Univariate p-value threshold (overrides the variant)");
    simulate->add_option("--model", flags.model, "Selection model 1..3 (table4, table5)");
    simulate->add_option("--n", flags.n, "Sample size (default per design)");
    simulate->add_option("--reps", flags.reps, "Replications per grid point");
    simulate->add_option("--variant", flags.variant, "Test variant a..d");
    simulate->add_option("--format", flags.format, "Stdout format: table or csv")->check(CLI::IsMember({"table", "csv"}));
    simulate->add_option("--jobs", flags.jobs, "Worker threads (results do not depend on it)");
    simulate->add_option("--K", flags.k, "Number of SIR directions");
    simulate->add_option("--slices", flags.slices, "SIR slices");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        const Resolved r = detail::resolve(flags, *sub);
        if (sub == test) return cmd_test(r, out);
        if (sub == select) return cmd_select(r, out);
        return cmd_simulate(r, *sub, out, err);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
}

}  // namespace npgroup::cli
