#pragma once

// Flat JSON echo of resolved configurations. Every report carries one so a
// run can be replayed from its own output.

#include "npgroup/config.hpp"
#include "npgroup/selection.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace npgroup {

using Json = nlohmann::ordered_json;

inline void append_test_config(Json& j, const TestConfig& cfg) {
    j["p"] = cfg.p;
    j["theta"] = cfg.theta;
    j["rule"] = to_string(cfg.rule);
    j["q"] = cfg.q;
    j["kernel"] = to_string(cfg.kernel.family);
    j["bandwidth_constant"] = cfg.bandwidth_constant;
    if (cfg.bandwidth) {
        std::vector<double> bw(cfg.bandwidth->data(), cfg.bandwidth->data() + cfg.bandwidth->size());
        j["bandwidth"] = bw;
    } else {
        j["bandwidth"] = "default";
    }
    j["standardize_pca"] = cfg.standardize_pca;
}

inline void append_select_config(Json& j, const SelectConfig& cfg) {
    append_test_config(j, cfg.test);
    j["alpha"] = cfg.alpha;
    j["K"] = cfg.k;
    if (cfg.n_slices) {
        j["n_slices"] = *cfg.n_slices;
    } else {
        j["n_slices"] = "default";
    }
    j["stop_when_empty"] = cfg.stop_when_empty;
    j["refit_sir"] = cfg.refit_sir;
}

/// The report footer line.
inline std::string config_footer(const Json& j) { return "# npgroup-config: " + j.dump(); }

}  // namespace npgroup
