// CLI run configuration: file references, agent definitions, contract,
// optional tree topology and oracle settings. Validation errors name the
// offending field.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eqforward/equilibrium.hpp"
#include "eqforward/scenario_tree.hpp"
#include "json.hpp"

namespace eqf {

struct AgentConfig {
    std::string id;
    std::string kind;  // generator | load | trader
    double lambda = 1.0;
    std::optional<double> alpha;  // overrides the run-level alpha
    std::optional<std::string> profile;  // path, relative to the config file
    std::optional<double> q_max;
};

struct TreeConfig {
    std::string cluster_stat = "mean_spot";
    std::vector<TreeStageSpec> stages;
};

struct OracleConfig {
    double p_lo = 0.0;
    double p_hi = 1000.0;
    double tol = 1e-4;
};

struct RunConfig {
    std::filesystem::path config_path;  // where this config was loaded from
    std::string config_hash;            // hash of the raw config bytes

    std::string scenarios;  // path to the scenario file
    bool allow_negative_spot = false;
    double alpha_default = 0.95;
    std::vector<AgentConfig> agents;
    std::vector<int> delivery_periods;
    std::vector<double> shape;
    std::optional<TreeConfig> tree;
    OracleConfig oracle;
    std::filesystem::path out_dir = "out";

    static RunConfig load(const std::filesystem::path& path);

    // Resolves a config-relative path.
    std::filesystem::path resolve(const std::string& rel) const;

    MarketConfig build_market() const;
    TreeTopologySpec build_tree_spec() const;
};

// Run manifest: config hash, tool version, every tolerance in effect and the
// risk parameters actually used. Identical manifests imply byte-identical
// numeric outputs.
nlohmann::json build_manifest(const RunConfig& cfg, const std::string& command,
                              const EquilibriumOptions& eq_opts, double kkt_threshold);

}  // namespace eqf
