// Scenario tree over trajectories: nested equal-count clustering per stage,
// count-ratio transition probabilities, per-node forward equilibrium prices
// and mark-to-market contract values.
#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "eqforward/equilibrium.hpp"
#include "eqforward/scenario_model.hpp"
#include "json.hpp"

namespace eqf {

enum class ClusterStat { MeanSpot, SumSpot, Custom };

const char* to_string(ClusterStat s);
ClusterStat cluster_stat_from_string(const std::string& s);

struct TreeStageSpec {
    std::vector<int> periods;  // 1-based periods feeding the clustering statistic
    int branching = 1;         // children per parent node at this stage
};

struct TreeTopologySpec {
    std::vector<TreeStageSpec> stages;
    ClusterStat stat = ClusterStat::MeanSpot;
    // Custom statistic hook: value of trajectory k over the stage's periods.
    std::function<double(const ScenarioSet&, const std::vector<int>& periods, int k)> custom;

    void validate(const ScenarioSet& s) const;
};

struct TreeNode {
    int id = 0;
    int stage = 0;
    int parent = -1;             // -1 at the root
    std::vector<int> members;    // trajectory indices, ascending
    std::vector<int> children;
    double prob_from_parent = 1.0;
    double path_prob = 1.0;      // member count / K
};

struct ScenarioTree {
    std::vector<TreeNode> nodes;                 // node id == index
    std::vector<std::vector<int>> stage_nodes;   // node ids per stage, stage 0 = root
    std::vector<TreeStageSpec> stage_specs;      // topology the tree was built from
    int num_stages() const { return static_cast<int>(stage_nodes.size()); }
};

// Root holds all K trajectories; each stage sorts a parent's members by the
// stage statistic and splits them into `branching` consecutive groups whose
// sizes differ by at most one (larger groups first). Ties break by
// trajectory index, so identical inputs give identical trees.
ScenarioTree build_tree(const ScenarioSet& s, const TreeTopologySpec& spec);

struct NodePrice {
    int node_id = 0;
    double price = 0.0;
    double quantity = 0.0;
    EqStatus status = EqStatus::Optimal;
    std::string error;  // nonempty when the node solve failed
};

struct ForwardPriceLattice {
    ScenarioTree tree;
    ContractSpec target;
    std::vector<NodePrice> prices;  // parallel to tree.nodes
};

// Per-node equilibrium of cfg restricted to the node's member trajectories,
// for the target delivery contract. Node failures are recorded in the node,
// not propagated. Solves run in parallel across nodes.
ForwardPriceLattice forward_price_lattice(const ScenarioTree& tree, const MarketConfig& cfg,
                                          const ContractSpec& target);

struct PricePoint {
    int node_id = 0;
    double price = 0.0;
    double probability = 0.0;
};

// Forward-price distribution at a stage: (node price, path probability).
std::vector<PricePoint> price_distribution(const ForwardPriceLattice& lattice, int stage);

enum class ContractSide { Sell, Buy };

struct ValuePoint {
    int node_id = 0;
    double price = 0.0;        // prevailing node price
    double value = 0.0;        // per-unit mark-to-market of the established contract
    double probability = 0.0;
};

// Mark-to-market of a contract established at `established_price`: a seller
// gains established - prevailing, a buyer the negative.
std::vector<ValuePoint> contract_value_distribution(const ForwardPriceLattice& lattice,
                                                    double established_price, ContractSide side,
                                                    int stage);

nlohmann::json lattice_to_json(const ForwardPriceLattice& lattice);
void write_distribution_csv(int stage, const std::vector<ValuePoint>& values, std::ostream& out);

}  // namespace eqf
