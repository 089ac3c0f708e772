#include "eqforward/scenario_tree.hpp"

#include <algorithm>
#include <cmath>

#include "eqforward/errors.hpp"
#include "eqforward/util.hpp"

namespace eqf {

const char* to_string(ClusterStat s) {
    switch (s) {
        case ClusterStat::MeanSpot: return "mean_spot";
        case ClusterStat::SumSpot: return "sum_spot";
        case ClusterStat::Custom: return "custom";
    }
    return "unknown";
}

ClusterStat cluster_stat_from_string(const std::string& s) {
    if (s == "mean_spot") return ClusterStat::MeanSpot;
    if (s == "sum_spot") return ClusterStat::SumSpot;
    if (s == "custom") return ClusterStat::Custom;
    throw ValueError("unknown cluster statistic '" + s + "'");
}

void TreeTopologySpec::validate(const ScenarioSet& s) const {
    if (stages.empty()) throw TopologyError("tree needs at least one stage");
    for (const TreeStageSpec& st : stages) {
        if (st.branching < 1) throw TopologyError("branching factors must be >= 1");
        if (st.periods.empty()) throw TopologyError("stage period set is empty");
        for (int m : st.periods)
            if (m < 1 || m > s.num_periods())
                throw TopologyError("stage period " + std::to_string(m) + " outside 1.." +
                                    std::to_string(s.num_periods()));
    }
    if (stat == ClusterStat::Custom && !custom)
        throw TopologyError("custom cluster statistic selected but no hook supplied");
}

namespace {

double stage_stat(const ScenarioSet& s, const TreeTopologySpec& spec, const TreeStageSpec& st,
                  int k) {
    switch (spec.stat) {
        case ClusterStat::Custom:
            return spec.custom(s, st.periods, k);
        case ClusterStat::MeanSpot:
        case ClusterStat::SumSpot: {
            double acc = 0.0;
            for (int m : st.periods) acc += s.spot_at(m, k);
            if (spec.stat == ClusterStat::MeanSpot) acc /= static_cast<double>(st.periods.size());
            return acc;
        }
    }
    throw Error("unreachable");
}

}  // namespace

ScenarioTree build_tree(const ScenarioSet& s, const TreeTopologySpec& spec) {
    spec.validate(s);
    const int K = s.num_scenarios();

    ScenarioTree tree;
    TreeNode root;
    root.id = 0;
    root.stage = 0;
    root.members.resize(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) root.members[static_cast<size_t>(k)] = k;
    tree.nodes.push_back(std::move(root));
    tree.stage_nodes.push_back({0});
    tree.stage_specs = spec.stages;

    for (size_t t = 0; t < spec.stages.size(); ++t) {
        const TreeStageSpec& st = spec.stages[t];
        std::vector<int> stage_ids;
        for (int parent_id : tree.stage_nodes[t]) {
            // Sorting mutates member order inside the split only; the node
            // keeps its members ascending for determinism.
            std::vector<int> ordered = tree.nodes[static_cast<size_t>(parent_id)].members;
            const int count = static_cast<int>(ordered.size());
            if (count < st.branching)
                throw TopologyError("stage " + std::to_string(t + 1) + ": node with " +
                                    std::to_string(count) + " members cannot branch into " +
                                    std::to_string(st.branching));
            std::stable_sort(ordered.begin(), ordered.end(), [&](int a, int b) {
                const double sa = stage_stat(s, spec, st, a), sb = stage_stat(s, spec, st, b);
                if (sa != sb) return sa < sb;
                return a < b;
            });
            // equal-count split: sizes differ by at most one, larger first
            const int base = count / st.branching;
            const int rem = count % st.branching;
            int offset = 0;
            for (int child = 0; child < st.branching; ++child) {
                const int size = base + (child < rem ? 1 : 0);
                TreeNode node;
                node.id = static_cast<int>(tree.nodes.size());
                node.stage = static_cast<int>(t) + 1;
                node.parent = parent_id;
                node.members.assign(ordered.begin() + offset, ordered.begin() + offset + size);
                std::sort(node.members.begin(), node.members.end());
                node.prob_from_parent = static_cast<double>(size) / count;
                node.path_prob = static_cast<double>(size) / K;
                offset += size;
                tree.nodes[static_cast<size_t>(parent_id)].children.push_back(node.id);
                stage_ids.push_back(node.id);
                tree.nodes.push_back(std::move(node));
            }
        }
        tree.stage_nodes.push_back(std::move(stage_ids));
    }
    return tree;
}

ForwardPriceLattice forward_price_lattice(const ScenarioTree& tree, const MarketConfig& cfg,
                                          const ContractSpec& target) {
    target.validate_against(cfg.scenarios);
    // Delivery must not precede the information the tree has already revealed.
    if (!tree.stage_specs.empty()) {
        int last_stage_period = 0;
        for (int m : tree.stage_specs.back().periods)
            last_stage_period = std::max(last_stage_period, m);
        if (target.delivery_periods.front() < last_stage_period)
            throw TopologyError("target delivery starts at period " +
                                std::to_string(target.delivery_periods.front()) +
                                ", before the final clustering stage (period " +
                                std::to_string(last_stage_period) + ")");
    }

    ForwardPriceLattice lattice;
    lattice.tree = tree;
    lattice.target = target;
    lattice.prices.resize(tree.nodes.size());

    const int n = static_cast<int>(tree.nodes.size());
    parallel_for(n, [&](int i) {
        const TreeNode& node = tree.nodes[static_cast<size_t>(i)];
        NodePrice np;
        np.node_id = node.id;
        try {
            MarketConfig sub = cfg.restrict_to(node.members);
            sub.contract = target;
            const EquilibriumResult res = solve_equilibrium(sub);
            np.price = res.price;
            np.quantity = res.quantity;
            np.status = res.status;
        } catch (const std::exception& e) {
            np.status = EqStatus::Infeasible;
            np.error = e.what();
        }
        lattice.prices[static_cast<size_t>(i)] = std::move(np);
    });
    return lattice;
}

std::vector<PricePoint> price_distribution(const ForwardPriceLattice& lattice, int stage) {
    if (stage < 0 || stage >= lattice.tree.num_stages())
        throw ValueError("stage " + std::to_string(stage) + " outside the tree");
    std::vector<PricePoint> out;
    for (int id : lattice.tree.stage_nodes[static_cast<size_t>(stage)]) {
        const NodePrice& np = lattice.prices[static_cast<size_t>(id)];
        out.push_back(PricePoint{id, np.price, lattice.tree.nodes[static_cast<size_t>(id)].path_prob});
    }
    return out;
}

std::vector<ValuePoint> contract_value_distribution(const ForwardPriceLattice& lattice,
                                                    double established_price, ContractSide side,
                                                    int stage) {
    std::vector<ValuePoint> out;
    for (const PricePoint& pt : price_distribution(lattice, stage)) {
        ValuePoint v;
        v.node_id = pt.node_id;
        v.price = pt.price;
        v.probability = pt.probability;
        v.value = side == ContractSide::Sell ? established_price - pt.price
                                             : pt.price - established_price;
        out.push_back(v);
    }
    return out;
}

nlohmann::json lattice_to_json(const ForwardPriceLattice& lattice) {
    nlohmann::json nodes = nlohmann::json::array();
    for (size_t i = 0; i < lattice.tree.nodes.size(); ++i) {
        const TreeNode& n = lattice.tree.nodes[i];
        const NodePrice& np = lattice.prices[i];
        nlohmann::json j{{"id", n.id},
                         {"stage", n.stage},
                         {"parent", n.parent},
                         {"prob_from_parent", round_sig12(n.prob_from_parent)},
                         {"path_prob", round_sig12(n.path_prob)},
                         {"n_members", n.members.size()},
                         {"status", to_string(np.status)}};
        j["price"] = std::isfinite(np.price) ? nlohmann::json(round_sig12(np.price))
                                             : nlohmann::json(nullptr);
        if (!np.error.empty()) j["error"] = np.error;
        nodes.push_back(std::move(j));
    }
    return nlohmann::json{{"nodes", std::move(nodes)}};
}

void write_distribution_csv(int stage, const std::vector<ValuePoint>& values, std::ostream& out) {
    out << "stage,node,price,probability,value\n";
    for (const ValuePoint& v : values)
        out << stage << ',' << v.node_id << ',' << format_sig12(v.price) << ','
            << format_sig12(v.probability) << ',' << format_sig12(v.value) << '\n';
}

}  // namespace eqf
