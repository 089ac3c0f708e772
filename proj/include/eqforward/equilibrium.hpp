// Competitive equilibrium of the contract market via welfare maximization.
//
// The multi-agent welfare LP sums every agent's risk-adjusted spot-surplus
// term (contract payments cancel against the balance constraint) and ties
// sellers to buyers through one balance equality. The equilibrium price is
// read off the balance-constraint dual: price = -dual / total_shape, which
// is the plain negated dual for a unit shape. An independent price-sweep
// bisection over best responses cross-checks the dual price.
#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "eqforward/agents.hpp"
#include "eqforward/lp.hpp"
#include "eqforward/scenario_model.hpp"
#include "json.hpp"

namespace eqf {

struct MarketConfig {
    ScenarioSet scenarios;
    ContractSpec contract;
    std::vector<AgentSpec> agents;

    void validate() const;
    MarketConfig restrict_to(std::span<const int> scenario_ids) const;
};

enum class EqStatus { Optimal, Degenerate, NoTrade, Unbounded, Infeasible };
const char* to_string(EqStatus s);

struct AgentOutcome {
    std::string id;
    AgentLpSolution solution;  // primal block, duals and surplus at the equilibrium
};

struct EquilibriumResult {
    EqStatus status = EqStatus::Optimal;
    double price = 0.0;     // reported price (bracket midpoint when NoTrade)
    double dual_price = 0.0;  // -balance_dual / total_shape, the correspondence price
    double quantity = 0.0;  // total cleared reference quantity
    double welfare = 0.0;
    double balance_dual = 0.0;
    std::array<double, 2> price_bracket{0.0, 0.0};  // shadow-price interval
    std::vector<AgentOutcome> per_agent;
    double lp_duality_gap_rel = 0.0;
    int lp_iterations = 0;
};

struct EquilibriumOptions {
    bool compute_bracket = true;
    // Bracket probe size factor: rhs is perturbed by eps_scale * max(1, q0).
    double eps_scale = 1e-4;
    // Bracket width (relative to max(1, |price|)) beyond which the dual is
    // considered non-unique.
    double degenerate_width = 1e-4;
    lp::SolveOptions lp;
};

// Full welfare LP with explicit revenue variables: per agent K revenue
// equalities and 2K tail inequalities, plus the labeled balance row
// "contract_balance". Objective carries no price term on any quantity.
lp::Problem build_welfare_lp(const MarketConfig& cfg);

// Index of the named row; -1 when absent.
int row_by_name(const lp::Problem& p, const std::string& name);

// Solves the market (reduced formulation), extracts the price from the
// balance dual, probes the shadow-price bracket by rhs perturbation and
// breaks primal ties toward the minimum total quantity.
EquilibriumResult solve_equilibrium(const MarketConfig& cfg, const EquilibriumOptions& opts = {});

struct SweepResult {
    double price = 0.0;
    double quantity = 0.0;
};

// Bisection on aggregate excess supply, independent of the welfare LP.
// Preconditions: excess(p_lo) <= 0 <= excess(p_hi); throws NoBracketError
// otherwise.
SweepResult price_sweep_oracle(const MarketConfig& cfg, double p_lo, double p_hi, double tol);

struct KktReport {
    double max_primal_residual = 0.0;
    double max_dual_residual = 0.0;
    double max_complementarity_residual = 0.0;
    double duality_gap = 0.0;
    // per-condition breakdown, keyed by condition family
    std::map<std::string, double> conditions;

    double worst() const;
    bool all_within(double tol) const { return worst() <= tol; }
};

// Evaluates the agent-level optimality systems at the equilibrium point with
// the duals carried in the result, and re-solves each agent at the
// correspondence price to confirm its surplus is a best-response value.
KktReport check_kkt(const MarketConfig& cfg, const EquilibriumResult& res);

nlohmann::json result_to_json(const EquilibriumResult& res, const KktReport* kkt = nullptr);

}  // namespace eqf
