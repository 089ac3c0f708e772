// Market agents: risk-adjusted surplus LPs, best-response quantities and
// supply/demand curves at a given contract price.
//
// Revenue convention: the spot-settlement component of an agent's revenue is
// kept separate from the deterministic contract payment, so risk is applied
// to the spot sample only and the contract term enters the objective as a
// plain linear term.
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eqforward/lp.hpp"
#include "eqforward/risk.hpp"
#include "eqforward/scenario_model.hpp"

namespace eqf {

enum class AgentKind { Generator, Load, Trader };

const char* to_string(AgentKind k);
AgentKind agent_kind_from_string(const std::string& s);

struct AgentSpec {
    std::string id;
    AgentKind kind = AgentKind::Generator;
    RiskParams risk;
    // Physical profile: generation for generators, consumption for loads.
    // Traders carry none.
    std::optional<ProfileSet> profile;
    std::optional<double> q_max;  // cap on the contract reference quantity

    bool can_sell() const { return kind != AgentKind::Load; }
    bool can_buy() const { return kind != AgentKind::Generator; }
    void validate_against(const ScenarioSet& s) const;
};

// Spot-settlement revenue of one scenario at the given contract position
// (contract payment excluded). Non-delivery periods settle the full profile.
double scenario_revenue(const AgentSpec& agent, const ScenarioSet& s, const ContractSpec& c,
                        double q_sell, double q_buy, int scenario);

// Full LP of the agent's risk-adjusted surplus at contract price p:
// variables {q, threshold, R_k, y_k}, revenue-definition equalities and the
// two tail inequality families.
lp::Problem build_agent_lp(const AgentSpec& agent, const ScenarioSet& s, const ContractSpec& c,
                           double price);

struct AgentDuals {
    Eigen::VectorXd revenue;    // one per revenue-definition equality
    Eigen::VectorXd shortfall;  // tail-cover inequality duals, >= 0
    Eigen::VectorXd nonpos;     // y <= 0 duals, >= 0
    double sell_lower = 0.0, sell_cap = 0.0;  // reduced costs at the q_sell bounds
    double buy_lower = 0.0, buy_cap = 0.0;
};

struct AgentLpSolution {
    lp::Status status = lp::Status::Optimal;
    double q_sell = 0.0, q_buy = 0.0;
    double threshold = 0.0;       // CVaR threshold variable at optimum
    double surplus = 0.0;         // risk-adjusted objective incl. contract term
    Eigen::VectorXd revenues;     // per-scenario spot revenue at the optimum
    Eigen::VectorXd shortfalls;   // per-scenario tail variables, <= 0
    AgentDuals duals;
    double ray_net = 0.0;         // net-quantity direction when unbounded
    bool alternate_optimum = false;  // optimum was a face; minimum-q point reported
};

// Solves the agent's surplus problem at price p (internally in a reduced
// formulation that substitutes the revenue equalities away; optima and duals
// match the full LP). Ties in q are broken toward the minimum quantity.
AgentLpSolution solve_agent(const AgentSpec& agent, const ScenarioSet& s, const ContractSpec& c,
                            double price);

enum class ResponseStatus { Ok, Unbounded };

struct BestResponse {
    double quantity = 0.0;  // q_sell for sellers, q_buy for buyers, net for traders
    ResponseStatus status = ResponseStatus::Ok;
};

BestResponse best_response(const AgentSpec& agent, const ScenarioSet& s, const ContractSpec& c,
                           double price);

struct CurvePoint {
    double price = 0.0;
    double supply = 0.0, demand = 0.0;
    ResponseStatus supply_status = ResponseStatus::Ok;
    ResponseStatus demand_status = ResponseStatus::Ok;
};

// Aggregate best responses over a strictly increasing price grid. Unbounded
// sides are flagged, never clipped.
std::vector<CurvePoint> supply_demand_curves(std::span<const AgentSpec> agents,
                                             const ScenarioSet& s, const ContractSpec& c,
                                             std::span<const double> price_grid);

void write_curves_csv(std::span<const CurvePoint> curve, std::ostream& out);

// --- assembly pieces shared with the equilibrium module ---

struct AgentTerms {
    Eigen::VectorXd weighted_spot;  // w_k: shape-weighted delivery spot per scenario
    Eigen::VectorXd base_revenue;   // spot revenue at zero contract quantity
    double objective_const = 0.0;   // lambda/K * sum_k base_k, dropped by the reduced form
};

AgentTerms agent_terms(const AgentSpec& agent, const ScenarioSet& s, const ContractSpec& c);

struct AgentBlockVars {
    int q_sell = -1, q_buy = -1;
    int threshold = -1;
    int first_shortfall_var = -1;  // K consecutive y columns
    int first_cover_row = -1;      // K consecutive tail-cover rows
};

// Appends the reduced agent block (variables q, threshold, y and the K
// tail-cover rows) to an LP under assembly; price_coeff adds the contract
// payment term on the q columns (zero for welfare assembly).
AgentBlockVars append_reduced_block(lp::Problem& p, const AgentSpec& agent,
                                    const AgentTerms& terms, double price_coeff);

// Maps an LP solution of a problem containing a reduced block back to agent
// primal values and duals.
AgentLpSolution read_block_solution(const lp::Problem& p, const lp::Solution& sol,
                                    const AgentSpec& agent, const AgentTerms& terms,
                                    const AgentBlockVars& vars);

}  // namespace eqf
