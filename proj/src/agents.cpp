#include "eqforward/agents.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "eqforward/errors.hpp"
#include "eqforward/util.hpp"

namespace eqf {

const char* to_string(AgentKind k) {
    switch (k) {
        case AgentKind::Generator: return "generator";
        case AgentKind::Load: return "load";
        case AgentKind::Trader: return "trader";
    }
    return "unknown";
}

AgentKind agent_kind_from_string(const std::string& s) {
    if (s == "generator") return AgentKind::Generator;
    if (s == "load") return AgentKind::Load;
    if (s == "trader") return AgentKind::Trader;
    throw ValueError("unknown agent kind '" + s + "'");
}

void AgentSpec::validate_against(const ScenarioSet& s) const {
    risk.validate();
    if (q_max && !(*q_max > 0.0)) throw ValueError("q_max must be > 0 (agent " + id + ")");
    if (kind == AgentKind::Trader) {
        if (profile) throw KindMismatchError("trader " + id + " must not carry a physical profile");
        return;
    }
    if (!profile)
        throw KindMismatchError(std::string(to_string(kind)) + " " + id + " needs a profile");
    if (profile->quantity.rows() != s.num_periods() || profile->quantity.cols() != s.num_scenarios())
        throw DimensionError("profile of agent " + id + " does not match the scenario set");
}

AgentTerms agent_terms(const AgentSpec& agent, const ScenarioSet& s, const ContractSpec& c) {
    agent.validate_against(s);
    AgentTerms t;
    t.weighted_spot = contract_weighted_spot(s, c);
    const int K = s.num_scenarios();
    switch (agent.kind) {
        case AgentKind::Generator:
            t.base_revenue = (s.spot().array() * agent.profile->quantity.array()).colwise().sum();
            break;
        case AgentKind::Load:
            t.base_revenue = -(s.spot().array() * agent.profile->quantity.array()).colwise().sum();
            break;
        case AgentKind::Trader:
            t.base_revenue = Eigen::VectorXd::Zero(K);
            break;
    }
    t.objective_const = agent.risk.lambda * t.base_revenue.sum() / static_cast<double>(K);
    return t;
}

double scenario_revenue(const AgentSpec& agent, const ScenarioSet& s, const ContractSpec& c,
                        double q_sell, double q_buy, int scenario) {
    if (q_sell < 0.0 || q_buy < 0.0) throw ValueError("contract quantities must be >= 0");
    if (q_sell > 0.0 && !agent.can_sell())
        throw KindMismatchError("agent " + agent.id + " cannot sell");
    if (q_buy > 0.0 && !agent.can_buy())
        throw KindMismatchError("agent " + agent.id + " cannot buy");
    const AgentTerms t = agent_terms(agent, s, c);
    return t.base_revenue[scenario] + (q_buy - q_sell) * t.weighted_spot[scenario];
}

lp::Problem build_agent_lp(const AgentSpec& agent, const ScenarioSet& s, const ContractSpec& c,
                           double price) {
    const AgentTerms t = agent_terms(agent, s, c);
    const int K = s.num_scenarios();
    const double lambda = agent.risk.lambda;
    const double total_shape = c.total_shape();
    const double tail_coeff =
        (1.0 - lambda) / (static_cast<double>(K) * (1.0 - agent.risk.alpha));
    const double cap = agent.q_max ? *agent.q_max : lp::kInf;

    lp::Problem p;
    int q_sell = -1, q_buy = -1;
    if (agent.can_sell()) q_sell = p.add_var(0.0, cap, price * total_shape, "q_sell");
    if (agent.can_buy()) q_buy = p.add_var(0.0, cap, -price * total_shape, "q_buy");
    const int threshold = p.add_var(-lp::kInf, lp::kInf, 1.0 - lambda, "threshold");
    p.set_initial_value(threshold, t.base_revenue.minCoeff());
    std::vector<int> rev(static_cast<size_t>(K)), tail(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k)
        rev[static_cast<size_t>(k)] =
            p.add_var(-lp::kInf, lp::kInf, lambda / K, "revenue_" + std::to_string(k + 1));
    for (int k = 0; k < K; ++k)
        tail[static_cast<size_t>(k)] =
            p.add_var(-lp::kInf, lp::kInf, tail_coeff, "shortfall_" + std::to_string(k + 1));

    // revenue definition: R_k - (q_buy - q_sell) w_k = base_k
    for (int k = 0; k < K; ++k) {
        std::vector<lp::Problem::Term> terms{{rev[static_cast<size_t>(k)], 1.0}};
        if (q_sell >= 0) terms.push_back({q_sell, t.weighted_spot[k]});
        if (q_buy >= 0) terms.push_back({q_buy, -t.weighted_spot[k]});
        p.add_eq(terms, t.base_revenue[k], "revenue_def_" + std::to_string(k + 1));
    }
    // y_k <= 0
    for (int k = 0; k < K; ++k) {
        const lp::Problem::Term terms[] = {{tail[static_cast<size_t>(k)], 1.0}};
        p.add_le(terms, 0.0, "shortfall_sign_" + std::to_string(k + 1));
    }
    // y_k <= R_k - threshold
    for (int k = 0; k < K; ++k) {
        const lp::Problem::Term terms[] = {
            {tail[static_cast<size_t>(k)], 1.0}, {rev[static_cast<size_t>(k)], -1.0}, {threshold, 1.0}};
        p.add_le(terms, 0.0, "shortfall_cover_" + std::to_string(k + 1));
    }
    return p;
}

AgentBlockVars append_reduced_block(lp::Problem& p, const AgentSpec& agent,
                                    const AgentTerms& terms, double price_coeff) {
    const int K = static_cast<int>(terms.base_revenue.size());
    const double lambda = agent.risk.lambda;
    const double mean_w = terms.weighted_spot.sum() / static_cast<double>(K);
    const double tail_coeff =
        (1.0 - lambda) / (static_cast<double>(K) * (1.0 - agent.risk.alpha));
    const double cap = agent.q_max ? *agent.q_max : lp::kInf;

    AgentBlockVars v;
    if (agent.can_sell())
        v.q_sell = p.add_var(0.0, cap, price_coeff - lambda * mean_w, agent.id + ".q_sell");
    if (agent.can_buy())
        v.q_buy = p.add_var(0.0, cap, lambda * mean_w - price_coeff, agent.id + ".q_buy");
    v.threshold = p.add_var(-lp::kInf, lp::kInf, 1.0 - lambda, agent.id + ".threshold");
    p.set_initial_value(v.threshold, terms.base_revenue.minCoeff());
    v.first_shortfall_var = p.num_vars();
    for (int k = 0; k < K; ++k) p.add_var(-lp::kInf, 0.0, tail_coeff);

    // y_k + (q_sell - q_buy) w_k + threshold <= base_k
    v.first_cover_row = p.num_ineq_rows();
    for (int k = 0; k < K; ++k) {
        std::vector<lp::Problem::Term> row{{v.first_shortfall_var + k, 1.0}, {v.threshold, 1.0}};
        if (v.q_sell >= 0) row.push_back({v.q_sell, terms.weighted_spot[k]});
        if (v.q_buy >= 0) row.push_back({v.q_buy, -terms.weighted_spot[k]});
        p.add_le(row, terms.base_revenue[k]);
    }
    return v;
}

AgentLpSolution read_block_solution(const lp::Problem& p, const lp::Solution& sol,
                                    const AgentSpec& agent, const AgentTerms& terms,
                                    const AgentBlockVars& vars) {
    const int K = static_cast<int>(terms.base_revenue.size());
    const double lambda = agent.risk.lambda;
    const double tail_coeff =
        (1.0 - lambda) / (static_cast<double>(K) * (1.0 - agent.risk.alpha));

    AgentLpSolution out;
    out.status = sol.status;
    if (sol.status != lp::Status::Optimal) return out;
    const auto x = [&](int j) { return sol.x[static_cast<size_t>(j)]; };
    out.q_sell = vars.q_sell >= 0 ? x(vars.q_sell) : 0.0;
    out.q_buy = vars.q_buy >= 0 ? x(vars.q_buy) : 0.0;
    out.threshold = x(vars.threshold);
    out.revenues = terms.base_revenue + (out.q_buy - out.q_sell) * terms.weighted_spot;
    out.shortfalls.resize(K);
    for (int k = 0; k < K; ++k) out.shortfalls[k] = x(vars.first_shortfall_var + k);

    out.duals.shortfall.resize(K);
    out.duals.nonpos.resize(K);
    out.duals.revenue.resize(K);
    for (int k = 0; k < K; ++k) {
        const double eta = sol.ineq_duals[static_cast<size_t>(vars.first_cover_row + k)];
        out.duals.shortfall[k] = eta;
        out.duals.revenue[k] = lambda / K + eta;
        out.duals.nonpos[k] = tail_coeff - eta;
    }
    const double tol = 1e-9;
    auto split_bound_dual = [&](int col, double& at_lower, double& at_cap) {
        if (col < 0) return;
        const double d = sol.reduced_costs[static_cast<size_t>(col)];
        const double lo = p.lower[static_cast<size_t>(col)];
        const double up = p.upper[static_cast<size_t>(col)];
        const double xv = sol.x[static_cast<size_t>(col)];
        if (xv <= lo + tol * (1.0 + std::fabs(lo)))
            at_lower = d;
        else if (up < lp::kInf && xv >= up - tol * (1.0 + std::fabs(up)))
            at_cap = d;
    };
    split_bound_dual(vars.q_sell, out.duals.sell_lower, out.duals.sell_cap);
    split_bound_dual(vars.q_buy, out.duals.buy_lower, out.duals.buy_cap);
    return out;
}

namespace {

// Second solve over the optimal face, minimizing total gross quantity; makes
// reported best responses deterministic when the optimum is a face.
bool refine_to_min_quantity(const lp::Problem& p, lp::Solution& sol,
                            std::span<const int> q_cols) {
    if (sol.status != lp::Status::Optimal) return false;
    double cscale = 1.0;
    for (double c : p.objective) cscale = std::max(cscale, std::fabs(c));
    bool face = false;
    for (int j = 0; j < p.num_vars() && !face; ++j) {
        const auto js = static_cast<size_t>(j);
        if (p.lower[js] == p.upper[js]) continue;
        const double xv = sol.x[js];
        const bool at_bound = xv <= p.lower[js] + 1e-9 * (1.0 + std::fabs(p.lower[js])) ||
                              (p.upper[js] < lp::kInf &&
                               xv >= p.upper[js] - 1e-9 * (1.0 + std::fabs(p.upper[js])));
        if (at_bound && std::fabs(sol.reduced_costs[js]) <= 1e-7 * cscale) face = true;
    }
    if (!face) return false;

    lp::Problem q = p;
    std::vector<lp::Problem::Term> obj_row;
    for (int j = 0; j < p.num_vars(); ++j)
        if (p.objective[static_cast<size_t>(j)] != 0.0)
            obj_row.push_back({j, -p.objective[static_cast<size_t>(j)]});
    const double slack = 1e-9 * std::max(1.0, std::fabs(sol.objective));
    q.add_le(obj_row, -(sol.objective - slack), "hold_optimum");
    for (double& c : q.objective) c = 0.0;
    for (int col : q_cols)
        if (col >= 0) q.objective[static_cast<size_t>(col)] = -1.0;
    const lp::Solution refined = lp::solve(q);
    if (refined.status != lp::Status::Optimal) return false;
    bool moved = false;
    for (int col : q_cols)
        if (col >= 0 &&
            std::fabs(refined.x[static_cast<size_t>(col)] - sol.x[static_cast<size_t>(col)]) >
                1e-7 * (1.0 + std::fabs(sol.x[static_cast<size_t>(col)])))
            moved = true;
    sol.x = refined.x;  // primal from the refined point, duals from the original
    return moved;
}

}  // namespace

AgentLpSolution solve_agent(const AgentSpec& agent, const ScenarioSet& s, const ContractSpec& c,
                            double price) {
    const AgentTerms terms = agent_terms(agent, s, c);
    lp::Problem p;
    const AgentBlockVars vars = append_reduced_block(p, agent, terms, price * c.total_shape());
    lp::Solution sol = lp::solve(p);
    if (sol.status == lp::Status::Unbounded) {
        AgentLpSolution out;
        out.status = sol.status;
        const double rs = vars.q_sell >= 0 ? sol.ray[static_cast<size_t>(vars.q_sell)] : 0.0;
        const double rb = vars.q_buy >= 0 ? sol.ray[static_cast<size_t>(vars.q_buy)] : 0.0;
        out.ray_net = rs - rb;
        return out;
    }
    if (sol.status != lp::Status::Optimal) {
        AgentLpSolution out;
        out.status = sol.status;
        return out;
    }
    const double optimum = sol.objective;
    const int qcols[] = {vars.q_sell, vars.q_buy};
    const bool moved = refine_to_min_quantity(p, sol, qcols);
    AgentLpSolution out = read_block_solution(p, sol, agent, terms, vars);
    out.surplus = optimum + terms.objective_const;
    out.alternate_optimum = moved;
    return out;
}

BestResponse best_response(const AgentSpec& agent, const ScenarioSet& s, const ContractSpec& c,
                           double price) {
    const AgentLpSolution sol = solve_agent(agent, s, c, price);
    if (sol.status == lp::Status::Unbounded) return BestResponse{0.0, ResponseStatus::Unbounded};
    if (sol.status != lp::Status::Optimal)
        throw NumericalError("best response LP ended with status " +
                             std::string(lp::to_string(sol.status)));
    switch (agent.kind) {
        case AgentKind::Generator: return BestResponse{sol.q_sell, ResponseStatus::Ok};
        case AgentKind::Load: return BestResponse{sol.q_buy, ResponseStatus::Ok};
        case AgentKind::Trader: return BestResponse{sol.q_sell - sol.q_buy, ResponseStatus::Ok};
    }
    throw Error("unreachable");
}

std::vector<CurvePoint> supply_demand_curves(std::span<const AgentSpec> agents,
                                             const ScenarioSet& s, const ContractSpec& c,
                                             std::span<const double> price_grid) {
    if (price_grid.empty()) throw ValueError("price grid is empty");
    for (size_t i = 1; i < price_grid.size(); ++i)
        if (!(price_grid[i] > price_grid[i - 1]))
            throw ValueError("price grid must be strictly increasing");

    std::vector<CurvePoint> curve(price_grid.size());
    for (size_t i = 0; i < price_grid.size(); ++i) {
        CurvePoint pt;
        pt.price = price_grid[i];
        for (const AgentSpec& agent : agents) {
            const AgentLpSolution sol = solve_agent(agent, s, c, pt.price);
            if (sol.status == lp::Status::Unbounded) {
                (sol.ray_net > 0.0 ? pt.supply_status : pt.demand_status) =
                    ResponseStatus::Unbounded;
                continue;
            }
            if (sol.status != lp::Status::Optimal)
                throw NumericalError("curve point LP ended with status " +
                                     std::string(lp::to_string(sol.status)));
            const double net = sol.q_sell - sol.q_buy;
            if (agent.kind == AgentKind::Trader) {
                (net >= 0.0 ? pt.supply : pt.demand) += std::fabs(net);
            } else {
                pt.supply += sol.q_sell;
                pt.demand += sol.q_buy;
            }
        }
        curve[i] = pt;
    }
    return curve;
}

void write_curves_csv(std::span<const CurvePoint> curve, std::ostream& out) {
    out << "price,supply,demand,supply_status,demand_status\n";
    for (const CurvePoint& pt : curve) {
        out << format_sig12(pt.price) << ',';
        if (pt.supply_status == ResponseStatus::Unbounded)
            out << "inf";
        else
            out << format_sig12(pt.supply);
        out << ',';
        if (pt.demand_status == ResponseStatus::Unbounded)
            out << "inf";
        else
            out << format_sig12(pt.demand);
        out << ',' << (pt.supply_status == ResponseStatus::Unbounded ? "unbounded" : "ok") << ','
            << (pt.demand_status == ResponseStatus::Unbounded ? "unbounded" : "ok") << '\n';
    }
}

}  // namespace eqf
