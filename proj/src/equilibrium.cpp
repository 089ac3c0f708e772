#include "eqforward/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eqforward/errors.hpp"
#include "eqforward/util.hpp"

namespace eqf {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double spot_term(const AgentLpSolution& sol, const AgentSpec& agent, int K) {
    const double lambda = agent.risk.lambda;
    const double tail_coeff =
        (1.0 - lambda) / (static_cast<double>(K) * (1.0 - agent.risk.alpha));
    return lambda * sol.revenues.sum() / static_cast<double>(K) +
           (1.0 - lambda) * sol.threshold + tail_coeff * sol.shortfalls.sum();
}

struct Assembly {
    lp::Problem problem;
    std::vector<AgentTerms> terms;
    std::vector<AgentBlockVars> vars;
    int balance_row = -1;
    double objective_const = 0.0;
};

Assembly assemble_reduced(const MarketConfig& cfg) {
    Assembly a;
    for (const AgentSpec& agent : cfg.agents) {
        a.terms.push_back(agent_terms(agent, cfg.scenarios, cfg.contract));
        a.vars.push_back(append_reduced_block(a.problem, agent, a.terms.back(), 0.0));
        a.objective_const += a.terms.back().objective_const;
    }
    std::vector<lp::Problem::Term> balance;
    for (const AgentBlockVars& v : a.vars) {
        if (v.q_sell >= 0) balance.push_back({v.q_sell, 1.0});
        if (v.q_buy >= 0) balance.push_back({v.q_buy, -1.0});
    }
    a.balance_row = a.problem.add_eq(balance, 0.0, "contract_balance");
    return a;
}

// Primal-face handling at the welfare optimum: when alternate optima are
// possible, re-solve for the minimum-total-quantity point (the reported
// one) and probe the maximum to learn whether the cleared quantity is
// actually determined.
struct FaceProbe {
    bool face_suspected = false;
    bool quantity_ambiguous = false;
};

FaceProbe refine_welfare_primal(const Assembly& a, lp::Solution& sol) {
    FaceProbe out;
    double cscale = 1.0;
    for (double c : a.problem.objective) cscale = std::max(cscale, std::fabs(c));
    for (int j = 0; j < a.problem.num_vars() && !out.face_suspected; ++j) {
        const auto js = static_cast<size_t>(j);
        if (a.problem.lower[js] == a.problem.upper[js]) continue;
        const double xv = sol.x[js];
        const bool at_bound =
            xv <= a.problem.lower[js] + 1e-9 * (1.0 + std::fabs(a.problem.lower[js])) ||
            (a.problem.upper[js] < lp::kInf &&
             xv >= a.problem.upper[js] - 1e-9 * (1.0 + std::fabs(a.problem.upper[js])));
        if (at_bound && std::fabs(sol.reduced_costs[js]) <= 1e-7 * cscale)
            out.face_suspected = true;
    }
    if (!out.face_suspected) return out;

    lp::Problem q = a.problem;
    std::vector<lp::Problem::Term> hold;
    for (int j = 0; j < q.num_vars(); ++j)
        if (q.objective[static_cast<size_t>(j)] != 0.0)
            hold.push_back({j, -q.objective[static_cast<size_t>(j)]});
    const double slack = 1e-9 * std::max(1.0, std::fabs(sol.objective));
    q.add_le(hold, -(sol.objective - slack), "hold_optimum");
    for (double& c : q.objective) c = 0.0;
    for (const AgentBlockVars& v : a.vars) {
        if (v.q_sell >= 0) q.objective[static_cast<size_t>(v.q_sell)] = -1.0;
        if (v.q_buy >= 0) q.objective[static_cast<size_t>(v.q_buy)] = -1.0;
    }
    const lp::Solution qmin = lp::solve(q);
    if (qmin.status != lp::Status::Optimal) return out;

    lp::Problem qmax_p = q;
    for (double& c : qmax_p.objective) c = -c;
    const lp::Solution qmax = lp::solve(qmax_p);
    if (qmax.status == lp::Status::Unbounded) {
        out.quantity_ambiguous = true;
    } else if (qmax.status == lp::Status::Optimal) {
        // qmin minimizes total gross quantity (objective -sum q), qmax
        // maximizes it. The held-optimum slack lets the point wiggle a
        // little even at a unique vertex; only spans beyond that count.
        const double q_low = -qmin.objective, q_high = qmax.objective;
        out.quantity_ambiguous = q_high - q_low > 1e-4 * (1.0 + q_low);
    }
    sol.x = qmin.x;
    return out;
}

}  // namespace

void MarketConfig::validate() const {
    contract.validate_against(scenarios);
    bool seller = false, buyer = false;
    std::vector<std::string> seen;
    for (const AgentSpec& agent : agents) {
        agent.validate_against(scenarios);
        if (std::find(seen.begin(), seen.end(), agent.id) != seen.end())
            throw ConfigError("duplicate agent id '" + agent.id + "'");
        seen.push_back(agent.id);
        seller = seller || agent.can_sell();
        buyer = buyer || agent.can_buy();
    }
    if (!seller || !buyer)
        throw ConfigError("market needs at least one selling-capable and one buying-capable agent");
}

MarketConfig MarketConfig::restrict_to(std::span<const int> scenario_ids) const {
    MarketConfig out{scenarios.restrict_to(scenario_ids), contract, agents};
    for (AgentSpec& agent : out.agents)
        if (agent.profile) agent.profile = agent.profile->restrict_to(scenario_ids);
    return out;
}

const char* to_string(EqStatus s) {
    switch (s) {
        case EqStatus::Optimal: return "optimal";
        case EqStatus::Degenerate: return "degenerate";
        case EqStatus::NoTrade: return "no_trade";
        case EqStatus::Unbounded: return "unbounded";
        case EqStatus::Infeasible: return "infeasible";
    }
    return "unknown";
}

int row_by_name(const lp::Problem& p, const std::string& name) {
    for (int i = 0; i < p.num_rows(); ++i)
        if (p.rows[static_cast<size_t>(i)].name == name) return i;
    return -1;
}

lp::Problem build_welfare_lp(const MarketConfig& cfg) {
    cfg.validate();
    lp::Problem p;
    std::vector<std::pair<int, int>> q_cols;  // (q_sell, q_buy) per agent
    for (const AgentSpec& agent : cfg.agents) {
        // full agent block at zero price: contract payments cancel in welfare
        lp::Problem block = build_agent_lp(agent, cfg.scenarios, cfg.contract, 0.0);
        const int base = p.num_vars();
        for (int j = 0; j < block.num_vars(); ++j) {
            const auto js = static_cast<size_t>(j);
            const int col = p.add_var(block.lower[js], block.upper[js], block.objective[js],
                                      agent.id + "." + block.var_names[js]);
            p.set_initial_value(col, block.initial[js]);
        }
        for (const auto& row : block.rows) {
            std::vector<lp::Problem::Term> terms;
            for (const auto& [col, coeff] : row.terms) terms.push_back({col + base, coeff});
            p.add_row(row.kind, terms, row.rhs, agent.id + "." + row.name);
        }
        int qs = -1, qb = -1, off = 0;
        if (agent.can_sell()) qs = base + off++;
        if (agent.can_buy()) qb = base + off;
        q_cols.emplace_back(qs, qb);
    }
    std::vector<lp::Problem::Term> balance;
    for (const auto& [qs, qb] : q_cols) {
        if (qs >= 0) balance.push_back({qs, 1.0});
        if (qb >= 0) balance.push_back({qb, -1.0});
    }
    p.add_eq(balance, 0.0, "contract_balance");
    return p;
}

EquilibriumResult solve_equilibrium(const MarketConfig& cfg, const EquilibriumOptions& opts) {
    cfg.validate();
    const int K = cfg.scenarios.num_scenarios();
    const double total_shape = cfg.contract.total_shape();

    Assembly a = assemble_reduced(cfg);
    lp::Solution sol = lp::solve(a.problem, opts.lp);

    EquilibriumResult res;
    res.lp_iterations = sol.iterations;
    if (sol.status == lp::Status::Unbounded) {
        res.status = EqStatus::Unbounded;
        res.price = res.dual_price = res.quantity = res.welfare = kNan;
        return res;
    }
    if (sol.status != lp::Status::Optimal) {
        res.status = EqStatus::Infeasible;
        res.price = res.dual_price = res.quantity = res.welfare = kNan;
        return res;
    }

    const double welfare_obj = sol.objective;
    const FaceProbe face = refine_welfare_primal(a, sol);
    res.welfare = welfare_obj + a.objective_const;
    res.lp_duality_gap_rel = sol.duality_gap_rel;
    res.balance_dual = sol.dual_for_row(a.problem, a.balance_row);
    res.dual_price = -res.balance_dual / total_shape;

    double q_total = 0.0;
    for (size_t i = 0; i < cfg.agents.size(); ++i) {
        AgentOutcome outcome;
        outcome.id = cfg.agents[i].id;
        outcome.solution =
            read_block_solution(a.problem, sol, cfg.agents[i], a.terms[i], a.vars[i]);
        outcome.solution.alternate_optimum = face.quantity_ambiguous;
        q_total += outcome.solution.q_sell;
        res.per_agent.push_back(std::move(outcome));
    }
    res.quantity = q_total;

    // Shadow-price bracket from objective differences under rhs perturbation.
    double p_left = -lp::kInf, p_right = lp::kInf;
    if (opts.compute_bracket) {
        const double eps = opts.eps_scale * std::max(1.0, res.quantity);
        std::array<double, 2> shifted{kNan, kNan};  // welfare at rhs +eps, -eps
        parallel_for(2, [&](int side) {
            lp::Problem probe = a.problem;
            probe.rows[static_cast<size_t>(a.balance_row)].rhs = side == 0 ? eps : -eps;
            const lp::Solution psol = lp::solve(probe, opts.lp);
            if (psol.status == lp::Status::Optimal)
                shifted[static_cast<size_t>(side)] = psol.objective;
        });
        if (std::isfinite(shifted[0]))
            p_right = -(shifted[0] - welfare_obj) / (eps * total_shape);
        if (std::isfinite(shifted[1]))
            p_left = -(welfare_obj - shifted[1]) / (eps * total_shape);
        // concavity gives p_left <= dual_price <= p_right up to solver noise
        const double pad = 1e-9 * std::max(1.0, std::fabs(res.dual_price));
        p_left = std::min(p_left - pad, res.dual_price);
        p_right = std::max(p_right + pad, res.dual_price);
    } else {
        p_left = p_right = res.dual_price;
    }
    res.price_bracket = {p_left, p_right};

    const double width = p_right - p_left;
    const bool wide = !std::isfinite(width) ||
                      width > opts.degenerate_width * std::max(1.0, std::fabs(res.dual_price));
    const bool no_trade = res.quantity <= 1e-7 * (1.0 + res.quantity);

    res.price = res.dual_price;
    if (no_trade && wide) {
        res.status = EqStatus::NoTrade;
        if (std::isfinite(width)) res.price = 0.5 * (p_left + p_right);
    } else if (wide || face.quantity_ambiguous) {
        res.status = EqStatus::Degenerate;
    } else {
        res.status = EqStatus::Optimal;
    }

    // surpluses at the correspondence price (price terms vanish when q = 0)
    for (size_t i = 0; i < cfg.agents.size(); ++i) {
        AgentLpSolution& s = res.per_agent[i].solution;
        s.surplus = spot_term(s, cfg.agents[i], K) +
                    (s.q_sell - s.q_buy) * res.dual_price * total_shape;
    }
    return res;
}

SweepResult price_sweep_oracle(const MarketConfig& cfg, double p_lo, double p_hi, double tol) {
    cfg.validate();
    if (!(p_hi >= p_lo)) throw ValueError("sweep needs p_lo <= p_hi");
    if (!(tol > 0.0)) throw ValueError("sweep tolerance must be > 0");

    struct Point {
        double excess;
        double supply, demand;
    };
    auto evaluate = [&](double price) {
        Point pt{0.0, 0.0, 0.0};
        for (const AgentSpec& agent : cfg.agents) {
            const AgentLpSolution s = solve_agent(agent, cfg.scenarios, cfg.contract, price);
            if (s.status == lp::Status::Unbounded) {
                pt.excess = s.ray_net > 0 ? lp::kInf : -lp::kInf;
                return pt;
            }
            if (s.status != lp::Status::Optimal)
                throw NumericalError("sweep best-response LP status " +
                                     std::string(lp::to_string(s.status)));
            pt.excess += s.q_sell - s.q_buy;
            pt.supply += s.q_sell;
            pt.demand += s.q_buy;
        }
        return pt;
    };

    const Point lo_pt = evaluate(p_lo);
    const Point hi_pt = evaluate(p_hi);
    if (lo_pt.excess > 0.0 || hi_pt.excess < 0.0)
        throw NoBracketError("excess supply does not change sign over [" +
                             format_sig12(p_lo) + ", " + format_sig12(p_hi) + "]");

    double lo = p_lo, hi = p_hi;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const Point mp = evaluate(mid);
        if (mp.excess >= 0.0)
            hi = mid;
        else
            lo = mid;
    }
    const double price = 0.5 * (lo + hi);
    const Point fp = evaluate(price);
    SweepResult out;
    out.price = price;
    out.quantity = std::isfinite(fp.excess) ? std::max(fp.supply, fp.demand) : kNan;
    return out;
}

double KktReport::worst() const {
    double w = std::max(std::max(max_primal_residual, max_dual_residual),
                        std::max(max_complementarity_residual, duality_gap));
    for (const auto& [name, v] : conditions) w = std::max(w, v);
    return w;
}

KktReport check_kkt(const MarketConfig& cfg, const EquilibriumResult& res) {
    if (res.status == EqStatus::Unbounded || res.status == EqStatus::Infeasible)
        throw ConfigError("KKT check needs a solved equilibrium");
    const int K = cfg.scenarios.num_scenarios();
    const double V = cfg.contract.total_shape();
    const double p0 = res.dual_price;

    KktReport rep;
    auto& cond = rep.conditions;
    auto raise = [&](const std::string& key, double v) {
        auto [it, inserted] = cond.emplace(key, v);
        if (!inserted) it->second = std::max(it->second, v);
    };

    double q_sell_total = 0.0, q_buy_total = 0.0, q_abs = 0.0;
    for (size_t i = 0; i < cfg.agents.size(); ++i) {
        const AgentSpec& agent = cfg.agents[i];
        const AgentLpSolution& s = res.per_agent[i].solution;
        const AgentTerms terms = agent_terms(agent, cfg.scenarios, cfg.contract);
        const double lambda = agent.risk.lambda;
        const double tail_coeff =
            (1.0 - lambda) / (static_cast<double>(K) * (1.0 - agent.risk.alpha));

        q_sell_total += s.q_sell;
        q_buy_total += s.q_buy;
        q_abs += s.q_sell + s.q_buy;

        raise("quantity_nonneg", std::max(0.0, -s.q_sell) + std::max(0.0, -s.q_buy));

        double sum_eta = 0.0, wdot_theta = 0.0, dual_obj = 0.0;
        for (int k = 0; k < K; ++k) {
            const double w = terms.weighted_spot[k];
            const double base = terms.base_revenue[k];
            const double R = s.revenues[k], y = s.shortfalls[k];
            const double theta = s.duals.revenue[k], eta = s.duals.shortfall[k],
                         gamma = s.duals.nonpos[k];
            sum_eta += eta;
            wdot_theta += w * theta;
            dual_obj += theta * base;

            raise("revenue_definition",
                  std::fabs(R - base - (s.q_buy - s.q_sell) * w) /
                      (1.0 + std::fabs(base) + std::fabs((s.q_buy - s.q_sell) * w)));
            raise("shortfall_nonpos", std::max(0.0, y) / (1.0 + std::fabs(y)));
            raise("shortfall_cover", std::max(0.0, y - R + s.threshold) /
                                         (1.0 + std::fabs(R) + std::fabs(s.threshold)));
            raise("stationarity_revenue",
                  std::fabs(lambda / K - theta + eta) / std::max(1.0 / K, std::fabs(theta)));
            raise("stationarity_shortfall",
                  std::fabs(tail_coeff - gamma - eta) / std::max(tail_coeff, 1.0 / K));
            raise("dual_sign", std::max(0.0, -eta) / (1.0 + eta));
            raise("dual_sign", std::max(0.0, -gamma) / (1.0 + std::fabs(gamma)));
            raise("complementarity", std::fabs(gamma * y) / (1.0 + std::fabs(gamma) + std::fabs(y)));
            raise("complementarity", std::fabs(eta * (y - R + s.threshold)) /
                                         (1.0 + std::fabs(eta) + std::fabs(y - R + s.threshold)));
        }
        raise("stationarity_threshold",
              std::fabs((1.0 - lambda) - sum_eta) / (1.0 + (1.0 - lambda) + sum_eta));

        // price stationarity, in $/MWh units
        if (agent.can_sell()) {
            raise("stationarity_quantity",
                  std::fabs(p0 * V - wdot_theta - s.duals.sell_lower - s.duals.sell_cap) / V);
            raise("dual_sign", std::max(0.0, s.duals.sell_lower));
            raise("dual_sign", std::max(0.0, -s.duals.sell_cap));
            raise("complementarity",
                  std::fabs(s.duals.sell_lower * s.q_sell) /
                      (1.0 + std::fabs(s.duals.sell_lower) + s.q_sell));
            if (agent.q_max) {
                dual_obj += s.duals.sell_cap * *agent.q_max;
                raise("complementarity", std::fabs(s.duals.sell_cap * (*agent.q_max - s.q_sell)) /
                                             (1.0 + std::fabs(s.duals.sell_cap)));
            }
        }
        if (agent.can_buy()) {
            raise("stationarity_quantity",
                  std::fabs(-p0 * V + wdot_theta - s.duals.buy_lower - s.duals.buy_cap) / V);
            raise("dual_sign", std::max(0.0, s.duals.buy_lower));
            raise("dual_sign", std::max(0.0, -s.duals.buy_cap));
            raise("complementarity", std::fabs(s.duals.buy_lower * s.q_buy) /
                                         (1.0 + std::fabs(s.duals.buy_lower) + s.q_buy));
            if (agent.q_max) {
                dual_obj += s.duals.buy_cap * *agent.q_max;
                raise("complementarity", std::fabs(s.duals.buy_cap * (*agent.q_max - s.q_buy)) /
                                             (1.0 + std::fabs(s.duals.buy_cap)));
            }
        }

        // primal-dual equality at the agent level
        raise("agent_strong_duality",
              std::fabs(dual_obj - s.surplus) /
                  std::max({1.0, std::fabs(dual_obj), std::fabs(s.surplus)}));

        // behavioral restatement: the recorded surplus is a best-response value
        const AgentLpSolution fresh = solve_agent(agent, cfg.scenarios, cfg.contract, p0);
        if (fresh.status == lp::Status::Optimal)
            raise("best_response_gap",
                  std::fabs(fresh.surplus - s.surplus) / std::max(1.0, std::fabs(fresh.surplus)));
        else
            raise("best_response_gap", lp::kInf);
    }
    raise("balance", std::fabs(q_sell_total - q_buy_total) / (1.0 + q_abs));

    rep.max_primal_residual =
        std::max({cond["revenue_definition"], cond["quantity_nonneg"], cond["shortfall_nonpos"],
                  cond["shortfall_cover"], cond["balance"]});
    rep.max_dual_residual =
        std::max({cond["stationarity_revenue"], cond["stationarity_threshold"],
                  cond["stationarity_shortfall"], cond["stationarity_quantity"], cond["dual_sign"]});
    rep.max_complementarity_residual = cond["complementarity"];
    rep.duality_gap = std::max(res.lp_duality_gap_rel, cond["agent_strong_duality"]);
    return rep;
}

nlohmann::json result_to_json(const EquilibriumResult& res, const KktReport* kkt) {
    nlohmann::json j;
    j["status"] = to_string(res.status);
    auto num = [](double v) -> nlohmann::json {
        if (!std::isfinite(v)) return nullptr;
        return round_sig12(v);
    };
    j["price"] = num(res.price);
    j["quantity"] = num(res.quantity);
    j["welfare"] = num(res.welfare);
    j["balance_dual"] = num(res.balance_dual);
    j["bracket"] = {num(res.price_bracket[0]), num(res.price_bracket[1])};
    auto agents = nlohmann::json::array();
    for (const AgentOutcome& a : res.per_agent) {
        agents.push_back({{"id", a.id},
                          {"q_sell", num(a.solution.q_sell)},
                          {"q_buy", num(a.solution.q_buy)},
                          {"surplus", num(a.solution.surplus)}});
    }
    j["agents"] = std::move(agents);
    if (kkt) {
        nlohmann::json k;
        k["max_primal_residual"] = num(kkt->max_primal_residual);
        k["max_dual_residual"] = num(kkt->max_dual_residual);
        k["max_complementarity_residual"] = num(kkt->max_complementarity_residual);
        k["duality_gap"] = num(kkt->duality_gap);
        for (const auto& [name, v] : kkt->conditions) k["conditions"][name] = num(v);
        j["kkt"] = std::move(k);
    }
    return j;
}

}  // namespace eqf
