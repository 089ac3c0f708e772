#include "support/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace eqf_test {

double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p outside (0,1)");
    // Acklam's rational approximation, |relative error| < 1.15e-9.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1.0 - plow;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > phigh) {
        q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

namespace {

constexpr int kFixtureK = 160;

// quantile position of scenario k under the fixed pseudo-shuffle (77 is
// coprime with 160, so the map is a bijection)
double fixture_quantile(int k) {
    const int slot = (k * 77) % kFixtureK;
    return (static_cast<double>(slot) + 0.5) / kFixtureK;
}

// second and third bijections (multipliers 53 and 91), decorrelated from the
// spot ordering; they drive load-size and hydrology variation
double fixture_quantile_load(int k) {
    const int slot = (k * 53) % kFixtureK;
    return (static_cast<double>(slot) + 0.5) / kFixtureK;
}

double fixture_quantile_hydro(int k) {
    const int slot = (k * 91) % kFixtureK;
    return (static_cast<double>(slot) + 0.5) / kFixtureK;
}

}  // namespace

eqf::ScenarioSet skewed_spot_fixture() {
    Eigen::MatrixXd spot(1, kFixtureK);
    const double mu = std::log(15.0), sigma = 1.1;
    for (int k = 0; k < kFixtureK; ++k)
        spot(0, k) = std::exp(mu + sigma * inverse_normal_cdf(fixture_quantile(k)));
    return eqf::ScenarioSet::create(std::move(spot), {"y1"});
}

eqf::ProfileSet skewed_generator_profile(double scale) {
    // output falls with the spot quantile (scarcity drives prices up) and
    // carries independent hydrology noise, so the generator's worst-case set
    // differs from a pure top-spot tail
    Eigen::MatrixXd g(1, kFixtureK);
    for (int k = 0; k < kFixtureK; ++k)
        g(0, k) = scale * 100.0 * (1.35 - 0.7 * fixture_quantile(k)) *
                  (0.75 + 0.5 * fixture_quantile_hydro(k));
    return eqf::ProfileSet::create("gen", std::move(g));
}

eqf::ProfileSet fixture_load_profile() {
    // mean 100 with +-15% scenario variation, so the demand curve is strictly
    // decreasing instead of perfectly elastic at the tail valuation
    Eigen::MatrixXd d(1, kFixtureK);
    for (int k = 0; k < kFixtureK; ++k)
        d(0, k) = 100.0 * (0.85 + 0.3 * fixture_quantile_load(k));
    return eqf::ProfileSet::create("load", std::move(d));
}

eqf::MarketConfig skewed_market(double gen_scale, double lambda_gen, double lambda_load,
                                double alpha) {
    eqf::MarketConfig cfg{skewed_spot_fixture(), eqf::ContractSpec{{1}, {1.0}}, {}};
    eqf::AgentSpec gen;
    gen.id = "gen";
    gen.kind = eqf::AgentKind::Generator;
    gen.risk = eqf::RiskParams{lambda_gen, alpha};
    gen.profile = skewed_generator_profile(gen_scale);
    eqf::AgentSpec load;
    load.id = "load";
    load.kind = eqf::AgentKind::Load;
    load.risk = eqf::RiskParams{lambda_load, alpha};
    load.profile = fixture_load_profile();
    cfg.agents = {std::move(gen), std::move(load)};
    return cfg;
}

eqf::MarketConfig random_market(std::mt19937_64& rng, const RandomMarketSpec& spec) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int K = spec.K, M = spec.M;

    Eigen::MatrixXd spot(M, K);
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < K; ++k)
            spot(m, k) = std::exp(std::log(20.0) + 0.9 * inverse_normal_cdf(
                                                             0.5 * unit(rng) + 0.5 * unit(rng)));
    eqf::ScenarioSet scenarios = eqf::ScenarioSet::create(std::move(spot));

    // contract over a random suffix of periods, mildly uneven shape
    const int first = 1 + static_cast<int>(unit(rng) * M) % M;
    std::vector<int> periods;
    std::vector<double> shape;
    for (int m = first; m <= M; ++m) {
        periods.push_back(m);
        shape.push_back(0.25 + 1.75 * unit(rng));
    }
    eqf::ContractSpec contract{periods, shape};

    auto profile = [&](const std::string& id) {
        Eigen::MatrixXd q(M, K);
        for (int m = 0; m < M; ++m)
            for (int k = 0; k < K; ++k) q(m, k) = 0.5 + 2.5 * unit(rng);
        return eqf::ProfileSet::create(id, std::move(q));
    };
    auto lambda_of = [&] { return spec.lambda_max * unit(rng); };

    eqf::MarketConfig cfg{std::move(scenarios), std::move(contract), {}};
    eqf::AgentSpec gen;
    gen.id = "g1";
    gen.kind = eqf::AgentKind::Generator;
    gen.risk = eqf::RiskParams{lambda_of(), spec.alpha};
    gen.profile = profile("g1");
    eqf::AgentSpec load;
    load.id = "d1";
    load.kind = eqf::AgentKind::Load;
    load.risk = eqf::RiskParams{lambda_of(), spec.alpha};
    load.profile = profile("d1");
    if (spec.lambda_one_side_neutral) {
        if (unit(rng) < 0.5)
            gen.risk.lambda = 1.0;
        else
            load.risk.lambda = 1.0;
    }
    cfg.agents.push_back(std::move(gen));
    cfg.agents.push_back(std::move(load));

    for (int extra = 0; extra < spec.extra_agents; ++extra) {
        eqf::AgentSpec a;
        const double pick = unit(rng);
        a.id = "x" + std::to_string(extra + 1);
        a.risk = eqf::RiskParams{lambda_of(), spec.alpha};
        if (pick < 0.4) {
            a.kind = eqf::AgentKind::Trader;
            if (unit(rng) < 0.5) a.q_max = 0.5 + 4.0 * unit(rng);
        } else if (pick < 0.7) {
            a.kind = eqf::AgentKind::Generator;
            a.profile = profile(a.id);
        } else {
            a.kind = eqf::AgentKind::Load;
            a.profile = profile(a.id);
        }
        cfg.agents.push_back(std::move(a));
    }
    return cfg;
}

std::pair<double, double> sweep_bounds(const eqf::MarketConfig& cfg) {
    const Eigen::VectorXd w = eqf::contract_weighted_spot(cfg.scenarios, cfg.contract);
    const double v = cfg.contract.total_shape();
    return {w.minCoeff() / v - 1.0, w.maxCoeff() / v + 1.0};
}

}  // namespace eqf_test
