// Deterministic fixtures and randomized instance generators shared by the
// unit and acceptance suites.
#pragma once

#include <random>

#include "eqforward/equilibrium.hpp"
#include "eqforward/scenario_model.hpp"

namespace eqf_test {

// Inverse standard normal CDF (Acklam's rational approximation), used to
// build deterministic lognormal-like quantile samples.
double inverse_normal_cdf(double p);

// Right-skewed single-period spot sample: K = 160 lognormal quantiles
// (median 15, sigma 1.1) in a fixed pseudo-shuffled order. Spot mass sits at
// low prices with a thin expensive tail, mimicking a hydro-dominated market.
eqf::ScenarioSet skewed_spot_fixture();

// Hydro-style generation profile against the skewed fixture: average level
// `scale * 100`, decreasing in the spot quantile (scarce water means high
// spot and low output).
eqf::ProfileSet skewed_generator_profile(double scale);

// Load profile with mean 100 MWh and mild scenario variation.
eqf::ProfileSet fixture_load_profile();

// One generator + one load market on the skewed fixture.
eqf::MarketConfig skewed_market(double gen_scale, double lambda_gen, double lambda_load,
                                double alpha);

// Randomized bounded market instances: 1-4 agents (first two are a generator
// and a load), lambda in [0, lambda_max], multi-period spots and profiles.
struct RandomMarketSpec {
    int K = 10;
    int M = 1;
    int extra_agents = 0;  // traders/generators/loads beyond the first two
    double lambda_max = 0.9;
    double alpha = 0.95;
    bool lambda_one_side_neutral = false;  // force lambda = 1 on one side
};

eqf::MarketConfig random_market(std::mt19937_64& rng, const RandomMarketSpec& spec);

// Price bracket guaranteed to straddle the equilibrium of `cfg`.
std::pair<double, double> sweep_bounds(const eqf::MarketConfig& cfg);

}  // namespace eqf_test
