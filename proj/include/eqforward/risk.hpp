// Discrete-sample CVaR and the lambda-blended risk-adjusted value.
//
// Convention: CVaR here is the expected value of the worst (1 - alpha)
// probability mass of a revenue sample (left tail). With K equally likely
// values and tail mass c = K * (1 - alpha), the closed form averages the
// floor(c) worst values plus a fractional weight on the next one, so the
// measure is continuous in alpha. Alpha = 0 gives the plain mean.
#pragma once

#include <span>

#include "eqforward/errors.hpp"

namespace eqf {

struct RiskParams {
    double lambda = 1.0;  // weight on the expected value; 1 = risk neutral
    double alpha = 0.95;  // CVaR confidence level, in [0, 1)

    void validate() const {
        if (!(lambda >= 0.0 && lambda <= 1.0))
            throw ValueError("lambda must lie in [0, 1]");
        if (!(alpha >= 0.0 && alpha < 1.0))
            throw ValueError("alpha must lie in [0, 1)");
    }
};

// Closed-form CVaR by sorting; the independent reference route.
double cvar_sorted(std::span<const double> sample, double alpha);

struct CvarLpResult {
    double value;      // CVaR of the sample
    double threshold;  // maximizing threshold (smallest maximizer; the VaR quantile)
};

// CVaR via its threshold/shortfall linear program. Agrees with cvar_sorted
// to 1e-9 absolute; exercised as the LP-route cross-check.
CvarLpResult cvar_rockafellar(std::span<const double> sample, double alpha);

// lambda * mean + (1 - lambda) * CVaR_alpha.
double risk_adjusted(std::span<const double> sample, const RiskParams& params);

}  // namespace eqf
