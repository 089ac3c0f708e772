#include "eqforward/risk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "eqforward/lp.hpp"

namespace eqf {

namespace {

void check_sample(std::span<const double> sample, double alpha) {
    if (sample.empty()) throw EmptySampleError("CVaR of an empty sample");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ValueError("alpha must lie in [0, 1)");
}

}  // namespace

double cvar_sorted(std::span<const double> sample, double alpha) {
    check_sample(sample, alpha);
    const auto K = sample.size();
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());

    // tail mass in scenario units; the fractional part weights one extra value
    const double c = static_cast<double>(K) * (1.0 - alpha);
    const auto whole = static_cast<size_t>(std::min(std::floor(c), static_cast<double>(K)));
    const double frac = c - static_cast<double>(whole);

    double acc = std::accumulate(sorted.begin(), sorted.begin() + static_cast<long>(whole), 0.0);
    if (frac > 0.0 && whole < K) acc += frac * sorted[whole];
    return acc / c;
}

CvarLpResult cvar_rockafellar(std::span<const double> sample, double alpha) {
    check_sample(sample, alpha);
    const int K = static_cast<int>(sample.size());
    const double tail_weight = 1.0 / (static_cast<double>(K) * (1.0 - alpha));

    // max  a + sum_k y_k / (K (1 - alpha))
    // s.t. y_k <= sample_k - a,  y_k <= 0
    lp::Problem p;
    const int a = p.add_var(-lp::kInf, lp::kInf, 1.0, "threshold");
    std::vector<int> y(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k)
        y[static_cast<size_t>(k)] = p.add_var(-lp::kInf, 0.0, tail_weight);
    const double lowest = *std::min_element(sample.begin(), sample.end());
    p.set_initial_value(a, lowest);
    for (int k = 0; k < K; ++k) {
        const lp::Problem::Term terms[] = {{y[static_cast<size_t>(k)], 1.0}, {a, 1.0}};
        p.add_le(terms, sample[static_cast<size_t>(k)]);
    }
    const lp::Solution sol = lp::solve(p);
    if (sol.status != lp::Status::Optimal)
        throw NumericalError("CVaR LP did not solve to optimality");

    // smallest maximizer: the ceil(c)-th order statistic
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double c = static_cast<double>(K) * (1.0 - alpha);
    auto idx = static_cast<size_t>(std::ceil(c));
    idx = std::min(std::max<size_t>(idx, 1), sample.size());
    return CvarLpResult{sol.objective, sorted[idx - 1]};
}

double risk_adjusted(std::span<const double> sample, const RiskParams& params) {
    params.validate();
    if (sample.empty()) throw EmptySampleError("risk adjustment of an empty sample");
    const double mean =
        std::accumulate(sample.begin(), sample.end(), 0.0) / static_cast<double>(sample.size());
    if (params.lambda == 1.0) return mean;
    return params.lambda * mean + (1.0 - params.lambda) * cvar_sorted(sample, params.alpha);
}

}  // namespace eqf
