// Discrete uncertainty model: spot prices, agent profiles, contract shapes.
//
// A ScenarioSet holds K equally likely trajectories over M settlement
// periods. All downstream math treats trajectories as exchangeable with
// probability 1/K each.
#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace eqf {

enum class FileFormat { Csv, Json };

class ScenarioSet {
  public:
    // Validates and takes ownership. spot is periods x scenarios (M x K).
    // Negative entries are rejected unless allow_negative is set.
    static ScenarioSet create(Eigen::MatrixXd spot,
                              std::vector<std::string> period_labels = {},
                              bool allow_negative = false);

    int num_periods() const { return static_cast<int>(spot_.rows()); }
    int num_scenarios() const { return static_cast<int>(spot_.cols()); }
    double probability() const { return 1.0 / num_scenarios(); }

    const Eigen::MatrixXd& spot() const { return spot_; }
    // period is 1-based, scenario is 0-based throughout the library.
    double spot_at(int period, int scenario) const { return spot_(period - 1, scenario); }
    const std::vector<std::string>& period_labels() const { return labels_; }

    // New set holding only the given scenario columns (order preserved).
    ScenarioSet restrict_to(std::span<const int> scenarios) const;

  private:
    ScenarioSet() = default;
    Eigen::MatrixXd spot_;              // M x K
    std::vector<std::string> labels_;   // size M
};

struct ProfileSet {
    std::string agent_id;
    Eigen::MatrixXd quantity;  // M x K, entries >= 0

    static ProfileSet create(std::string agent_id, Eigen::MatrixXd quantity);
    ProfileSet restrict_to(std::span<const int> scenarios) const;
};

// Delivery-period subset plus nonnegative shape weights, one per delivery
// period. The shape distributes the contract reference quantity over the
// horizon; at least one entry must be strictly positive.
struct ContractSpec {
    std::vector<int> delivery_periods;  // 1-based, strictly increasing
    std::vector<double> shape;          // parallel to delivery_periods

    void validate() const;
    void validate_against(const ScenarioSet& s) const;
    // Sum of shape weights (total MWh delivered per unit reference quantity).
    double total_shape() const;
};

ScenarioSet load_scenarios(const std::filesystem::path& path, FileFormat format,
                           bool allow_negative = false);
void save_scenarios(const ScenarioSet& s, const std::filesystem::path& path, FileFormat format);

ProfileSet load_profile(const std::filesystem::path& path, std::string agent_id);

// Shape-weighted average spot over the delivery periods:
//   sum_k sum_m shape_m * spot_{m,k} / (K * sum_m shape_m).
// This is the risk-neutral reference price for the contract.
double shape_weighted_mean_spot(const ScenarioSet& s, const ContractSpec& c);

// Per-scenario shape-weighted spot sum_m shape_m * spot_{m,k}; the covector
// every contract settlement is priced against.
Eigen::VectorXd contract_weighted_spot(const ScenarioSet& s, const ContractSpec& c);

}  // namespace eqf
