#include "eqforward/scenario_model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "eqforward/errors.hpp"
#include "eqforward/util.hpp"
#include "json.hpp"

namespace eqf {

namespace {

std::string trim(std::string_view sv) {
    size_t b = 0, e = sv.size();
    while (b < e && std::isspace(static_cast<unsigned char>(sv[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(sv[e - 1]))) --e;
    return std::string(sv.substr(b, e - b));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

int parse_index(const std::string& tok, const std::string& what, int line_no) {
    int v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size())
        throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " '" + tok + "'");
    if (v < 1)
        throw ParseError("line " + std::to_string(line_no) + ": " + what + " must be >= 1, got " + tok);
    return v;
}

double parse_value(const std::string& tok, const std::string& what, int line_no) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || tok.empty() || !std::isfinite(v))
        throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " '" + tok + "'");
    return v;
}

struct GridFile {
    Eigen::MatrixXd values;  // M x K
    std::vector<std::string> labels;
};

// Shared reader for the scenario/profile CSV grid layout:
//   optional "# periods: a,b,c" metadata, header "scenario,period,<value>",
//   one row per (scenario, period) cell, 1-based indices.
GridFile load_grid_csv(const std::filesystem::path& path, const std::string& value_column) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());

    std::string line;
    int line_no = 0;
    std::vector<std::string> labels;
    bool header_seen = false;
    std::map<std::pair<int, int>, double> cells;  // (period, scenario) -> value
    int max_k = 0, max_m = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            const std::string key = "# periods:";
            if (t.rfind(key, 0) == 0) {
                labels.clear();
                for (auto& lab : split_csv_line(t.substr(key.size())))
                    if (!lab.empty()) labels.push_back(lab);
            }
            continue;
        }
        auto fields = split_csv_line(t);
        if (!header_seen) {
            if (fields.size() != 3 || fields[0] != "scenario" || fields[1] != "period" ||
                fields[2] != value_column)
                throw ParseError(path.string() + ": expected header 'scenario,period," +
                                 value_column + "', got '" + t + "'");
            header_seen = true;
            continue;
        }
        if (fields.size() != 3)
            throw ParseError("line " + std::to_string(line_no) + ": expected 3 fields, got " +
                             std::to_string(fields.size()));
        const int k = parse_index(fields[0], "scenario index", line_no);
        const int m = parse_index(fields[1], "period index", line_no);
        const double v = parse_value(fields[2], value_column, line_no);
        if (!cells.emplace(std::make_pair(m, k), v).second)
            throw ParseError("line " + std::to_string(line_no) + ": duplicate cell scenario=" +
                             std::to_string(k) + " period=" + std::to_string(m));
        max_k = std::max(max_k, k);
        max_m = std::max(max_m, m);
    }
    if (!header_seen) throw ParseError(path.string() + ": missing header");
    if (max_k == 0 || max_m == 0) throw DimensionError(path.string() + ": no data rows");
    if (static_cast<long>(cells.size()) != static_cast<long>(max_k) * max_m) {
        for (int m = 1; m <= max_m; ++m)
            for (int k = 1; k <= max_k; ++k)
                if (!cells.count({m, k}))
                    throw DimensionError(path.string() + ": missing cell scenario=" +
                                         std::to_string(k) + " period=" + std::to_string(m));
    }
    if (!labels.empty() && static_cast<int>(labels.size()) != max_m)
        throw ParseError(path.string() + ": periods metadata lists " +
                         std::to_string(labels.size()) + " labels for " + std::to_string(max_m) +
                         " periods");

    GridFile g;
    g.values.resize(max_m, max_k);
    for (const auto& [key, v] : cells) g.values(key.first - 1, key.second - 1) = v;
    g.labels = std::move(labels);
    return g;
}

std::vector<std::string> default_labels(int m) {
    std::vector<std::string> labels(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) labels[static_cast<size_t>(i)] = std::to_string(i + 1);
    return labels;
}

}  // namespace

ScenarioSet ScenarioSet::create(Eigen::MatrixXd spot, std::vector<std::string> period_labels,
                                bool allow_negative) {
    if (spot.rows() < 1 || spot.cols() < 1)
        throw DimensionError("scenario set needs at least one period and one scenario");
    if (!spot.allFinite()) throw ValueError("spot matrix contains non-finite entries");
    if (!allow_negative && (spot.array() < 0.0).any())
        throw ValueError("negative spot price rejected (pass allow_negative to accept)");
    if (period_labels.empty()) period_labels = default_labels(static_cast<int>(spot.rows()));
    if (static_cast<long>(period_labels.size()) != spot.rows())
        throw DimensionError("period label count does not match period count");
    ScenarioSet s;
    s.spot_ = std::move(spot);
    s.labels_ = std::move(period_labels);
    return s;
}

ScenarioSet ScenarioSet::restrict_to(std::span<const int> scenarios) const {
    if (scenarios.empty()) throw DimensionError("scenario restriction must be nonempty");
    Eigen::MatrixXd sub(spot_.rows(), static_cast<long>(scenarios.size()));
    for (size_t j = 0; j < scenarios.size(); ++j) {
        const int k = scenarios[j];
        if (k < 0 || k >= num_scenarios())
            throw DimensionError("scenario index " + std::to_string(k) + " out of range");
        sub.col(static_cast<long>(j)) = spot_.col(k);
    }
    ScenarioSet s;
    s.spot_ = std::move(sub);
    s.labels_ = labels_;
    return s;
}

ProfileSet ProfileSet::create(std::string agent_id, Eigen::MatrixXd quantity) {
    if (quantity.rows() < 1 || quantity.cols() < 1)
        throw DimensionError("profile needs at least one period and one scenario");
    if (!quantity.allFinite()) throw ValueError("profile contains non-finite entries");
    if ((quantity.array() < 0.0).any())
        throw ValueError("profile quantities must be nonnegative (agent " + agent_id + ")");
    return ProfileSet{std::move(agent_id), std::move(quantity)};
}

ProfileSet ProfileSet::restrict_to(std::span<const int> scenarios) const {
    Eigen::MatrixXd sub(quantity.rows(), static_cast<long>(scenarios.size()));
    for (size_t j = 0; j < scenarios.size(); ++j) sub.col(static_cast<long>(j)) = quantity.col(scenarios[j]);
    return ProfileSet{agent_id, std::move(sub)};
}

void ContractSpec::validate() const {
    if (delivery_periods.empty()) throw ValueError("contract delivery period set is empty");
    for (size_t i = 0; i < delivery_periods.size(); ++i) {
        if (delivery_periods[i] < 1) throw ValueError("delivery periods are 1-based");
        if (i > 0 && delivery_periods[i] <= delivery_periods[i - 1])
            throw ValueError("delivery periods must be strictly increasing");
    }
    if (shape.size() != delivery_periods.size())
        throw DimensionError("shape vector length must match delivery period count");
    bool positive = false;
    for (double v : shape) {
        if (!std::isfinite(v) || v < 0.0) throw ValueError("shape weights must be finite and >= 0");
        if (v > 0.0) positive = true;
    }
    if (!positive) throw ValueError("shape vector needs at least one strictly positive entry");
}

void ContractSpec::validate_against(const ScenarioSet& s) const {
    validate();
    if (delivery_periods.back() > s.num_periods())
        throw DimensionError("delivery period " + std::to_string(delivery_periods.back()) +
                             " exceeds scenario horizon M=" + std::to_string(s.num_periods()));
}

double ContractSpec::total_shape() const {
    double v = 0.0;
    for (double x : shape) v += x;
    return v;
}

ScenarioSet load_scenarios(const std::filesystem::path& path, FileFormat format,
                           bool allow_negative) {
    if (format == FileFormat::Csv) {
        GridFile g = load_grid_csv(path, "spot");
        return ScenarioSet::create(std::move(g.values), std::move(g.labels), allow_negative);
    }
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("scenarios") || !j["scenarios"].is_array())
        throw ParseError(path.string() + ": expected object with 'scenarios' array");
    const auto& rows = j["scenarios"];
    const int K = static_cast<int>(rows.size());
    if (K == 0) throw DimensionError(path.string() + ": empty scenario list");
    const int M = static_cast<int>(rows[0].size());
    Eigen::MatrixXd spot(M, K);
    for (int k = 0; k < K; ++k) {
        if (static_cast<int>(rows[k].size()) != M)
            throw DimensionError(path.string() + ": scenario " + std::to_string(k + 1) +
                                 " has " + std::to_string(rows[k].size()) + " periods, expected " +
                                 std::to_string(M));
        for (int m = 0; m < M; ++m) {
            if (!rows[k][m].is_number())
                throw ParseError(path.string() + ": non-numeric spot entry");
            spot(m, k) = rows[k][m].get<double>();
        }
    }
    std::vector<std::string> labels;
    if (j.contains("periods")) {
        for (const auto& p : j["periods"])
            labels.push_back(p.is_string() ? p.get<std::string>() : p.dump());
    }
    return ScenarioSet::create(std::move(spot), std::move(labels), allow_negative);
}

void save_scenarios(const ScenarioSet& s, const std::filesystem::path& path, FileFormat format) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    if (format == FileFormat::Csv) {
        out << "# periods:";
        for (size_t i = 0; i < s.period_labels().size(); ++i)
            out << (i == 0 ? " " : ",") << s.period_labels()[i];
        out << "\nscenario,period,spot\n";
        for (int k = 0; k < s.num_scenarios(); ++k)
            for (int m = 1; m <= s.num_periods(); ++m)
                out << (k + 1) << ',' << m << ',' << format_exact(s.spot_at(m, k)) << '\n';
        return;
    }
    // JSON: keep exact values by emitting doubles directly (nlohmann round-trips).
    nlohmann::json j;
    j["periods"] = s.period_labels();
    auto rows = nlohmann::json::array();
    for (int k = 0; k < s.num_scenarios(); ++k) {
        auto row = nlohmann::json::array();
        for (int m = 1; m <= s.num_periods(); ++m) row.push_back(s.spot_at(m, k));
        rows.push_back(std::move(row));
    }
    j["scenarios"] = std::move(rows);
    out << j.dump(2) << '\n';
}

ProfileSet load_profile(const std::filesystem::path& path, std::string agent_id) {
    GridFile g = load_grid_csv(path, "quantity");
    return ProfileSet::create(std::move(agent_id), std::move(g.values));
}

Eigen::VectorXd contract_weighted_spot(const ScenarioSet& s, const ContractSpec& c) {
    c.validate_against(s);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(s.num_scenarios());
    for (size_t i = 0; i < c.delivery_periods.size(); ++i)
        w += c.shape[i] * s.spot().row(c.delivery_periods[i] - 1).transpose();
    return w;
}

double shape_weighted_mean_spot(const ScenarioSet& s, const ContractSpec& c) {
    const Eigen::VectorXd w = contract_weighted_spot(s, c);
    return w.sum() / (static_cast<double>(s.num_scenarios()) * c.total_shape());
}

}  // namespace eqf
