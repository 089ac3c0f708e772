// Fixed-format MPS dump of an LP, for cross-checking against external solvers.
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "eqforward/lp.hpp"
#include "eqforward/util.hpp"

namespace eqf::lp {

namespace {

std::string row_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "R%07d", i + 1);
    return buf;
}

std::string col_name(int j) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "C%07d", j + 1);
    return buf;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%-12.6g", v);
    return buf;
}

void field_line(std::ostream& out, const std::string& f1, const std::string& f2,
                const std::string& f3, const std::string& f4 = {}, const std::string& f5 = {},
                const std::string& f6 = {}) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), " %-2s %-8s  %-8s  %-12s  %-8s  %-12s", f1.c_str(), f2.c_str(),
                  f3.c_str(), f4.c_str(), f5.c_str(), f6.c_str());
    std::string line(buf);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
}

}  // namespace

void write_mps(const Problem& p, std::ostream& out, const std::string& model_name) {
    out << "NAME          " << model_name << '\n';
    out << "OBJSENSE\n    MAX\n";
    out << "ROWS\n";
    field_line(out, "N", "COST", "");
    for (int i = 0; i < p.num_rows(); ++i)
        field_line(out, p.rows[static_cast<size_t>(i)].kind == RowKind::Eq ? "E" : "L",
                   row_name(i), "");

    // column-major entries: objective first, then rows in order
    out << "COLUMNS\n";
    std::vector<std::vector<std::pair<int, double>>> by_col(static_cast<size_t>(p.num_vars()));
    for (int i = 0; i < p.num_rows(); ++i)
        for (const auto& [col, coeff] : p.rows[static_cast<size_t>(i)].terms)
            by_col[static_cast<size_t>(col)].emplace_back(i, coeff);
    for (int j = 0; j < p.num_vars(); ++j) {
        const auto js = static_cast<size_t>(j);
        std::vector<std::pair<std::string, double>> entries;
        if (p.objective[js] != 0.0) entries.emplace_back("COST", p.objective[js]);
        for (const auto& [row, coeff] : by_col[js])
            if (coeff != 0.0) entries.emplace_back(row_name(row), coeff);
        for (size_t t = 0; t < entries.size(); t += 2) {
            if (t + 1 < entries.size())
                field_line(out, "", col_name(j), entries[t].first, num(entries[t].second),
                           entries[t + 1].first, num(entries[t + 1].second));
            else
                field_line(out, "", col_name(j), entries[t].first, num(entries[t].second));
        }
        if (entries.empty()) field_line(out, "", col_name(j), "COST", num(0.0));
    }

    out << "RHS\n";
    for (int i = 0; i < p.num_rows(); ++i)
        if (p.rows[static_cast<size_t>(i)].rhs != 0.0)
            field_line(out, "", "RHS", row_name(i), num(p.rows[static_cast<size_t>(i)].rhs));

    out << "BOUNDS\n";
    for (int j = 0; j < p.num_vars(); ++j) {
        const auto js = static_cast<size_t>(j);
        const double lo = p.lower[js], up = p.upper[js];
        if (lo == 0.0 && up == kInf) continue;  // default bound
        if (lo == up) {
            field_line(out, "FX", "BND", col_name(j), num(lo));
            continue;
        }
        if (lo == -kInf && up == kInf) {
            field_line(out, "FR", "BND", col_name(j), "");
            continue;
        }
        if (lo == -kInf)
            field_line(out, "MI", "BND", col_name(j), "");
        else if (lo != 0.0)
            field_line(out, "LO", "BND", col_name(j), num(lo));
        if (up < kInf) field_line(out, "UP", "BND", col_name(j), num(up));
    }
    out << "ENDATA\n";

    // name map as trailing comments (generated names keep the fixed format strict)
    for (int i = 0; i < p.num_rows(); ++i)
        if (!p.rows[static_cast<size_t>(i)].name.empty())
            out << "* " << row_name(i) << " = " << p.rows[static_cast<size_t>(i)].name << '\n';
    for (int j = 0; j < p.num_vars(); ++j)
        if (!p.var_names[static_cast<size_t>(j)].empty())
            out << "* " << col_name(j) << " = " << p.var_names[static_cast<size_t>(j)] << '\n';
}

}  // namespace eqf::lp
