#include "eqforward/lp.hpp"

#include "eqforward/errors.hpp"

namespace eqf::lp {

const char* to_string(Status s) {
    switch (s) {
        case Status::Optimal: return "optimal";
        case Status::Infeasible: return "infeasible";
        case Status::Unbounded: return "unbounded";
        case Status::IterationLimit: return "iteration_limit";
    }
    return "unknown";
}

int Problem::add_var(double lower_bound, double upper_bound, double obj, std::string name) {
    if (lower_bound > upper_bound)
        throw ValueError("variable lower bound exceeds upper bound");
    objective.push_back(obj);
    lower.push_back(lower_bound);
    upper.push_back(upper_bound);
    double init = 0.0;
    if (lower_bound > -kInf)
        init = lower_bound;
    else if (upper_bound < kInf)
        init = upper_bound;
    initial.push_back(init);
    var_names.push_back(std::move(name));
    return num_vars() - 1;
}

void Problem::set_initial_value(int var, double value) {
    initial.at(static_cast<size_t>(var)) = value;
}

int Problem::add_row(RowKind kind, std::span<const Term> terms, double rhs, std::string name) {
    for (const auto& [col, coeff] : terms) {
        if (col < 0 || col >= num_vars()) throw DimensionError("row term references unknown column");
        (void)coeff;
    }
    rows.push_back(Row{kind, std::vector<Term>(terms.begin(), terms.end()), rhs, std::move(name)});
    const int idx = num_rows() - 1;
    (kind == RowKind::Eq ? eq_rows : ineq_rows).push_back(idx);
    return idx;
}

int Problem::add_eq(std::span<const Term> terms, double rhs, std::string name) {
    return add_row(RowKind::Eq, terms, rhs, std::move(name));
}

int Problem::add_le(std::span<const Term> terms, double rhs, std::string name) {
    return add_row(RowKind::Le, terms, rhs, std::move(name));
}

double Solution::dual_for_row(const Problem& p, int row) const {
    const auto& r = p.rows.at(static_cast<size_t>(row));
    const auto& list = (r.kind == RowKind::Eq) ? p.eq_rows : p.ineq_rows;
    const auto& duals = (r.kind == RowKind::Eq) ? eq_duals : ineq_duals;
    for (size_t i = 0; i < list.size(); ++i)
        if (list[i] == row) return duals.at(i);
    throw DimensionError("row not found");
}

}  // namespace eqf::lp
