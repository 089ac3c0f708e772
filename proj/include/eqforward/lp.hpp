// Dense linear programming: bounded-variable revised simplex with exact
// basic duals.
//
// Problems are stated as maximizations over variables with individual
// bounds, subject to equality rows (a.x = b) and inequality rows (a.x <= b).
// Optimal solutions carry the primal point, equality duals, inequality
// duals (>= 0 for a maximization) and reduced costs; the callers read
// shadow prices straight from these.
#pragma once

#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace eqf::lp {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

const char* to_string(Status s);

enum class RowKind { Eq, Le };

struct Problem {
    // One sparse term per (column, coefficient) pair.
    using Term = std::pair<int, double>;

    struct Row {
        RowKind kind;
        std::vector<Term> terms;
        double rhs = 0.0;
        std::string name;
    };

    // Returns the new column index.
    int add_var(double lower, double upper, double objective, std::string name = {});
    // Placement hint for free variables: where the variable starts when
    // nonbasic. Feasibility is unaffected; a good hint skips phase one.
    void set_initial_value(int var, double value);

    int add_row(RowKind kind, std::span<const Term> terms, double rhs, std::string name = {});
    int add_eq(std::span<const Term> terms, double rhs, std::string name = {});
    int add_le(std::span<const Term> terms, double rhs, std::string name = {});

    int num_vars() const { return static_cast<int>(objective.size()); }
    int num_rows() const { return static_cast<int>(rows.size()); }
    int num_eq_rows() const { return static_cast<int>(eq_rows.size()); }
    int num_ineq_rows() const { return static_cast<int>(ineq_rows.size()); }

    std::vector<double> objective;  // maximize objective . x
    std::vector<double> lower, upper;
    std::vector<double> initial;  // nonbasic placement hints
    std::vector<std::string> var_names;
    std::vector<Row> rows;
    std::vector<int> eq_rows;    // row indices of equality rows, insertion order
    std::vector<int> ineq_rows;  // row indices of inequality rows, insertion order
};

struct Solution {
    Status status = Status::Optimal;
    std::vector<double> x;       // primal values, one per variable
    double objective = 0.0;
    std::vector<double> eq_duals;    // one per equality row (insertion order)
    std::vector<double> ineq_duals;  // one per inequality row, >= 0 at optimum
    std::vector<double> reduced_costs;  // one per variable
    // Unbounded certificate: feasible direction with positive objective
    // growth, one entry per variable. Empty unless status == Unbounded.
    std::vector<double> ray;
    int iterations = 0;

    // Post-solve diagnostics (populated when status == Optimal).
    double max_primal_residual = 0.0;       // row-scaled
    double max_dual_violation = 0.0;        // reduced-cost sign violations
    double max_complementarity = 0.0;       // |reduced cost| on basic columns
    double duality_gap_rel = 0.0;           // |primal - dual| / max(1, |primal|)

    double dual_for_row(const Problem& p, int row) const;
};

struct SolveOptions {
    double feasibility_tol = 1e-7;
    double optimality_tol = 1e-7;
    double duality_gap_rel_tol = 1e-6;
    int refactor_interval = 50;       // LU refactorization cadence, in pivots
    int bland_after = 200;            // non-improving pivots before Bland's rule
    long max_iterations = 200000;
};

// Solves to optimality. Throws NumericalError when the factorization breaks
// down beyond recovery; infeasible/unbounded outcomes come back as statuses.
// Every Optimal result has strong duality and complementary slackness
// verified post-solve.
Solution solve(const Problem& p, const SolveOptions& opts = {});

// Fixed-format MPS dump (maximization is flagged with an OBJSENSE section).
// Generated 8-character names are used; original names follow in comments.
void write_mps(const Problem& p, std::ostream& out, const std::string& model_name = "EQFWD");

}  // namespace eqf::lp
