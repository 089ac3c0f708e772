// Bounded-variable revised simplex with a dense LU basis factorization,
// product-form eta updates between refactorizations, Dantzig pricing and a
// Bland fallback against cycling.
#include <lapacke.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "eqforward/errors.hpp"
#include "eqforward/lp.hpp"

namespace eqf::lp {

namespace {

constexpr double kPivotTol = 1e-9;

enum class VarState : unsigned char { Basic, AtLower, AtUpper, FreeNonbasic };

struct SparseCol {
    std::vector<int> row;
    std::vector<double> val;
};

class Simplex {
  public:
    Simplex(const Problem& p, const SolveOptions& opts) : p_(p), opts_(opts) { build(); }

    Solution run();

  private:
    const Problem& p_;
    SolveOptions opts_;

    int m_ = 0;       // rows
    int nstruct_ = 0; // structural columns
    int ncols_ = 0;   // structural + slack + artificial
    std::vector<SparseCol> cols_;
    std::vector<double> lo_, up_, x_, cost_, phase1_cost_;
    std::vector<double> b_;
    std::vector<VarState> state_;
    std::vector<int> basis_;          // column basic in each row position
    std::vector<int> slack_of_row_;   // -1 when none
    std::vector<int> artificials_;

    // Basis factorization: either the initial +/-1 diagonal or a dense
    // partial-pivot LU (LAPACK dgetrf), plus the product-form eta file
    // accumulated since the last refactorization.
    bool diag_base_ = true;
    Eigen::VectorXd base_diag_;
    Eigen::MatrixXd lu_factors_;
    std::vector<lapack_int> lu_ipiv_;
    struct Eta {
        int r;
        Eigen::VectorXd w;
    };
    std::vector<Eta> etas_;

    bool bland_ = false;
    int stall_count_ = 0;
    long iterations_ = 0;

    void build();
    void place_nonbasic_initial();
    void compute_basic_values();
    void refactor();
    void ftran(Eigen::VectorXd& v) const;
    void btran(Eigen::VectorXd& v) const;
    Eigen::VectorXd column_dense(int j) const;
    Eigen::VectorXd duals(const std::vector<double>& cost) const;
    double reduced_cost(int j, const Eigen::VectorXd& y, const std::vector<double>& cost) const;
    double objective_value(const std::vector<double>& cost) const;

    // One phase of simplex iterations on the given cost vector. Returns
    // Optimal when priced out, Unbounded with the ray filled otherwise.
    Status iterate(const std::vector<double>& cost, std::vector<double>* ray_out);

    Solution extract(Status status, std::vector<double> ray);
    void post_checks(Solution& sol);
};

void Simplex::build() {
    m_ = p_.num_rows();
    nstruct_ = p_.num_vars();
    cols_.resize(static_cast<size_t>(nstruct_));
    lo_ = p_.lower;
    up_ = p_.upper;
    cost_ = p_.objective;
    b_.resize(static_cast<size_t>(m_));
    slack_of_row_.assign(static_cast<size_t>(m_), -1);

    for (int i = 0; i < m_; ++i) {
        const auto& row = p_.rows[static_cast<size_t>(i)];
        b_[static_cast<size_t>(i)] = row.rhs;
        for (const auto& [col, coeff] : row.terms) {
            if (coeff == 0.0) continue;
            cols_[static_cast<size_t>(col)].row.push_back(i);
            cols_[static_cast<size_t>(col)].val.push_back(coeff);
        }
    }
    // slacks for inequality rows
    for (int i = 0; i < m_; ++i) {
        if (p_.rows[static_cast<size_t>(i)].kind != RowKind::Le) continue;
        SparseCol sc;
        sc.row.push_back(i);
        sc.val.push_back(1.0);
        cols_.push_back(std::move(sc));
        lo_.push_back(0.0);
        up_.push_back(kInf);
        cost_.push_back(0.0);
        slack_of_row_[static_cast<size_t>(i)] = static_cast<int>(cols_.size()) - 1;
    }
    ncols_ = static_cast<int>(cols_.size());
    x_.assign(static_cast<size_t>(ncols_), 0.0);
    state_.assign(static_cast<size_t>(ncols_), VarState::AtLower);
    basis_.assign(static_cast<size_t>(m_), -1);
}

void Simplex::place_nonbasic_initial() {
    for (int j = 0; j < ncols_; ++j) {
        const auto js = static_cast<size_t>(j);
        if (lo_[js] > -kInf) {
            x_[js] = lo_[js];
            state_[js] = VarState::AtLower;
        } else if (up_[js] < kInf) {
            x_[js] = up_[js];
            state_[js] = VarState::AtUpper;
        } else {
            x_[js] = (j < nstruct_) ? p_.initial[js] : 0.0;
            state_[js] = VarState::FreeNonbasic;
        }
    }
}

Eigen::VectorXd Simplex::column_dense(int j) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m_);
    const auto& c = cols_[static_cast<size_t>(j)];
    for (size_t t = 0; t < c.row.size(); ++t) v[c.row[t]] = c.val[t];
    return v;
}

void Simplex::ftran(Eigen::VectorXd& v) const {
    if (diag_base_) {
        v.array() /= base_diag_.array();
    } else {
        LAPACKE_dgetrs(LAPACK_COL_MAJOR, 'N', m_, 1, lu_factors_.data(), m_, lu_ipiv_.data(),
                       v.data(), m_);
    }
    for (const auto& e : etas_) {
        const double piv = v[e.r] / e.w[e.r];
        if (piv != 0.0) v -= piv * e.w;
        v[e.r] = piv;
    }
}

void Simplex::btran(Eigen::VectorXd& v) const {
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
        const double vr = v[it->r];
        const double dot = it->w.dot(v) - it->w[it->r] * vr;
        v[it->r] = (vr - dot) / it->w[it->r];
    }
    if (diag_base_) {
        v.array() /= base_diag_.array();
    } else {
        LAPACKE_dgetrs(LAPACK_COL_MAJOR, 'T', m_, 1, lu_factors_.data(), m_, lu_ipiv_.data(),
                       v.data(), m_);
    }
}

void Simplex::refactor() {
    etas_.clear();
    bool diagonal = true;
    for (int i = 0; i < m_ && diagonal; ++i) {
        const auto& c = cols_[static_cast<size_t>(basis_[static_cast<size_t>(i)])];
        diagonal = (c.row.size() == 1 && c.row[0] == i);
    }
    if (diagonal) {
        diag_base_ = true;
        base_diag_.resize(m_);
        for (int i = 0; i < m_; ++i)
            base_diag_[i] = cols_[static_cast<size_t>(basis_[static_cast<size_t>(i)])].val[0];
        return;
    }
    lu_factors_ = Eigen::MatrixXd::Zero(m_, m_);
    for (int i = 0; i < m_; ++i) {
        const auto& c = cols_[static_cast<size_t>(basis_[static_cast<size_t>(i)])];
        for (size_t t = 0; t < c.row.size(); ++t) lu_factors_(c.row[t], i) = c.val[t];
    }
    lu_ipiv_.assign(static_cast<size_t>(m_), 0);
    const int info = LAPACKE_dgetrf(LAPACK_COL_MAJOR, m_, m_, lu_factors_.data(), m_,
                                    lu_ipiv_.data());
    if (info != 0) throw NumericalError("singular basis factorization (dgetrf info " +
                                        std::to_string(info) + ")");
    const Eigen::VectorXd d = lu_factors_.diagonal().cwiseAbs();
    const double dmax = d.maxCoeff();
    if (dmax <= 0.0 || d.minCoeff() < 1e-13 * dmax)
        throw NumericalError("singular basis factorization");
    diag_base_ = false;
}

void Simplex::compute_basic_values() {
    Eigen::VectorXd rhs = Eigen::VectorXd::Map(b_.data(), m_);
    for (int j = 0; j < ncols_; ++j) {
        const auto js = static_cast<size_t>(j);
        if (state_[js] == VarState::Basic || x_[js] == 0.0) continue;
        const auto& c = cols_[js];
        for (size_t t = 0; t < c.row.size(); ++t) rhs[c.row[t]] -= c.val[t] * x_[js];
    }
    ftran(rhs);
    for (int i = 0; i < m_; ++i) x_[static_cast<size_t>(basis_[static_cast<size_t>(i)])] = rhs[i];
}

Eigen::VectorXd Simplex::duals(const std::vector<double>& cost) const {
    Eigen::VectorXd cb(m_);
    for (int i = 0; i < m_; ++i) cb[i] = cost[static_cast<size_t>(basis_[static_cast<size_t>(i)])];
    btran(cb);
    return cb;
}

double Simplex::reduced_cost(int j, const Eigen::VectorXd& y, const std::vector<double>& cost) const {
    const auto& c = cols_[static_cast<size_t>(j)];
    double d = cost[static_cast<size_t>(j)];
    for (size_t t = 0; t < c.row.size(); ++t) d -= y[c.row[t]] * c.val[t];
    return d;
}

double Simplex::objective_value(const std::vector<double>& cost) const {
    double z = 0.0;
    for (int j = 0; j < ncols_; ++j) z += cost[static_cast<size_t>(j)] * x_[static_cast<size_t>(j)];
    return z;
}

Status Simplex::iterate(const std::vector<double>& cost, std::vector<double>* ray_out) {
    double cscale = 1.0;
    for (double c : cost) cscale = std::max(cscale, std::fabs(c));
    const double dual_tol = opts_.optimality_tol * cscale;

    bland_ = false;
    stall_count_ = 0;

    while (true) {
        if (iterations_ >= opts_.max_iterations) return Status::IterationLimit;
        if (static_cast<int>(etas_.size()) >= opts_.refactor_interval) {
            refactor();
            compute_basic_values();
        }

        const Eigen::VectorXd y = duals(cost);

        // pricing
        int enter = -1;
        double enter_dir = 0.0, best_score = dual_tol;
        for (int j = 0; j < ncols_; ++j) {
            const auto js = static_cast<size_t>(j);
            if (state_[js] == VarState::Basic) continue;
            if (lo_[js] == up_[js]) continue;  // fixed, never re-enters
            const double d = reduced_cost(j, y, cost);
            double score = 0.0, dir = 0.0;
            switch (state_[js]) {
                case VarState::AtLower:
                    if (d > dual_tol) { score = d; dir = 1.0; }
                    break;
                case VarState::AtUpper:
                    if (d < -dual_tol) { score = -d; dir = -1.0; }
                    break;
                case VarState::FreeNonbasic:
                    if (std::fabs(d) > dual_tol) { score = std::fabs(d); dir = d > 0 ? 1.0 : -1.0; }
                    break;
                case VarState::Basic:
                    break;
            }
            if (dir == 0.0) continue;
            if (bland_) { enter = j; enter_dir = dir; break; }
            if (score > best_score) { best_score = score; enter = j; enter_dir = dir; }
        }
        if (enter == -1) {
            // re-price on a fresh factorization before declaring optimality
            if (!etas_.empty()) {
                refactor();
                compute_basic_values();
                etas_.clear();
                bool again = false;
                const Eigen::VectorXd y2 = duals(cost);
                for (int j = 0; j < ncols_ && !again; ++j) {
                    const auto js = static_cast<size_t>(j);
                    if (state_[js] == VarState::Basic || lo_[js] == up_[js]) continue;
                    const double d = reduced_cost(j, y2, cost);
                    again = (state_[js] == VarState::AtLower && d > dual_tol) ||
                            (state_[js] == VarState::AtUpper && d < -dual_tol) ||
                            (state_[js] == VarState::FreeNonbasic && std::fabs(d) > dual_tol);
                }
                if (again) continue;
            }
            return Status::Optimal;
        }

        const auto es = static_cast<size_t>(enter);
        Eigen::VectorXd w = column_dense(enter);
        ftran(w);

        // Ratio test: entering moves by enter_dir * step, each basic by
        // -enter_dir * w. The entering variable's own span competes too
        // (bound flip without a basis change).
        const double own_span = up_[es] - lo_[es];
        double block_step = kInf;
        int leave_pos = -1;
        bool leave_to_upper = false;
        for (int i = 0; i < m_; ++i) {
            const double rate = enter_dir * w[i];
            if (std::fabs(rate) <= kPivotTol) continue;
            const int bj = basis_[static_cast<size_t>(i)];
            const auto bjs = static_cast<size_t>(bj);
            double step;
            bool to_upper;
            if (rate > 0.0) {
                if (lo_[bjs] <= -kInf) continue;
                step = (x_[bjs] - lo_[bjs]) / rate;
                to_upper = false;
            } else {
                if (up_[bjs] >= kInf) continue;
                step = (x_[bjs] - up_[bjs]) / rate;
                to_upper = true;
            }
            if (step < 0.0) step = 0.0;  // bound drift from incremental updates
            bool take;
            if (leave_pos == -1) {
                take = step < block_step;
            } else if (step < block_step - 1e-12) {
                take = true;
            } else if (step <= block_step + 1e-12) {
                take = bland_ ? bj < basis_[static_cast<size_t>(leave_pos)]
                              : std::fabs(w[i]) > std::fabs(w[leave_pos]);
            } else {
                take = false;
            }
            if (take) {
                block_step = step;
                leave_pos = i;
                leave_to_upper = to_upper;
            }
        }

        const double best_step = std::min(own_span, block_step);
        if (std::isinf(best_step)) {
            if (ray_out) {
                std::vector<double> ray(static_cast<size_t>(ncols_), 0.0);
                ray[es] = enter_dir;
                for (int i = 0; i < m_; ++i) {
                    const double delta = -enter_dir * w[i];
                    if (std::fabs(delta) > kPivotTol)
                        ray[static_cast<size_t>(basis_[static_cast<size_t>(i)])] = delta;
                }
                *ray_out = std::move(ray);
            }
            return Status::Unbounded;
        }

        ++iterations_;
        const double d_enter = reduced_cost(enter, y, cost);
        const double gain = std::fabs(d_enter) * best_step;
        if (gain <= 1e-12 * (1.0 + std::fabs(objective_value(cost)))) {
            if (++stall_count_ > opts_.bland_after) bland_ = true;
        } else {
            stall_count_ = 0;
            bland_ = false;
        }

        // apply the step
        if (best_step != 0.0) {
            x_[es] += enter_dir * best_step;
            for (int i = 0; i < m_; ++i) {
                const double delta = enter_dir * best_step * w[i];
                if (delta != 0.0) x_[static_cast<size_t>(basis_[static_cast<size_t>(i)])] -= delta;
            }
        }

        if (own_span <= block_step) {
            // bound flip, basis unchanged
            state_[es] = (enter_dir > 0) ? VarState::AtUpper : VarState::AtLower;
            x_[es] = (enter_dir > 0) ? up_[es] : lo_[es];
            continue;
        }

        const int leave_col = basis_[static_cast<size_t>(leave_pos)];
        const auto ls = static_cast<size_t>(leave_col);
        state_[ls] = leave_to_upper ? VarState::AtUpper : VarState::AtLower;
        x_[ls] = leave_to_upper ? up_[ls] : lo_[ls];
        basis_[static_cast<size_t>(leave_pos)] = enter;
        state_[es] = VarState::Basic;
        if (std::fabs(w[leave_pos]) < kPivotTol)
            throw NumericalError("pivot element below tolerance");
        etas_.push_back(Eta{leave_pos, std::move(w)});
    }
}

Solution Simplex::extract(Status status, std::vector<double> ray) {
    Solution sol;
    sol.status = status;
    sol.iterations = static_cast<int>(iterations_);
    if (status == Status::Infeasible) return sol;

    sol.x.assign(p_.objective.size(), 0.0);
    for (int j = 0; j < nstruct_; ++j) sol.x[static_cast<size_t>(j)] = x_[static_cast<size_t>(j)];
    sol.objective = 0.0;
    for (int j = 0; j < nstruct_; ++j)
        sol.objective += p_.objective[static_cast<size_t>(j)] * sol.x[static_cast<size_t>(j)];

    if (status == Status::Unbounded) {
        sol.ray.assign(static_cast<size_t>(nstruct_), 0.0);
        for (int j = 0; j < nstruct_; ++j) sol.ray[static_cast<size_t>(j)] = ray[static_cast<size_t>(j)];
        return sol;
    }

    const Eigen::VectorXd y = duals(cost_);
    sol.eq_duals.resize(p_.eq_rows.size());
    for (size_t i = 0; i < p_.eq_rows.size(); ++i) sol.eq_duals[i] = y[p_.eq_rows[i]];
    sol.ineq_duals.resize(p_.ineq_rows.size());
    for (size_t i = 0; i < p_.ineq_rows.size(); ++i) {
        double d = y[p_.ineq_rows[i]];
        if (d < 0.0 && d > -1e-11) d = 0.0;  // clamp rounding noise on inactive rows
        sol.ineq_duals[i] = d;
    }
    sol.reduced_costs.resize(static_cast<size_t>(nstruct_));
    for (int j = 0; j < nstruct_; ++j)
        sol.reduced_costs[static_cast<size_t>(j)] = reduced_cost(j, y, cost_);
    return sol;
}

void Simplex::post_checks(Solution& sol) {
    // Fresh factorization so the reported point and duals carry clean
    // residuals (skipped when the optimality re-pricing just provided one).
    if (!etas_.empty()) {
        refactor();
        compute_basic_values();
    }
    const Eigen::VectorXd y = duals(cost_);

    double primal_res = 0.0;
    for (int i = 0; i < m_; ++i) {
        const auto& row = p_.rows[static_cast<size_t>(i)];
        double act = 0.0, scale = 1.0 + std::fabs(row.rhs);
        for (const auto& [col, coeff] : row.terms) {
            const double term = coeff * x_[static_cast<size_t>(col)];
            act += term;
            scale += std::fabs(term);
        }
        if (slack_of_row_[static_cast<size_t>(i)] >= 0)
            act += x_[static_cast<size_t>(slack_of_row_[static_cast<size_t>(i)])];
        for (int a : artificials_) {
            const auto& c = cols_[static_cast<size_t>(a)];
            if (c.row[0] == i) act += c.val[0] * x_[static_cast<size_t>(a)];
        }
        primal_res = std::max(primal_res, std::fabs(act - row.rhs) / scale);
    }
    for (int j = 0; j < ncols_; ++j) {
        const auto js = static_cast<size_t>(j);
        const double blo = lo_[js] - x_[js], bup = x_[js] - up_[js];
        const double scale = 1.0 + std::max(std::fabs(lo_[js]) == kInf ? 0.0 : std::fabs(lo_[js]),
                                            std::fabs(up_[js]) == kInf ? 0.0 : std::fabs(up_[js]));
        if (blo > 0.0) primal_res = std::max(primal_res, blo / scale);
        if (bup > 0.0) primal_res = std::max(primal_res, bup / scale);
    }

    double cscale = 1.0;
    for (double c : cost_) cscale = std::max(cscale, std::fabs(c));
    double dual_viol = 0.0, comp = 0.0;
    double dual_obj = y.dot(Eigen::VectorXd::Map(b_.data(), m_));
    for (int j = 0; j < ncols_; ++j) {
        const auto js = static_cast<size_t>(j);
        const double d = reduced_cost(j, y, cost_);
        switch (state_[js]) {
            case VarState::Basic:
                comp = std::max(comp, std::fabs(d) / cscale);
                break;
            case VarState::AtLower:
                if (lo_[js] != up_[js]) dual_viol = std::max(dual_viol, d / cscale);
                dual_obj += d * x_[js];
                break;
            case VarState::AtUpper:
                if (lo_[js] != up_[js]) dual_viol = std::max(dual_viol, -d / cscale);
                dual_obj += d * x_[js];
                break;
            case VarState::FreeNonbasic:
                dual_viol = std::max(dual_viol, std::fabs(d) / cscale);
                dual_obj += d * x_[js];
                break;
        }
    }

    const double primal_obj = objective_value(cost_);
    sol.max_primal_residual = primal_res;
    sol.max_dual_violation = std::max(dual_viol, 0.0);
    sol.max_complementarity = comp;
    sol.duality_gap_rel = std::fabs(primal_obj - dual_obj) / std::max(1.0, std::fabs(primal_obj));

    if (primal_res > opts_.feasibility_tol)
        throw NumericalError("primal residual " + std::to_string(primal_res) +
                             " above feasibility tolerance after solve");
    if (sol.duality_gap_rel > opts_.duality_gap_rel_tol)
        throw NumericalError("duality gap " + std::to_string(sol.duality_gap_rel) +
                             " above tolerance after solve");
}

Solution Simplex::run() {
    place_nonbasic_initial();

    // Row activities at the initial point decide which rows need artificials.
    std::vector<double> activity(static_cast<size_t>(m_), 0.0);
    for (int j = 0; j < ncols_; ++j) {
        const auto js = static_cast<size_t>(j);
        if (x_[js] == 0.0) continue;
        const auto& c = cols_[js];
        for (size_t t = 0; t < c.row.size(); ++t) activity[static_cast<size_t>(c.row[t])] += c.val[t] * x_[js];
    }

    double total_infeas = 0.0;
    for (int i = 0; i < m_; ++i) {
        const auto is = static_cast<size_t>(i);
        const double resid = b_[is] - activity[is];
        const bool is_le = p_.rows[is].kind == RowKind::Le;
        if (is_le && resid >= 0.0) {
            const int s = slack_of_row_[is];
            basis_[is] = s;
            state_[static_cast<size_t>(s)] = VarState::Basic;
            x_[static_cast<size_t>(s)] = resid;
            continue;
        }
        SparseCol ac;
        ac.row.push_back(i);
        ac.val.push_back(resid >= 0.0 ? 1.0 : -1.0);
        cols_.push_back(std::move(ac));
        lo_.push_back(0.0);
        up_.push_back(kInf);
        cost_.push_back(0.0);
        x_.push_back(std::fabs(resid));
        state_.push_back(VarState::Basic);
        const int a = static_cast<int>(cols_.size()) - 1;
        basis_[is] = a;
        artificials_.push_back(a);
        total_infeas += std::fabs(resid);
    }
    ncols_ = static_cast<int>(cols_.size());
    refactor();

    double bmax = 0.0;
    for (double v : b_) bmax = std::max(bmax, std::fabs(v));
    const double feas_accept = opts_.feasibility_tol * (1.0 + bmax);

    if (total_infeas > 1e-11 * (1.0 + bmax)) {
        phase1_cost_.assign(static_cast<size_t>(ncols_), 0.0);
        for (int a : artificials_) phase1_cost_[static_cast<size_t>(a)] = -1.0;
        const Status s1 = iterate(phase1_cost_, nullptr);
        if (s1 == Status::IterationLimit) return extract(Status::IterationLimit, {});
        if (s1 == Status::Unbounded)
            throw NumericalError("feasibility phase reported unbounded");
        double infeas = 0.0;
        for (int a : artificials_) infeas += x_[static_cast<size_t>(a)];
        if (infeas > feas_accept) return extract(Status::Infeasible, {});
    }
    // Pin artificials at zero for the real objective phase.
    for (int a : artificials_) {
        const auto as = static_cast<size_t>(a);
        up_[as] = 0.0;
        if (state_[as] != VarState::Basic) {
            state_[as] = VarState::AtLower;
            x_[as] = 0.0;
        }
    }

    std::vector<double> ray;
    const Status s2 = iterate(cost_, &ray);
    if (s2 == Status::IterationLimit) return extract(Status::IterationLimit, {});
    if (s2 == Status::Unbounded) return extract(Status::Unbounded, std::move(ray));

    Solution sol = extract(Status::Optimal, {});
    post_checks(sol);
    // extract again so the published point reflects the cleaned factorization
    Solution refreshed = extract(Status::Optimal, {});
    refreshed.max_primal_residual = sol.max_primal_residual;
    refreshed.max_dual_violation = sol.max_dual_violation;
    refreshed.max_complementarity = sol.max_complementarity;
    refreshed.duality_gap_rel = sol.duality_gap_rel;
    return refreshed;
}

}  // namespace

Solution solve(const Problem& p, const SolveOptions& opts) {
    for (int j = 0; j < p.num_vars(); ++j)
        if (p.lower[static_cast<size_t>(j)] > p.upper[static_cast<size_t>(j)])
            throw ValueError("variable lower bound exceeds upper bound");
    Simplex s(p, opts);
    return s.run();
}

}  // namespace eqf::lp
