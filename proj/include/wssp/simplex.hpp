#pragma once

#include <cmath>
#include <cstdlib>
#include <limits>
#include <vector>

#include "wssp/errors.hpp"

namespace wssp {

// Dense two-phase primal simplex with Bland's anti-cycling rule. Intended for
// the small occupation-measure programs used as oracles (<= ~1e5 nonzeros);
// no scaling or sparsity tricks.

enum class LpRelation { le = -1, eq = 0, ge = 1 };
enum class LpStatus { optimal, infeasible, unbounded };

struct LpRow {
    std::vector<double> a;
    double b = 0.0;
    LpRelation rel = LpRelation::eq;
};

struct LpProblem {
    int n = 0;                  // decision variables, all constrained >= 0
    std::vector<double> c;      // minimize c . x
    std::vector<LpRow> rows;
};

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    double objective = 0.0;
    std::vector<double> x;
};

class SimplexSolver {
public:
    explicit SimplexSolver(double tol = 1e-9) : tol_(tol) {}

    LpSolution solve(const LpProblem& p) {
        const int m = static_cast<int>(p.rows.size());
        int n = p.n;
        // Count slack columns, then lay out [original | slacks | artificials].
        int n_slack = 0;
        for (const auto& r : p.rows)
            if (r.rel != LpRelation::eq) ++n_slack;
        int n_art = m;  // one artificial per row keeps the logic simple
        ncols_ = n + n_slack + n_art;
        art_begin_ = n + n_slack;
        T_.assign(m, std::vector<double>(ncols_ + 1, 0.0));
        basis_.assign(m, -1);

        int slack_i = 0;
        for (int i = 0; i < m; ++i) {
            const auto& r = p.rows[i];
            if (static_cast<int>(r.a.size()) != n)
                throw Error(ErrorCategory::solver, "lp row width mismatch");
            double sign = r.b < 0.0 ? -1.0 : 1.0;
            for (int j = 0; j < n; ++j) T_[i][j] = sign * r.a[j];
            T_[i][ncols_] = sign * r.b;
            if (r.rel != LpRelation::eq) {
                double s = (r.rel == LpRelation::le) ? 1.0 : -1.0;
                T_[i][n + slack_i] = sign * s;
                ++slack_i;
            }
            T_[i][art_begin_ + i] = 1.0;
            basis_[i] = art_begin_ + i;
        }

        // Phase 1: minimize the sum of artificials.
        std::vector<double> obj1(ncols_, 0.0);
        for (int j = art_begin_; j < ncols_; ++j) obj1[j] = 1.0;
        if (!optimize(obj1, /*forbid_art=*/false)) return {LpStatus::unbounded, 0.0, {}};
        if (phase_objective(obj1) > 1e-7) return {LpStatus::infeasible, 0.0, {}};
        pivot_out_artificials();

        // Phase 2: the real objective, artificials locked out.
        std::vector<double> obj2(ncols_, 0.0);
        for (int j = 0; j < n; ++j) obj2[j] = p.c[j];
        if (!optimize(obj2, /*forbid_art=*/true)) return {LpStatus::unbounded, 0.0, {}};

        LpSolution sol;
        sol.status = LpStatus::optimal;
        sol.x.assign(n, 0.0);
        for (int i = 0; i < m; ++i)
            if (basis_[i] < n) sol.x[basis_[i]] = T_[i][ncols_];
        sol.objective = 0.0;
        for (int j = 0; j < n; ++j) sol.objective += p.c[j] * sol.x[j];
        return sol;
    }

private:
    double phase_objective(const std::vector<double>& c) const {
        double v = 0.0;
        for (std::size_t i = 0; i < basis_.size(); ++i) v += c[basis_[i]] * T_[i][ncols_];
        return v;
    }

    // Reduced cost of column j under objective c given the current basis.
    double reduced_cost(const std::vector<double>& c, int j) const {
        double r = c[j];
        for (std::size_t i = 0; i < basis_.size(); ++i) r -= c[basis_[i]] * T_[i][j];
        return r;
    }

    void pivot(int row, int col) {
        double piv = T_[row][col];
        for (double& v : T_[row]) v /= piv;
        for (std::size_t i = 0; i < T_.size(); ++i) {
            if (static_cast<int>(i) == row) continue;
            double f = T_[i][col];
            if (f == 0.0) continue;
            for (int j = 0; j <= ncols_; ++j) T_[i][j] -= f * T_[row][j];
        }
        basis_[row] = col;
    }

    // Bland's rule: entering = lowest-index improving column, leaving =
    // lowest-index tied minimum-ratio row. Returns false on unboundedness.
    bool optimize(const std::vector<double>& c, bool forbid_art) {
        const int m = static_cast<int>(T_.size());
        const long long max_pivots = 4LL * (m + ncols_) * (m + ncols_) + 10000;
        for (long long it = 0; it < max_pivots; ++it) {
            int enter = -1;
            int limit = forbid_art ? art_begin_ : ncols_;
            for (int j = 0; j < limit; ++j) {
                if (reduced_cost(c, j) < -tol_) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return true;
            int leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m; ++i) {
                if (T_[i][enter] > tol_) {
                    double ratio = T_[i][ncols_] / T_[i][enter];
                    if (ratio < best - tol_ ||
                        (ratio < best + tol_ && (leave < 0 || basis_[i] < basis_[leave]))) {
                        best = ratio;
                        leave = i;
                    }
                }
            }
            if (leave < 0) return false;
            pivot(leave, enter);
        }
        throw Error(ErrorCategory::solver, "simplex pivot limit exceeded");
    }

    // After phase 1, swap any basic artificial for a structural column, or
    // leave it basic at zero if its row is redundant.
    void pivot_out_artificials() {
        const int m = static_cast<int>(T_.size());
        for (int i = 0; i < m; ++i) {
            if (basis_[i] < art_begin_) continue;
            int col = -1;
            for (int j = 0; j < art_begin_; ++j)
                if (std::abs(T_[i][j]) > tol_) {
                    col = j;
                    break;
                }
            if (col >= 0) pivot(i, col);
        }
    }

    double tol_;
    int ncols_ = 0, art_begin_ = 0;
    std::vector<std::vector<double>> T_;
    std::vector<int> basis_;
};

inline LpSolution solve_lp(const LpProblem& p) { return SimplexSolver().solve(p); }

}  // namespace wssp
