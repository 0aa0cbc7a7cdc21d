#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wssp/instance.hpp"
#include "wssp/queues.hpp"
#include "wssp/scheduler.hpp"
#include "wssp/simplex.hpp"

namespace wssp {

// ---------------------------------------------------------------------------
// Occupation-measure LP over stationary randomized (state, outcome) policies
// of the phi-forced-renewal chain. The forced renewal is folded into the
// transition kernel as a phi-weighted mixture (next state 0 with probability
// phi regardless of the action), and penalties enter through their mixture
// averages (1-phi) x^(0) + phi x^(1).
// ---------------------------------------------------------------------------

inline constexpr double kSlackCeiling = 1e6;  // reporting clamp for unbounded slack

class OccupationLp {
public:
    explicit OccupationLp(const Instance& ins, long long triple_cap = 100000) : ins_(&ins) {
        const int S = static_cast<int>(ins.num_states());
        const int W = ins.num_outcomes();
        offset_.assign(static_cast<std::size_t>(S) * W + 1, 0);
        long long total = 0;
        for (int z = 0; z < S; ++z)
            for (int w = 0; w < W; ++w) {
                offset_[static_cast<std::size_t>(z) * W + w] = static_cast<int>(total);
                total += static_cast<long long>(ins.feasible_actions(Outcome{w, false}, z).size());
                if (total > triple_cap)
                    throw Error(ErrorCategory::capacity,
                                "occupation LP exceeds triple cap of " + std::to_string(triple_cap));
            }
        offset_.back() = static_cast<int>(total);
        nvar_ = static_cast<int>(total);
        const int M1 = ins.num_constraints() + 1;
        xbar_.assign(static_cast<std::size_t>(nvar_) * M1, 0.0);
        d_.assign(static_cast<std::size_t>(nvar_) * ins.N, 0.0);
        next_.assign(nvar_, 0);
        for (int z = 0; z < S; ++z)
            for (int w = 0; w < W; ++w) {
                const auto& acts = ins.feasible_actions(Outcome{w, false}, z);
                int base = offset_[static_cast<std::size_t>(z) * W + w];
                for (std::size_t a = 0; a < acts.size(); ++a) {
                    SlotEffects e0 = ins.step(z, Outcome{w, false}, acts[a]);
                    SlotEffects e1 = ins.step(z, Outcome{w, true}, acts[a]);
                    int i = base + static_cast<int>(a);
                    next_[i] = e0.next_state;
                    for (int m = 0; m < M1; ++m)
                        xbar_[static_cast<std::size_t>(i) * M1 + m] =
                            (1.0 - ins.phi) * e0.penalties[m] + ins.phi * e1.penalties[m];
                    for (int n = 0; n < ins.N; ++n)
                        d_[static_cast<std::size_t>(i) * ins.N + n] =
                            e0.mu[ins.K + n] - e0.arrivals[ins.K + n];
                }
            }
    }

    int num_vars() const { return nvar_; }
    double xbar(int i, int m) const {
        return xbar_[static_cast<std::size_t>(i) * (ins_->num_constraints() + 1) + m];
    }
    double drain(int i, int n) const { return d_[static_cast<std::size_t>(i) * ins_->N + n]; }

    // Shared feasibility rows: outcome marginals and stationary flow balance
    // (the z' = 0 balance row is redundant and dropped). `extra` columns are
    // appended with zero coefficients.
    std::vector<LpRow> base_rows(int extra = 0) const {
        const Instance& ins = *ins_;
        const int S = static_cast<int>(ins.num_states());
        const int W = ins.num_outcomes();
        std::vector<LpRow> rows;
        for (int w = 0; w < W; ++w) {
            LpRow r;
            r.a.assign(nvar_ + extra, 0.0);
            for (int z = 0; z < S; ++z) {
                int b = offset_[static_cast<std::size_t>(z) * W + w];
                int e = offset_[static_cast<std::size_t>(z) * W + w + 1];
                for (int i = b; i < e; ++i) r.a[i] = 1.0;
            }
            r.b = ins.outcomes[w].prob;
            r.rel = LpRelation::eq;
            rows.push_back(std::move(r));
        }
        for (int zp = 1; zp < S; ++zp) {
            LpRow r;
            r.a.assign(nvar_ + extra, 0.0);
            for (int i = 0; i < nvar_; ++i)
                if (next_[i] == zp) r.a[i] += 1.0 - ins.phi;
            for (int w = 0; w < W; ++w) {
                int b = offset_[static_cast<std::size_t>(zp) * W + w];
                int e = offset_[static_cast<std::size_t>(zp) * W + w + 1];
                for (int i = b; i < e; ++i) r.a[i] -= 1.0;
            }
            r.b = 0.0;
            r.rel = LpRelation::eq;
            rows.push_back(std::move(r));
        }
        return rows;
    }

    // Conditional action distribution per (state, outcome) from an occupation
    // vector; unvisited pairs get the first action deterministically.
    std::vector<std::vector<std::vector<double>>> extract_policy(
        const std::vector<double>& theta) const {
        const Instance& ins = *ins_;
        const int S = static_cast<int>(ins.num_states());
        const int W = ins.num_outcomes();
        std::vector<std::vector<std::vector<double>>> pol(S);
        for (int z = 0; z < S; ++z) {
            pol[z].resize(W);
            for (int w = 0; w < W; ++w) {
                int b = offset_[static_cast<std::size_t>(z) * W + w];
                int e = offset_[static_cast<std::size_t>(z) * W + w + 1];
                double mass = 0.0;
                for (int i = b; i < e; ++i) mass += theta[i];
                pol[z][w].assign(e - b, 0.0);
                if (mass > 1e-12)
                    for (int i = b; i < e; ++i) pol[z][w][i - b] = theta[i] / mass;
                else
                    pol[z][w][0] = 1.0;
            }
        }
        return pol;
    }

private:
    const Instance* ins_;
    int nvar_ = 0;
    std::vector<int> offset_, next_;
    std::vector<double> xbar_, d_;
};

struct LpOracleResult {
    double x0_opt = 0.0;
    std::vector<double> x_avgs;   // attained penalty averages x_0..x_M
    std::vector<double> drains;   // attained mu_n - r_n averages
    std::vector<std::vector<std::vector<double>>> policy;  // [z][omega][action]
};

// Minimum stationary average of x_0 subject to x_m averages <= x_m^av and
// nonnegative drain for every unconstrained queue.
inline LpOracleResult lp_optimal_penalty(const Instance& ins, long long triple_cap = 100000) {
    OccupationLp occ(ins, triple_cap);
    const int M = ins.num_constraints();
    LpProblem p;
    p.n = occ.num_vars();
    p.c.resize(p.n);
    for (int i = 0; i < p.n; ++i) p.c[i] = occ.xbar(i, 0);
    p.rows = occ.base_rows();
    for (int m = 1; m <= M; ++m) {
        LpRow r;
        r.a.resize(p.n);
        for (int i = 0; i < p.n; ++i) r.a[i] = occ.xbar(i, m);
        r.b = ins.penalties[m].x_av();
        r.rel = LpRelation::le;
        p.rows.push_back(std::move(r));
    }
    for (int n = 0; n < ins.N; ++n) {
        LpRow r;
        r.a.resize(p.n);
        for (int i = 0; i < p.n; ++i) r.a[i] = occ.drain(i, n);
        r.b = 0.0;
        r.rel = LpRelation::ge;
        p.rows.push_back(std::move(r));
    }
    LpSolution sol = solve_lp(p);
    if (sol.status != LpStatus::optimal)
        throw Error(ErrorCategory::infeasible,
                    "occupation LP infeasible: no stationary policy meets the constraints");
    LpOracleResult res;
    res.x0_opt = sol.objective;
    res.x_avgs.assign(M + 1, 0.0);
    res.drains.assign(ins.N, 0.0);
    for (int i = 0; i < p.n; ++i) {
        for (int m = 0; m <= M; ++m) res.x_avgs[m] += sol.x[i] * occ.xbar(i, m);
        for (int n = 0; n < ins.N; ++n) res.drains[n] += sol.x[i] * occ.drain(i, n);
    }
    res.policy = occ.extract_policy(sol.x);
    return res;
}

struct SlackResult {
    double epsilon = 0.0;
    bool clamped = false;  // hit the reporting ceiling (vacuously unbounded)
};

// Largest common slack: x_m averages <= x_m^av - eps and drains >= eps.
// eps > 0 certifies strict feasibility of the instance.
inline SlackResult lp_max_slack(const Instance& ins, long long triple_cap = 100000) {
    OccupationLp occ(ins, triple_cap);
    const int M = ins.num_constraints();
    LpProblem p;
    p.n = occ.num_vars() + 1;  // last variable is eps
    const int eps = p.n - 1;
    p.c.assign(p.n, 0.0);
    p.c[eps] = -1.0;  // maximize eps
    p.rows = occ.base_rows(/*extra=*/1);
    for (int m = 1; m <= M; ++m) {
        LpRow r;
        r.a.assign(p.n, 0.0);
        for (int i = 0; i < occ.num_vars(); ++i) r.a[i] = occ.xbar(i, m);
        r.a[eps] = 1.0;
        r.b = ins.penalties[m].x_av();
        r.rel = LpRelation::le;
        p.rows.push_back(std::move(r));
    }
    for (int n = 0; n < ins.N; ++n) {
        LpRow r;
        r.a.assign(p.n, 0.0);
        for (int i = 0; i < occ.num_vars(); ++i) r.a[i] = occ.drain(i, n);
        r.a[eps] = -1.0;
        r.b = 0.0;
        r.rel = LpRelation::ge;
        p.rows.push_back(std::move(r));
    }
    {
        LpRow r;
        r.a.assign(p.n, 0.0);
        r.a[eps] = 1.0;
        r.b = kSlackCeiling;
        r.rel = LpRelation::le;
        p.rows.push_back(std::move(r));
    }
    LpSolution sol = solve_lp(p);
    if (sol.status != LpStatus::optimal)
        throw Error(ErrorCategory::infeasible,
                    "slack LP infeasible: the instance violates strict feasibility");
    SlackResult res;
    res.epsilon = sol.x[eps];
    res.clamped = res.epsilon >= kSlackCeiling - 1e-6;
    return res;
}

// Attainable range of the stationary average of penalty m over all policies
// with nonnegative drains (penalty constraints excluded).
inline std::pair<double, double> penalty_average_range(const Instance& ins, int m,
                                                       long long triple_cap = 100000) {
    OccupationLp occ(ins, triple_cap);
    LpProblem p;
    p.n = occ.num_vars();
    p.c.resize(p.n);
    for (int i = 0; i < p.n; ++i) p.c[i] = occ.xbar(i, m);
    p.rows = occ.base_rows();
    for (int n = 0; n < ins.N; ++n) {
        LpRow r;
        r.a.resize(p.n);
        for (int i = 0; i < p.n; ++i) r.a[i] = occ.drain(i, n);
        r.b = 0.0;
        r.rel = LpRelation::ge;
        p.rows.push_back(std::move(r));
    }
    LpSolution lo = solve_lp(p);
    for (double& c : p.c) c = -c;
    LpSolution hi = solve_lp(p);
    if (lo.status != LpStatus::optimal || hi.status != LpStatus::optimal)
        throw Error(ErrorCategory::infeasible, "penalty range LP infeasible");
    return {lo.objective, -hi.objective};
}

// Grid-search minimum of f over the occupation-attainable averages that also
// satisfy every h_l(gamma) <= c_l. The attainable set of a single average is
// an interval, so only M = 1 is supported.
inline double f_opt_grid(const Instance& ins, const GeneralizedSpec& gen,
                         double resolution = 1e-5) {
    if (ins.num_constraints() != 1)
        throw Error(ErrorCategory::missing_oracle, "f_opt_grid supports exactly one penalty average");
    auto [lo, hi] = penalty_average_range(ins, 1);
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> g(1);
    long long steps = static_cast<long long>(std::ceil((hi - lo) / resolution));
    for (long long s = 0; s <= steps; ++s) {
        g[0] = std::min(lo + s * resolution, hi);
        bool ok = true;
        for (std::size_t l = 0; l < gen.h.size(); ++l)
            if (gen.h[l](g) > gen.c[l] + 1e-9) ok = false;
        if (ok) best = std::min(best, gen.f(g));
    }
    if (!std::isfinite(best))
        throw Error(ErrorCategory::infeasible, "no attainable average satisfies the h constraints");
    return best;
}

// ---------------------------------------------------------------------------
// Closed-form lemma values and theorem verdicts
// ---------------------------------------------------------------------------

// Bounds on the variance of a random variable supported on [x_min, x_max]:
// (x_max - x_min)^2 / 4 always, and (x_max - mean)(mean - x_min) when the
// mean is known. Both are attained by two-point laws.
inline std::pair<double, double> variance_bounds(double x_min, double x_max,
                                                 std::optional<double> mean = {}) {
    if (x_max < x_min) throw Error(ErrorCategory::config, "variance_bounds: empty support");
    double a = (x_max - x_min) * (x_max - x_min) / 4.0;
    double b = a;
    if (mean) {
        if (*mean < x_min || *mean > x_max)
            throw Error(ErrorCategory::config, "variance_bounds: mean outside support");
        b = (x_max - *mean) * (*mean - x_min);
    }
    return {a, b};
}

struct BoundVerdict {
    std::string name;
    double measured = 0.0;
    double bound = 0.0;
    double slack = 0.0;  // bound - measured
    bool pass = false;
    bool vacuous = false;
};

struct VerifyInputs {
    double V = 0.0;
    double C = 0.0;      // expected per-frame cost gap of the approximate solver
    double delta = 0.0;  // per-frame policy suboptimality
    std::optional<double> epsilon;  // lp_max_slack certificate
    double et_star_low = 1.0;       // conservative lower bound on E[T*]
    std::optional<double> x0_opt;
    double mc_slack = 0.0;          // Monte-Carlo confidence slack on measured values
    DriftConstants dc;
    double constraint_rel_tol = 0.01;
    // generalized mode
    const GeneralizedSpec* gen = nullptr;
    std::optional<double> f_opt;
    std::optional<double> B2;
};

inline std::vector<BoundVerdict> check_theorem_bounds(const Instance& ins, const SimResult& res,
                                                      const VerifyInputs& in) {
    std::vector<BoundVerdict> out;
    auto push = [&](std::string name, double measured, double bound, bool vacuous = false) {
        BoundVerdict v;
        v.name = std::move(name);
        v.measured = measured;
        v.bound = bound;
        v.slack = bound - measured;
        v.pass = vacuous || measured <= bound;
        v.vacuous = vacuous;
        out.push_back(std::move(v));
    };

    if (!in.gen) {
        for (int m = 1; m <= ins.num_constraints(); ++m) {
            double target = ins.penalties[m].x_av();
            double scale = std::max(std::abs(target), 1.0);
            push("constraint-" + std::to_string(m), res.penalty_avgs[m],
                 target + in.constraint_rel_tol * scale);
        }
    }

    const double B = in.dc.B, phi = ins.phi;
    if (in.V == 0.0 && !in.gen) {
        bool vac = !in.epsilon.has_value();
        double denom = vac ? 0.0 : (*in.epsilon * in.et_star_low - in.delta);
        if (!vac && denom <= 0.0) {
            // Hypothesis eps E[T*] > delta fails: report, don't enforce.
            push("feasibility-backlog", res.frame_start_backlog_avg, 0.0, true);
        } else {
            push("feasibility-backlog", res.frame_start_backlog_avg,
                 vac ? 0.0 : (B + in.C) / denom, vac);
        }
    }

    if (in.V > 0.0 && !in.gen) {
        auto [x0_min, x0_max] = ins.penalty_range(0);
        bool vac = !in.x0_opt.has_value();
        if (!vac) {
            double delta_terms = 0.0;
            if (in.delta > 0.0 && in.epsilon && *in.epsilon > 0.0)
                delta_terms = phi * in.delta * (1.0 + (x0_max - *in.x0_opt) / *in.epsilon);
            push("optimization-penalty", res.penalty_avgs[0],
                 *in.x0_opt + (B + in.C) * phi / in.V + delta_terms + in.mc_slack);
        } else {
            push("optimization-penalty", res.penalty_avgs[0], 0.0, true);
        }
        bool bvac = !in.epsilon.has_value() || *in.epsilon - phi * in.delta <= 0.0;
        double bbound = bvac ? 0.0
                             : ((B + in.C) * phi + in.V * (phi * in.delta + x0_max - x0_min)) /
                                   (*in.epsilon - phi * in.delta);
        push("optimization-backlog", res.frame_start_backlog_avg, bbound, bvac);
    }

    if (in.gen) {
        const auto& gen = *in.gen;
        std::vector<double> xb(res.penalty_avgs.begin() + 1, res.penalty_avgs.end());
        for (std::size_t l = 0; l < gen.h.size(); ++l) {
            double scale = std::max(std::abs(gen.c[l]), 1.0);
            push("generalized-h-" + std::to_string(l), gen.h[l](xb),
                 gen.c[l] + in.constraint_rel_tol * scale);
        }
        bool vac = !in.f_opt.has_value() || !in.B2.has_value() || in.V <= 0.0;
        push("generalized-f", gen.f ? gen.f(xb) : 0.0,
             vac ? 0.0 : *in.f_opt + phi * *in.B2 / in.V + in.mc_slack, vac);
    }
    return out;
}

}  // namespace wssp
