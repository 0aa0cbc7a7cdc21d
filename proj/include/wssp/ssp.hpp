#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "wssp/instance.hpp"
#include "wssp/queues.hpp"

namespace wssp {

// Cost-to-go over the augmented state space: entries 0..S-1 are buffer
// states, entry S is the absorbing frame-end state, pinned to 0.
using CostVector = std::vector<double>;

inline CostVector zero_costs(long long S) { return CostVector(S + 1, 0.0); }

// Sup norm over the non-terminal entries (the e-weighted norm with e = 1).
inline double sup_norm(const CostVector& J) {
    double m = 0.0;
    for (std::size_t i = 0; i + 1 < J.size(); ++i) m = std::max(m, std::abs(J[i]));
    return m;
}

inline double sup_dist(const CostVector& a, const CostVector& b) {
    double m = 0.0;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Frame-start weights defining the per-slot stage cost
//   constant + V * x_0 - sum_n Q[n] * d_n - sum_m Y[m] * (x_av[m] - x_{m+1}).
// The basic algorithm uses x_av from the instance; the auxiliary-variable
// algorithm reuses the same machinery with Y = W, x_av = gamma and the
// gamma-only terms folded into `constant`.
struct StageWeights {
    std::vector<double> Q;
    std::vector<double> Y;
    std::vector<double> x_av;
    double V = 0.0;
    double constant = 0.0;

    static StageWeights from_backlog(const Instance& ins, const Backlog& bl, double V) {
        StageWeights w;
        w.Q = bl.Q;
        w.Y = bl.Y;
        w.x_av.resize(ins.num_constraints());
        for (int m = 0; m < ins.num_constraints(); ++m) w.x_av[m] = ins.penalties[m + 1].x_av();
        w.V = V;
        return w;
    }
};

// Stochastic-shortest-path model for one frame. Precomputes, per
// (state, outcome, action): the successor state of a non-renewal slot, the
// penalty vector under both forced-renewal values, and the drift terms d_n
// of the unconstrained queues. set_weights() then reduces each action to two
// scalar slot costs, so value-iteration sweeps touch only flat arrays.
class SspSolver {
public:
    SspSolver(const Instance& ins, RenewalConfig rc) : ins_(&ins), rc_(rc) {
        S_ = static_cast<int>(ins.num_states());
        const int W = ins.num_outcomes();
        const int M1 = ins.num_constraints() + 1;
        offset_.assign(static_cast<std::size_t>(S_) * W + 1, 0);
        std::size_t total = 0;
        for (int z = 0; z < S_; ++z)
            for (int w = 0; w < W; ++w) {
                offset_[static_cast<std::size_t>(z) * W + w] = static_cast<int>(total);
                total += ins.feasible_actions(Outcome{w, false}, z).size();
            }
        offset_.back() = static_cast<int>(total);
        next_.resize(total);
        pen0_.resize(total * M1);
        pen1_.resize(total * M1);
        d_.resize(total * ins.N);
        for (int z = 0; z < S_; ++z)
            for (int w = 0; w < W; ++w) {
                const auto& acts = ins.feasible_actions(Outcome{w, false}, z);
                int base = offset_[static_cast<std::size_t>(z) * W + w];
                for (std::size_t a = 0; a < acts.size(); ++a) {
                    SlotEffects e0 = ins.step(z, Outcome{w, false}, acts[a]);
                    SlotEffects e1 = ins.step(z, Outcome{w, true}, acts[a]);
                    std::size_t i = base + a;
                    // Natural drains to the empty state end the frame under
                    // state-zero and periodic-check renewals; under
                    // forced-only renewals the empty state is ordinary.
                    next_[i] = (rc.type != RenewalType::forced_only && e0.next_state == 0)
                                   ? S_
                                   : e0.next_state;
                    for (int m = 0; m < M1; ++m) {
                        pen0_[i * M1 + m] = e0.penalties[m];
                        pen1_[i * M1 + m] = e1.penalties[m];
                    }
                    for (int n = 0; n < ins.N; ++n)
                        d_[i * ins.N + n] = e0.mu[ins.K + n] - e0.arrivals[ins.K + n];
                }
            }
        cost0_.resize(total);
        cost1_.resize(total);
    }

    const Instance& instance() const { return *ins_; }
    int num_states() const { return S_; }

    void set_weights(const StageWeights& w) {
        const int M1 = ins_->num_constraints() + 1;
        c_max_ = 0.0;
        for (std::size_t i = 0; i < next_.size(); ++i) {
            double base = w.constant;
            for (int n = 0; n < ins_->N; ++n) base -= w.Q[n] * d_[i * ins_->N + n];
            double c0 = base + w.V * pen0_[i * M1];
            double c1 = base + w.V * pen1_[i * M1];
            for (int m = 0; m + 1 < M1; ++m) {
                c0 -= w.Y[m] * (w.x_av[m] - pen0_[i * M1 + m + 1]);
                c1 -= w.Y[m] * (w.x_av[m] - pen1_[i * M1 + m + 1]);
            }
            cost0_[i] = c0;
            cost1_[i] = c1;
            c_max_ = std::max({c_max_, std::abs(c0), std::abs(c1)});
        }
        // Forced-renewal slot values never change between sweeps; cache the
        // per-(state, outcome) minima once per set_weights.
        const int W = ins_->num_outcomes();
        forced_min_.assign(static_cast<std::size_t>(S_) * W, 0.0);
        for (int z = 0; z < S_; ++z)
            for (int w = 0; w < W; ++w) {
                int b = offset_[static_cast<std::size_t>(z) * W + w];
                int e = offset_[static_cast<std::size_t>(z) * W + w + 1];
                double best = std::numeric_limits<double>::infinity();
                for (int i = b; i < e; ++i) best = std::min(best, cost1_[i]);
                forced_min_[static_cast<std::size_t>(z) * W + w] = best;
            }
    }

    // Largest absolute slot cost under the current weights.
    double c_max() const { return c_max_; }

    // Cost-to-go bound c_max / phi for any policy under these weights.
    double j_max() const { return c_max_ / ins_->phi; }

    // One dynamic-programming update with arbitrary per-outcome weights
    // w1[omega] on forced-renewal slots and w0[omega] on ordinary slots.
    // Both the exact operator and its sampled estimate route through this
    // loop so that matching weights give bit-identical results.
    CostVector apply_weighted(const CostVector& J, const std::vector<double>& w0,
                              const std::vector<double>& w1) const {
        const int W = ins_->num_outcomes();
        CostVector out(S_ + 1, 0.0);
        for (int z = 0; z < S_; ++z) {
            double acc = 0.0;
            for (int w = 0; w < W; ++w) {
                std::size_t zw = static_cast<std::size_t>(z) * W + w;
                if (w1[w] != 0.0) acc += w1[w] * forced_min_[zw];
                if (w0[w] != 0.0) {
                    int b = offset_[zw], e = offset_[zw + 1];
                    double best = std::numeric_limits<double>::infinity();
                    for (int i = b; i < e; ++i) best = std::min(best, cost0_[i] + J[next_[i]]);
                    acc += w0[w] * best;
                }
            }
            out[z] = acc;
        }
        return out;
    }

    // Exact one-frame Bellman operator.
    CostVector psi(const CostVector& J) const {
        const int W = ins_->num_outcomes();
        std::vector<double> w0(W), w1(W);
        for (int w = 0; w < W; ++w) {
            w0[w] = (1.0 - ins_->phi) * ins_->outcomes[w].prob;
            w1[w] = ins_->phi * ins_->outcomes[w].prob;
        }
        return apply_weighted(J, w0, w1);
    }

    // Empirical operator from a batch of sampled omega values; phi is a known
    // design parameter, so only the outcome distribution is estimated. The
    // estimate is unbiased for psi() and bit-identical to it whenever the
    // empirical omega frequencies match the model probabilities exactly.
    CostVector psi_sampled(const CostVector& J, const std::vector<int>& omegas) const {
        if (omegas.empty()) throw Error(ErrorCategory::solver, "psi_sampled: empty batch");
        const int W = ins_->num_outcomes();
        std::vector<double> w0(W, 0.0), w1(W, 0.0);
        for (int o : omegas) w0[o] += 1.0;
        const double L = double(omegas.size());
        for (int w = 0; w < W; ++w) {
            double p = w0[w] / L;  // exact-rational frequencies match probs bitwise
            w1[w] = ins_->phi * p;
            w0[w] = (1.0 - ins_->phi) * p;
        }
        return apply_weighted(J, w0, w1);
    }

    // Value iteration to residual <= tol in sup norm; contraction modulus is
    // (1 - phi). Warm-starts from the J passed in. Returns the last residual.
    double solve_exact(CostVector& J, double tol = 1e-10, int max_iters = 100000) const {
        if (static_cast<int>(J.size()) != S_ + 1) J = zero_costs(S_);
        double res = std::numeric_limits<double>::infinity();
        for (int it = 0; it < max_iters; ++it) {
            CostVector next = psi(J);
            res = sup_dist(next, J);
            J = std::move(next);
            if (res <= tol) return res;
        }
        throw Error(ErrorCategory::solver, "value iteration failed to reach tolerance " +
                                               std::to_string(tol));
    }

    // Greedy slot decision given cost-to-go J and the observed outcome
    // (including the forced-renewal flag). Ties break to the first action in
    // the fixed enumeration order.
    ControlAction greedy_action(const CostVector& J, int state, const Outcome& out) const {
        const int W = ins_->num_outcomes();
        std::size_t zw = static_cast<std::size_t>(state) * W + out.omega;
        int b = offset_[zw], e = offset_[zw + 1];
        int best_i = b;
        double best = std::numeric_limits<double>::infinity();
        for (int i = b; i < e; ++i) {
            double v = out.forced_renewal ? cost1_[i] : cost0_[i] + J[next_[i]];
            if (v < best) {
                best = v;
                best_i = i;
            }
        }
        return ins_->feasible_actions(Outcome{out.omega, false}, state)[best_i - b];
    }

private:
    const Instance* ins_;
    RenewalConfig rc_;
    int S_ = 0;
    std::vector<int> offset_;
    std::vector<int> next_;
    std::vector<double> pen0_, pen1_, d_;
    std::vector<double> cost0_, cost1_, forced_min_;
    double c_max_ = 0.0;
};

// --- Robbins-Monro style iterations ----------------------------------------

// Classic averaging: J_{b+1} = (1/(b+1)) PsiHat J_b + (b/(b+1)) J_b.
inline CostVector iterate_classic(const CostVector& J, const CostVector& psi_hat, long long b) {
    CostVector out(J.size());
    const double a = 1.0 / double(b + 1);
    for (std::size_t i = 0; i < J.size(); ++i) out[i] = a * psi_hat[i] + (1.0 - a) * J[i];
    out.back() = 0.0;
    return out;
}

// Fixed step: J_{b+1} = gamma PsiHat J_b + (1 - gamma) J_b.
inline CostVector iterate_fixed_gamma(const CostVector& J, const CostVector& psi_hat,
                                      double gamma) {
    CostVector out(J.size());
    for (std::size_t i = 0; i < J.size(); ++i) out[i] = gamma * psi_hat[i] + (1.0 - gamma) * J[i];
    out.back() = 0.0;
    return out;
}

// Bound on the per-iteration estimation noise of the sampled operator with
// batch size L: 4 (c_max + (1 - phi) J_max)^2 / L, with J_max = c_max / phi.
inline double noise_bound(double c_max, double phi, long long L) {
    double jmax = c_max / phi;
    double a = c_max + (1.0 - phi) * jmax;
    return 4.0 * a * a / double(L);
}

// Error after b fixed-step iterations from a cold start bounded by c_max/phi:
// (1-phi*gamma)^{2b} (c_max/phi)^2 + gamma sigma2 (1-(1-phi*gamma)^{2b}) / (phi (2-phi*gamma)).
inline double fixed_gamma_error_bound(double c_max, double phi, double gamma, double sigma2,
                                      long long b) {
    double r = std::pow(1.0 - phi * gamma, 2.0 * double(b));
    double floor_term = gamma * sigma2 / (phi * (2.0 - phi * gamma));
    double init = (c_max / phi) * (c_max / phi);
    return r * init + floor_term * (1.0 - r);
}

// Smallest iteration count after which the transient term in the fixed-step
// error bound is dominated by the steady-state noise floor.
inline long long choose_iterations(double c_max, double phi, double gamma, double sigma2) {
    double floor_term = gamma * sigma2 / (phi * (2.0 - phi * gamma));
    double init = (c_max / phi) * (c_max / phi);
    if (init <= floor_term) return 0;
    double ratio = init / floor_term - 1.0;  // == c_max^2 (2-phi*gamma) / (gamma sigma2 phi) - 1
    double b = std::log(ratio) / (2.0 * std::log(1.0 / (1.0 - phi * gamma)));
    long long bi = static_cast<long long>(std::ceil(b));
    return std::max<long long>(bi, 0);
}

// Suboptimality of the greedy policy for an approximate J, per-frame:
// 2 (1 - phi) ||J - J*||_sup / phi.
inline double policy_cost_gap(double phi, double j_err_sup) {
    return 2.0 * (1.0 - phi) * j_err_sup / phi;
}

// Sensitivity of the exact cost-to-go to a change in weights: if the slot
// costs differ by at most beta in sup norm, the fixed points differ by at
// most beta / phi.
inline double weight_sensitivity_bound(double phi, double beta) { return beta / phi; }

}  // namespace wssp
