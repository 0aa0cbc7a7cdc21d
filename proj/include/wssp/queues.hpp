#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "wssp/instance.hpp"

namespace wssp {

// When a new frame is declared to start.
//   state_zero:     every visit to the empty state (forced or natural drain)
//   forced_only:    only the slots following a Bernoulli(phi) forced renewal
//   bth_state_zero: every b-th visit to the empty state
enum class RenewalType { state_zero = 1, forced_only = 2, bth_state_zero = 3 };

struct RenewalConfig {
    RenewalType type = RenewalType::state_zero;
    int b = 1;  // bth_state_zero visit count
};

// --- per-slot queue updates -------------------------------------------------

inline double update_queue(double q, double mu, double r) {
    return std::max(q - mu, 0.0) + r;
}

inline double update_virtual(double y, double x, double x_av) {
    return std::max(y - x_av + x, 0.0);
}

// W queues track equality-style coupling to the auxiliary variables and may
// go negative; no clamp.
inline double update_w(double w, double gamma, double x) { return w - gamma + x; }

inline double update_yl(double y, double c, double h) { return std::max(y - c + h, 0.0); }

template <typename Vec>
double lyapunov(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return 0.5 * s;
}

// Virtual/actual backlog carried across frames by the basic algorithm:
// Q_n for the N delay-unconstrained queues and Y_m per penalty constraint.
struct Backlog {
    std::vector<double> Q;
    std::vector<double> Y;

    static Backlog zero(const Instance& ins) {
        return Backlog{std::vector<double>(ins.N, 0.0),
                       std::vector<double>(ins.num_constraints(), 0.0)};
    }

    // Applies one slot: eff carries mu/arrivals for all queues and the full
    // penalty vector x_0..x_M.
    void apply_slot(const Instance& ins, const SlotEffects& eff) {
        for (int n = 0; n < ins.N; ++n)
            Q[n] = update_queue(Q[n], eff.mu[ins.K + n], eff.arrivals[ins.K + n]);
        for (int m = 0; m < ins.num_constraints(); ++m)
            Y[m] = update_virtual(Y[m], eff.penalties[m + 1], ins.penalties[m + 1].x_av());
    }

    double lyapunov_value() const { return lyapunov(Q) + lyapunov(Y); }

    double total() const {
        double s = 0.0;
        for (double q : Q) s += q;
        for (double y : Y) s += y;
        return s;
    }
};

// Optimisation target for the auxiliary-variable (generalized) algorithm:
// minimise f(gamma) subject to h_l(gamma) <= c_l, with gamma_m coupled to the
// running penalty averages through the W queues.
struct GeneralizedSpec {
    std::function<double(const std::vector<double>&)> f;
    std::vector<std::function<double(const std::vector<double>&)>> h;
    std::vector<double> c;
    std::vector<double> h_min, h_max;  // range of each h_l over the gamma box
    double alpha = 0.0;                // box slack around the attainable penalty range
    bool separable = true;
};

struct GeneralBacklog {
    std::vector<double> W;   // size M, may be negative
    std::vector<double> Yl;  // size L

    static GeneralBacklog zero(int M, int L) {
        return GeneralBacklog{std::vector<double>(M, 0.0), std::vector<double>(L, 0.0)};
    }

    void apply_slot(const Instance& ins, const GeneralizedSpec& gen,
                    const std::vector<double>& gamma, const SlotEffects& eff) {
        for (int m = 0; m < ins.num_constraints(); ++m)
            W[m] = update_w(W[m], gamma[m], eff.penalties[m + 1]);
        for (std::size_t l = 0; l < gen.h.size(); ++l)
            Yl[l] = update_yl(Yl[l], gen.c[l], gen.h[l](gamma));
    }

    double lyapunov_value() const { return lyapunov(W) + lyapunov(Yl); }
};

// --- drift constants --------------------------------------------------------

// Upper bound on E[T^2] for a frame length T under forced renewal rate phi.
inline double expected_t2_bound(double phi, const RenewalConfig& rc) {
    if (rc.type == RenewalType::bth_state_zero) {
        double b = rc.b;
        return b * (1.0 - phi) / (phi * phi) + b * b / (phi * phi);
    }
    return (2.0 - phi) / (phi * phi);
}

namespace detail {

// Max over (state, outcome, forced flag, action) of a per-slot functional.
template <typename F>
double max_over_slots(const Instance& ins, F&& fn) {
    double best = 0.0;
    const int S = static_cast<int>(ins.num_states());
    for (int z = 0; z < S; ++z) {
        for (int w = 0; w < ins.num_outcomes(); ++w) {
            for (int forced = 0; forced < 2; ++forced) {
                Outcome out{w, forced != 0};
                for (const auto& a : ins.feasible_actions(out, z)) {
                    SlotEffects eff = ins.step(z, out, a);
                    best = std::max(best, fn(eff));
                }
            }
        }
    }
    return best;
}

}  // namespace detail

// Worst-case one-slot squared change of the (Q, Y) backlog:
// sum_n (mu_n^2 + R_n^2) over unconstrained queues plus
// sum_m (x_m - x_m^av)^2 over the penalty constraints.
inline double sigma_sq_bound(const Instance& ins) {
    return detail::max_over_slots(ins, [&](const SlotEffects& eff) {
        double s = 0.0;
        for (int n = ins.K; n < ins.num_queues(); ++n)
            s += eff.mu[n] * eff.mu[n] + eff.arrivals[n] * eff.arrivals[n];
        for (int m = 1; m <= ins.num_constraints(); ++m) {
            double d = eff.penalties[m] - ins.penalties[m].x_av();
            s += d * d;
        }
        return s;
    });
}

struct DriftConstants {
    double sigma_sq = 0.0;
    double et2 = 0.0;
    double B = 0.0;  // sigma_sq / 2 * et2
};

inline DriftConstants compute_drift_constants(const Instance& ins, const RenewalConfig& rc) {
    DriftConstants d;
    d.sigma_sq = sigma_sq_bound(ins);
    d.et2 = expected_t2_bound(ins.phi, rc);
    d.B = 0.5 * d.sigma_sq * d.et2;
    return d;
}

// Analogue for the auxiliary-variable algorithm: the W queues track
// (x_m - gamma_m) and the Y_l queues track (h_l(gamma) - c_l), with gamma
// ranging over the box of attainable penalty averages.
inline DriftConstants compute_drift_constants_generalized(const Instance& ins,
                                                          const GeneralizedSpec& gen,
                                                          const RenewalConfig& rc) {
    const int M = ins.num_constraints();
    std::vector<double> glo(M), ghi(M);
    for (int m = 0; m < M; ++m) {
        auto [lo, hi] = ins.penalty_range(m + 1);
        glo[m] = lo;
        ghi[m] = hi;
    }
    double hterm = 0.0;
    for (std::size_t l = 0; l < gen.h.size(); ++l) {
        double a = gen.h_min[l] - gen.c[l];
        double b = gen.h_max[l] - gen.c[l];
        hterm += std::max(a * a, b * b);
    }
    DriftConstants d;
    d.sigma_sq = detail::max_over_slots(ins, [&](const SlotEffects& eff) {
        double s = 0.0;
        for (int n = ins.K; n < ins.num_queues(); ++n)
            s += eff.mu[n] * eff.mu[n] + eff.arrivals[n] * eff.arrivals[n];
        for (int m = 0; m < M; ++m) {
            double a = eff.penalties[m + 1] - glo[m];
            double b = eff.penalties[m + 1] - ghi[m];
            s += std::max(a * a, b * b);
        }
        return s;
    }) + hterm;
    d.et2 = expected_t2_bound(ins.phi, rc);
    d.B = 0.5 * d.sigma_sq * d.et2;
    return d;
}

}  // namespace wssp
