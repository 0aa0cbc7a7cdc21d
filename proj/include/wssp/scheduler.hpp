#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "wssp/instance.hpp"
#include "wssp/queues.hpp"
#include "wssp/rng.hpp"
#include "wssp/ssp.hpp"

namespace wssp {

// Frame-boundary test at the start of slot t. `zero_visits` counts empty-state
// visits since the last declared renewal (bth_state_zero only) and is owned by
// the caller. Slot 0 is always a renewal.
inline bool detect_renewal(const RenewalConfig& cfg, int z, bool prev_forced, long long t,
                           long long& zero_visits) {
    if (t == 0) {
        zero_visits = 0;
        return true;
    }
    switch (cfg.type) {
        case RenewalType::state_zero:
            return z == 0;
        case RenewalType::forced_only:
            return prev_forced;
        case RenewalType::bth_state_zero:
            if (z != 0) return false;
            if (++zero_visits >= cfg.b) {
                zero_visits = 0;
                return true;
            }
            return false;
    }
    return false;
}

enum class SolverMode { exact, rm_classic, rm_fixed };

struct SolverConfig {
    SolverMode mode = SolverMode::exact;
    double gamma = 0.1;       // rm_fixed step size
    int batch = 0;            // samples per iteration; 0 = whole collected history
    long long iters = 1;      // stochastic iterations per frame
    int history = 64;         // delayed-sample window W
    double tol = 1e-10;       // exact-solver residual target
    int max_sweeps = 100000;
    bool warm_start = true;
};

struct FrameRecord {
    long long start_slot = 0;
    long long duration = 0;
    double frame_cost = 0.0;          // stage costs summed under the frozen weights
    double backlog_at_start = 0.0;    // sum of Q and Y at the renewal slot
    std::vector<double> penalty_sums; // per penalty, summed over the frame
    std::vector<double> gamma;        // auxiliary variables (generalized mode)
    double solver_residual = 0.0;
    long long solver_iters = 0;
    double mismatch_delta = 0.0;      // beta/phi vs the frozen current weights
    long long history_gap = 0;        // F = t_g - t_start in delayed mode
    bool exact_fallback = false;
};

struct SlotRow {
    long long t = 0;
    long long frame = 0;
    int state = 0;
    int omega = 0;
    bool forced = false;
    int serve = -1;
    std::vector<int> admit;
    std::vector<double> penalties;
    std::vector<double> Q, Y, W;
};

struct SimConfig {
    RenewalConfig renewal;
    SolverConfig solver;
    double V = 0.0;
    long long slots = 1000;
    std::uint64_t seed = 1;
    bool keep_frames = false;
    bool per_slot_weights = false;  // experimental: re-weigh every slot (exact solver only)
    const GeneralizedSpec* gen = nullptr;
    long long w_checkpoint_every = 1000;
};

struct SimResult {
    long long slots = 0;
    long long frames = 0;
    std::vector<double> penalty_avgs;       // time averages of x_0..x_M
    double frame_start_backlog_avg = 0.0;   // (1/G) sum over frames of (Q+Y at t_g)
    double time_avg_backlog = 0.0;
    double avg_frame_cost = 0.0;
    double avg_frame_len = 0.0;
    std::vector<double> avg_delay;          // per delay-constrained queue, served packets
    std::vector<long long> served, admitted, dropped;  // per delay-constrained queue
    long long exact_fallbacks = 0;
    std::vector<FrameRecord> frame_log;     // only when keep_frames
    // generalized mode
    std::vector<double> final_W;
    std::vector<double> gamma_avg;          // time average of the frozen gamma
    std::vector<std::pair<long long, double>> w_checkpoints;  // (t, max_m |W_m(t)|)
};

// Per-slot stage cost under fixed weights (the quantity the SSP minimizes).
inline double stage_cost(const Instance& ins, const StageWeights& w, const SlotEffects& eff) {
    double c = w.constant + w.V * eff.penalties[0];
    for (int n = 0; n < ins.N; ++n)
        c -= w.Q[n] * (eff.mu[ins.K + n] - eff.arrivals[ins.K + n]);
    for (int m = 0; m < ins.num_constraints(); ++m)
        c -= w.Y[m] * (w.x_av[m] - eff.penalties[m + 1]);
    return c;
}

// beta / phi of two weight vectors: beta is the exact sup over
// (state, outcome, forced, action) of the stage-cost difference. The V terms
// cancel when both weights share V, so beta does not depend on V.
inline double mismatch_bound(const Instance& ins, const StageWeights& w1,
                             const StageWeights& w2) {
    // The V x_0 terms cancel identically, so the difference is accumulated
    // without them; this keeps beta exactly independent of V.
    double beta = detail::max_over_slots(ins, [&](const SlotEffects& eff) {
        double d = w1.constant - w2.constant;
        for (int n = 0; n < ins.N; ++n)
            d -= (w1.Q[n] - w2.Q[n]) * (eff.mu[ins.K + n] - eff.arrivals[ins.K + n]);
        for (int m = 0; m < ins.num_constraints(); ++m)
            d -= w1.Y[m] * (w1.x_av[m] - eff.penalties[m + 1]) -
                 w2.Y[m] * (w2.x_av[m] - eff.penalties[m + 1]);
        return std::abs(d);
    });
    return beta / ins.phi;
}

// --- auxiliary-variable minimization ---------------------------------------

// Golden-section search for a unimodal g on [lo, hi].
inline double golden_min(const std::function<double(double)>& g, double lo, double hi,
                         double tol = 1e-9) {
    constexpr double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
    double f1 = g(x1), f2 = g(x2);
    while (b - a > tol) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = g(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = g(x2);
        }
    }
    double mid = 0.5 * (a + b);
    // Endpoints of the original box can beat the interior for linear g.
    double best = mid, bv = g(mid);
    for (double c : {lo, hi})
        if (g(c) < bv) {
            bv = g(c);
            best = c;
        }
    return best;
}

// Minimizes V f(gamma) - sum_m W[m] gamma_m + sum_l Yl[l] h_l(gamma) over the
// box [x_m^min - alpha, x_m^max + alpha]. Convex separable objectives finish
// in one coordinate pass; non-separable ones run cyclic coordinate descent.
inline std::vector<double> aux_minimize(const Instance& ins, const GeneralizedSpec& gen,
                                        const std::vector<double>& W,
                                        const std::vector<double>& Yl, double V,
                                        std::vector<double> start = {}) {
    const int M = ins.num_constraints();
    std::vector<double> lo(M), hi(M);
    for (int m = 0; m < M; ++m) {
        auto [a, b] = ins.penalty_range(m + 1);
        lo[m] = a - gen.alpha;
        hi[m] = b + gen.alpha;
        if (lo[m] > hi[m]) throw Error(ErrorCategory::config, "aux_minimize: empty gamma box");
    }
    std::vector<double> g = start.empty() ? lo : std::move(start);
    auto obj = [&](const std::vector<double>& x) {
        double v = V * (gen.f ? gen.f(x) : 0.0);
        for (int m = 0; m < M; ++m) v -= W[m] * x[m];
        for (std::size_t l = 0; l < gen.h.size(); ++l) v += Yl[l] * gen.h[l](x);
        return v;
    };
    const int passes = gen.separable ? 1 : 10000;
    double prev = obj(g);
    for (int p = 0; p < passes; ++p) {
        for (int m = 0; m < M; ++m) {
            g[m] = golden_min(
                [&](double x) {
                    g[m] = x;
                    return obj(g);
                },
                lo[m], hi[m], 1e-9);
        }
        double cur = obj(g);
        if (std::abs(prev - cur) <= 1e-8) break;
        prev = cur;
    }
    return g;
}

// --- the frame scheduler ----------------------------------------------------

// Outer control loop: renewal detection, frame-start solve (exact, or
// stochastic iterates fed by delayed history samples), per-slot greedy
// execution, queue updates, and metric accumulation.
class Simulator {
public:
    using SlotCallback = std::function<void(const SlotRow&)>;
    using FrameCallback = std::function<void(const FrameRecord&)>;

    Simulator(const Instance& ins, SimConfig cfg)
        : ins_(ins), cfg_(cfg), solver_(ins, cfg.renewal) {
        if (cfg_.gen) {
            if (static_cast<int>(cfg_.gen->h.size()) != static_cast<int>(cfg_.gen->c.size()))
                throw Error(ErrorCategory::config, "generalized spec: h/c size mismatch");
        }
        if (cfg_.per_slot_weights &&
            (cfg_.gen || cfg_.solver.mode != SolverMode::exact))
            throw Error(ErrorCategory::config,
                        "per-slot weights require the exact solver and basic mode");
    }

    SimResult run(SlotCallback on_slot = {}, FrameCallback on_frame = {}) {
        const Instance& ins = ins_;
        const int K = ins.K, M = ins.num_constraints(), M1 = M + 1;
        const int L = cfg_.gen ? static_cast<int>(cfg_.gen->h.size()) : 0;

        std::mt19937_64 rng = SeedSplitter(cfg_.seed).stream("outcomes");
        Backlog bl = Backlog::zero(ins);
        GeneralBacklog gbl = GeneralBacklog::zero(M, L);

        // Full-run history for delayed sampling: omega, forced flag, and the
        // backlog snapshot at the start of each slot.
        std::vector<int> omega_hist;
        std::vector<char> forced_hist;
        std::vector<Backlog> theta_hist;
        const bool need_history = cfg_.solver.mode != SolverMode::exact;
        if (need_history) {
            omega_hist.reserve(cfg_.slots);
            forced_hist.reserve(cfg_.slots);
            theta_hist.reserve(cfg_.slots);
        }

        SimResult res;
        res.penalty_avgs.assign(M1, 0.0);
        res.avg_delay.assign(K, 0.0);
        res.served.assign(K, 0);
        res.admitted.assign(K, 0);
        res.dropped.assign(K, 0);
        std::vector<long long> delay_sum(K, 0);

        std::vector<std::deque<long long>> fifo(K);
        CostVector J = zero_costs(ins.num_states());
        StageWeights frozen;
        std::vector<double> gamma(M, 0.0), gamma_sum(M, 0.0);
        FrameRecord frame;
        int z = 0;
        bool prev_forced = false;
        long long zero_visits = 0;
        long long frame_idx = -1;
        long long rm_count = 0;  // classic-averaging iteration counter
        double backlog_slot_sum = 0.0, frame_cost_sum = 0.0, frame_start_backlog_sum = 0.0;

        auto close_frame = [&]() {
            if (frame_idx < 0) return;
            frame_cost_sum += frame.frame_cost;
            if (on_frame) on_frame(frame);
            if (cfg_.keep_frames) res.frame_log.push_back(frame);
        };

        for (long long t = 0; t < cfg_.slots; ++t) {
            bool renewal = detect_renewal(cfg_.renewal, z, prev_forced, t, zero_visits);
            Outcome out = ins.sample_outcome(rng);
            if (need_history) {
                omega_hist.push_back(out.omega);
                forced_hist.push_back(out.forced_renewal ? 1 : 0);
                theta_hist.push_back(bl);
            }

            if (renewal) {
                close_frame();
                ++frame_idx;
                frame = FrameRecord{};
                frame.start_slot = t;
                frame.penalty_sums.assign(M1, 0.0);
                frame.backlog_at_start = bl.total();
                frame_start_backlog_sum += bl.total();
                if (cfg_.gen) {
                    gamma = aux_minimize(ins, *cfg_.gen, gbl.W, gbl.Yl, cfg_.V, gamma);
                    frame.gamma = gamma;
                }
                solve_frame(t, bl, gbl, gamma, omega_hist, forced_hist, theta_hist, J, frozen,
                            rm_count, frame);
            } else if (cfg_.per_slot_weights) {
                // Experimental mode: re-weigh with the live backlog mid-frame.
                // Frame costs still use the frozen frame-start weights.
                solver_.set_weights(StageWeights::from_backlog(ins, bl, cfg_.V));
                solver_.solve_exact(J, cfg_.solver.tol, cfg_.solver.max_sweeps);
            }

            ControlAction act = solver_.greedy_action(J, z, out);
            SlotEffects eff = ins_.step(z, out, act);

            // FIFO delay accounting: serve from the head, then flush on a
            // forced renewal, then admit this slot's accepted arrivals.
            for (int k = 0; k < K; ++k) {
                int served = std::min(act.serve == k ? ins.outcomes[out.omega].channels[k] : 0,
                                      ins.enumerate_states()[z][k]);
                for (int s = 0; s < served; ++s) {
                    delay_sum[k] += t - fifo[k].front();
                    fifo[k].pop_front();
                    ++res.served[k];
                }
                if (out.forced_renewal) {
                    res.dropped[k] += static_cast<long long>(fifo[k].size());
                    fifo[k].clear();
                    res.dropped[k] += ins.outcomes[out.omega].arrivals[k];
                } else {
                    for (int s = 0; s < act.admit[k]; ++s) fifo[k].push_back(t);
                    res.admitted[k] += act.admit[k];
                    res.dropped[k] += ins.outcomes[out.omega].arrivals[k] - act.admit[k];
                }
            }

            for (int m = 0; m < M1; ++m) {
                res.penalty_avgs[m] += eff.penalties[m];
                frame.penalty_sums[m] += eff.penalties[m];
            }
            frame.frame_cost += stage_cost(ins, frozen, eff);
            ++frame.duration;
            backlog_slot_sum += bl.total();
            for (int m = 0; m < M; ++m) gamma_sum[m] += gamma[m];

            if (on_slot) {
                SlotRow row{t,       frame_idx, z, out.omega, out.forced_renewal,
                            act.serve, act.admit, eff.penalties, bl.Q, bl.Y, gbl.W};
                on_slot(row);
            }

            bl.apply_slot(ins, eff);
            if (cfg_.gen) gbl.apply_slot(ins, *cfg_.gen, gamma, eff);
            if (cfg_.gen && cfg_.w_checkpoint_every > 0 &&
                (t + 1) % cfg_.w_checkpoint_every == 0) {
                double w_abs = 0.0;
                for (double w : gbl.W) w_abs = std::max(w_abs, std::abs(w));
                res.w_checkpoints.emplace_back(t + 1, w_abs);
            }
            z = eff.next_state;
            prev_forced = out.forced_renewal;
        }
        close_frame();

        res.slots = cfg_.slots;
        res.frames = frame_idx + 1;
        for (int m = 0; m < M1; ++m) res.penalty_avgs[m] /= double(cfg_.slots);
        res.time_avg_backlog = backlog_slot_sum / double(cfg_.slots);
        res.frame_start_backlog_avg = frame_start_backlog_sum / double(res.frames);
        res.avg_frame_cost = frame_cost_sum / double(res.frames);
        res.avg_frame_len = double(cfg_.slots) / double(res.frames);
        for (int k = 0; k < K; ++k)
            res.avg_delay[k] = res.served[k] ? double(delay_sum[k]) / double(res.served[k])
                                             : std::numeric_limits<double>::quiet_NaN();
        res.exact_fallbacks = exact_fallbacks_;
        if (cfg_.gen) {
            res.final_W = gbl.W;
            res.gamma_avg.resize(M);
            for (int m = 0; m < M; ++m) res.gamma_avg[m] = gamma_sum[m] / double(cfg_.slots);
        }
        return res;
    }

private:
    // Builds the frame's stage weights and cost-to-go vector J.
    void solve_frame(long long t_g, const Backlog& bl, const GeneralBacklog& gbl,
                     const std::vector<double>& gamma, const std::vector<int>& omega_hist,
                     const std::vector<char>& forced_hist, const std::vector<Backlog>& theta_hist,
                     CostVector& J, StageWeights& frozen, long long& rm_count,
                     FrameRecord& frame) {
        const Instance& ins = ins_;
        auto weights_for = [&](const Backlog& b) {
            if (!cfg_.gen) return StageWeights::from_backlog(ins, b, cfg_.V);
            // Auxiliary-variable stage cost: the W queues take the Y slot with
            // targets gamma, and the gamma-only terms are a per-slot constant.
            StageWeights w;
            w.Q = b.Q;
            w.Y = gbl.W;
            w.x_av = gamma;
            w.V = 0.0;
            w.constant = cfg_.V * (cfg_.gen->f ? cfg_.gen->f(gamma) : 0.0);
            for (std::size_t l = 0; l < cfg_.gen->h.size(); ++l)
                w.constant -= gbl.Yl[l] * (cfg_.gen->c[l] - cfg_.gen->h[l](gamma));
            return w;
        };
        frozen = weights_for(bl);

        if (cfg_.solver.mode == SolverMode::exact) {
            solver_.set_weights(frozen);
            if (!cfg_.solver.warm_start) J = zero_costs(ins.num_states());
            frame.solver_residual = solver_.solve_exact(J, cfg_.solver.tol, cfg_.solver.max_sweeps);
            return;
        }

        // Delayed-history sampling: W omegas that are independent of the
        // weight snapshot used for the stage costs.
        const int W = cfg_.solver.history;
        long long t_start = -1;
        std::vector<int> samples;
        if (cfg_.renewal.type == RenewalType::forced_only) {
            if (t_g - W + 1 >= 0) {
                t_start = t_g - W + 1;
                samples.assign(omega_hist.begin() + t_start, omega_hist.begin() + t_g + 1);
            }
        } else {
            // Sample backwards from the last forced-renewal event before t_g.
            long long t_f = -1;
            for (long long s = t_g - 1; s >= 0; --s)
                if (forced_hist[s]) {
                    t_f = s;
                    break;
                }
            if (t_f >= 0 && t_f - W + 1 >= 0) {
                t_start = t_f - W + 1;
                samples.assign(omega_hist.begin() + t_start, omega_hist.begin() + t_f + 1);
            }
        }
        if (samples.empty()) {
            // Bootstrap frames without enough history solve exactly.
            ++exact_fallbacks_;
            frame.exact_fallback = true;
            solver_.set_weights(frozen);
            if (!cfg_.solver.warm_start) J = zero_costs(ins.num_states());
            frame.solver_residual = solver_.solve_exact(J, cfg_.solver.tol, cfg_.solver.max_sweeps);
            return;
        }
        frame.history_gap = t_g - t_start;
        StageWeights delayed =
            cfg_.gen ? frozen : StageWeights::from_backlog(ins, theta_hist[t_start], cfg_.V);
        frame.mismatch_delta = cfg_.gen ? 0.0 : mismatch_bound(ins, frozen, delayed);
        solver_.set_weights(delayed);
        frozen = delayed;  // the whole frame runs on the sample-independent weights
        if (!cfg_.solver.warm_start) J = zero_costs(ins.num_states());

        const int Lb = cfg_.solver.batch > 0
                           ? std::min<int>(cfg_.solver.batch, static_cast<int>(samples.size()))
                           : static_cast<int>(samples.size());
        std::vector<int> batch(Lb);
        for (long long it = 0; it < cfg_.solver.iters; ++it) {
            for (int i = 0; i < Lb; ++i)
                batch[i] = samples[(it * Lb + i) % samples.size()];
            CostVector psi_hat = solver_.psi_sampled(J, batch);
            if (cfg_.solver.mode == SolverMode::rm_classic) {
                J = iterate_classic(J, psi_hat, rm_count);
                ++rm_count;
            } else {
                J = iterate_fixed_gamma(J, psi_hat, cfg_.solver.gamma);
            }
            ++frame.solver_iters;
        }
    }

    const Instance& ins_;
    SimConfig cfg_;
    SspSolver solver_;
    long long exact_fallbacks_ = 0;
};

}  // namespace wssp
