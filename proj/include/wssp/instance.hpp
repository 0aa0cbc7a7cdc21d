#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "wssp/errors.hpp"
#include "wssp/rng.hpp"

namespace wssp {

// Slot randomness: an index into the finite joint (arrival, channel) support,
// plus the independent Bernoulli forced-renewal flag.
struct Outcome {
    int omega = 0;
    bool forced_renewal = false;
};

// One point of the joint (arrival-vector, channel-vector) support.
// Both vectors cover all K+N queues: delay-constrained first, then the rest.
struct OutcomeSpec {
    double prob = 0.0;
    std::vector<int> arrivals;
    std::vector<int> channels;
};

enum class PenaltyKind { congestion, drop_rate, delay, weighted_drop_objective, custom };

struct ControlAction {
    int serve = -1;           // -1 = serve nothing, else queue index in [0, K+N)
    std::vector<int> admit;   // size K, admitted arrivals per delay-constrained queue
};

struct SlotEffects {
    std::vector<double> mu;        // service vector, size K+N
    std::vector<double> arrivals;  // admitted arrivals (first K) and A_n (rest)
    std::vector<double> penalties; // x_0 .. x_M
    int next_state = 0;            // state index after the slot
};

class Instance;

struct PenaltySpec {
    PenaltyKind kind = PenaltyKind::congestion;
    int target_queue = 0;          // k in [0, K), unused for the weighted objective
    double bound = 0.0;            // x_m^av, or W_k^av for delay penalties
    std::vector<double> weights;   // weighted_drop_objective only, size K
    // Extension point for penalties beyond the built-in library. Callers must
    // also supply finite bounds below; the theorem checks are untested for it.
    std::function<double(const Instance&, int /*state*/, const Outcome&, const ControlAction&)> custom;
    double custom_min = 0.0, custom_max = 0.0;

    // Virtual-queue service rate x_m^av: delay constraints enforce x-bar <= 0.
    double x_av() const { return kind == PenaltyKind::delay ? 0.0 : bound; }
};

// Markov-modulated wireless instance: K finite-buffer delay-constrained
// queues, N infinite-buffer queues, one server, i.i.d. slot outcomes, and
// phi-forced renewals that flush the delay-constrained buffers.
class Instance {
public:
    int K = 1;
    int N = 0;
    int B_max = 1;
    double phi = 0.5;
    std::vector<OutcomeSpec> outcomes;
    std::vector<PenaltySpec> penalties;  // [0] is the objective x_0
    long long state_ceiling = 10'000'000;

    int num_queues() const { return K + N; }
    int num_constraints() const { return static_cast<int>(penalties.size()) - 1; }
    int num_outcomes() const { return static_cast<int>(outcomes.size()); }

    long long num_states() const {
        long long n = 1;
        for (int k = 0; k < K; ++k) {
            n *= (B_max + 1);
            if (n > state_ceiling) return state_ceiling + 1;
        }
        return n;
    }

    // Checks the configuration and freezes derived quantities. Must be called
    // once before any other operation.
    void finalize() {
        if (K < 1) throw Error(ErrorCategory::config, "K must be >= 1");
        if (N < 0) throw Error(ErrorCategory::config, "N must be >= 0");
        if (B_max < 0) throw Error(ErrorCategory::config, "B_max must be >= 0");
        if (phi <= 0.0 || phi > 1.0) throw Error(ErrorCategory::config, "phi must be in (0,1]");
        if (outcomes.empty()) throw Error(ErrorCategory::config, "outcomes: empty support");
        double psum = 0.0;
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            const auto& o = outcomes[i];
            if (o.prob < 0.0)
                throw Error(ErrorCategory::config, "outcomes[" + std::to_string(i) + "].prob negative");
            if (static_cast<int>(o.arrivals.size()) != num_queues())
                throw Error(ErrorCategory::config, "outcomes[" + std::to_string(i) + "].arrivals: need K+N entries");
            if (static_cast<int>(o.channels.size()) != num_queues())
                throw Error(ErrorCategory::config, "outcomes[" + std::to_string(i) + "].channels: need K+N entries");
            for (int v : o.arrivals)
                if (v < 0) throw Error(ErrorCategory::config, "outcomes[" + std::to_string(i) + "].arrivals negative");
            for (int v : o.channels)
                if (v < 0) throw Error(ErrorCategory::config, "outcomes[" + std::to_string(i) + "].channels negative");
            psum += o.prob;
        }
        if (std::abs(psum - 1.0) > 1e-12)
            throw Error(ErrorCategory::config, "outcomes: probabilities sum to " + std::to_string(psum));
        if (penalties.empty())
            throw Error(ErrorCategory::config, "penalties: need at least the objective entry");
        if (num_states() > state_ceiling)
            throw Error(ErrorCategory::capacity, "state space exceeds ceiling of " +
                                                     std::to_string(state_ceiling));

        a_max_ = 0;
        s_max_ = 0;
        for (const auto& o : outcomes) {
            for (int v : o.arrivals) a_max_ = std::max(a_max_, v);
            for (int v : o.channels) s_max_ = std::max(s_max_, v);
        }
        for (std::size_t m = 0; m < penalties.size(); ++m) validate_penalty(m);

        states_.clear();
        const int S = static_cast<int>(num_states());
        states_.reserve(S);
        for (int idx = 0; idx < S; ++idx) states_.push_back(decode_state(idx));
        cum_probs_.resize(outcomes.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            acc += outcomes[i].prob;
            cum_probs_[i] = acc;
        }
        cum_probs_.back() = 1.0;
        action_cache_.assign(static_cast<std::size_t>(S) * outcomes.size(), {});
        finalized_ = true;
    }

    bool finalized() const { return finalized_; }

    int a_max() const { return a_max_; }
    int s_max() const { return s_max_; }

    // Fixed deterministic enumeration; index 0 is the all-zero state.
    const std::vector<std::vector<int>>& enumerate_states() const {
        check_final();
        return states_;
    }

    std::vector<int> decode_state(int idx) const {
        std::vector<int> z(K);
        for (int k = 0; k < K; ++k) {
            z[k] = idx % (B_max + 1);
            idx /= (B_max + 1);
        }
        return z;
    }

    int encode_state(const std::vector<int>& z) const {
        int idx = 0;
        for (int k = K - 1; k >= 0; --k) idx = idx * (B_max + 1) + z[k];
        return idx;
    }

    // Actions available under (omega, z). The forced-renewal flag does not
    // change the set: admits always respect the no-renewal buffer cap so the
    // enumeration is identical for phi(t)=0 and phi(t)=1.
    // Order: serve none, then serve 0,1,...; admits lexicographic ascending.
    const std::vector<ControlAction>& feasible_actions(const Outcome& out, int state) const {
        check_final();
        auto& slot = action_cache_[static_cast<std::size_t>(state) * outcomes.size() + out.omega];
        if (!slot.empty()) return slot;
        const auto& z = states_[state];
        const auto& ospec = outcomes[out.omega];
        for (int serve = -1; serve < num_queues(); ++serve) {
            std::vector<int> ub(K);
            for (int k = 0; k < K; ++k) {
                int mu_k = (serve == k) ? ospec.channels[k] : 0;
                int drained = std::max(z[k] - mu_k, 0);
                ub[k] = std::min(ospec.arrivals[k], B_max - drained);
            }
            std::vector<int> admit(K, 0);
            for (;;) {
                slot.push_back(ControlAction{serve, admit});
                int k = K - 1;
                while (k >= 0 && admit[k] == ub[k]) admit[k--] = 0;
                if (k < 0) break;
                ++admit[k];
            }
        }
        return slot;
    }

    bool action_feasible(const Outcome& out, int state, const ControlAction& a) const {
        if (a.serve < -1 || a.serve >= num_queues()) return false;
        if (static_cast<int>(a.admit.size()) != K) return false;
        const auto& z = states_[state];
        const auto& ospec = outcomes[out.omega];
        for (int k = 0; k < K; ++k) {
            if (a.admit[k] < 0 || a.admit[k] > ospec.arrivals[k]) return false;
            int mu_k = (a.serve == k) ? ospec.channels[k] : 0;
            if (std::max(z[k] - mu_k, 0) + a.admit[k] > B_max) return false;
        }
        return true;
    }

    // Deterministic slot dynamics: transition probabilities are 0/1 given
    // (state, outcome, action).
    SlotEffects step(int state, const Outcome& out, const ControlAction& a) const {
        check_final();
        if (!action_feasible(out, state, a))
            throw Error(ErrorCategory::config, "infeasible action passed to step()");
        const auto& z = states_[state];
        const auto& ospec = outcomes[out.omega];
        SlotEffects eff;
        eff.mu.assign(num_queues(), 0.0);
        if (a.serve >= 0) eff.mu[a.serve] = ospec.channels[a.serve];
        eff.arrivals.resize(num_queues());
        for (int k = 0; k < K; ++k) eff.arrivals[k] = a.admit[k];
        for (int n = K; n < num_queues(); ++n) eff.arrivals[n] = ospec.arrivals[n];
        eff.penalties.resize(penalties.size());
        for (std::size_t m = 0; m < penalties.size(); ++m)
            eff.penalties[m] = evaluate_penalty(penalties[m], state, out, a);
        if (out.forced_renewal) {
            eff.next_state = 0;
        } else {
            std::vector<int> nz(K);
            for (int k = 0; k < K; ++k) {
                int mu_k = (a.serve == k) ? ospec.channels[k] : 0;
                nz[k] = std::max(z[k] - mu_k, 0) + a.admit[k];
            }
            eff.next_state = encode_state(nz);
        }
        return eff;
    }

    double evaluate_penalty(const PenaltySpec& spec, int state, const Outcome& out,
                            const ControlAction& a) const {
        const auto& z = states_[state];
        const auto& ospec = outcomes[out.omega];
        auto mu_tilde = [&](int k) {
            int mu_k = (a.serve == k) ? ospec.channels[k] : 0;
            return std::min(mu_k, z[k]);
        };
        auto drops = [&](int k) -> double {
            if (out.forced_renewal) return ospec.arrivals[k] + z[k] - mu_tilde(k);
            return ospec.arrivals[k] - a.admit[k];
        };
        switch (spec.kind) {
            case PenaltyKind::congestion:
                return z[spec.target_queue];
            case PenaltyKind::drop_rate:
                return drops(spec.target_queue);
            case PenaltyKind::delay:
                return z[spec.target_queue] - mu_tilde(spec.target_queue) * spec.bound;
            case PenaltyKind::weighted_drop_objective: {
                double s = 0.0;
                for (int k = 0; k < K; ++k) s += spec.weights[k] * drops(k);
                return s;
            }
            case PenaltyKind::custom:
                return spec.custom(*this, state, out, a);
        }
        return 0.0;
    }

    // Declared [x_min, x_max] range of penalty m, derived from the instance bounds.
    std::pair<double, double> penalty_range(int m) const {
        const auto& spec = penalties[m];
        switch (spec.kind) {
            case PenaltyKind::congestion:
                return {0.0, double(B_max)};
            case PenaltyKind::drop_rate:
                return {0.0, double(a_max_ + B_max)};
            case PenaltyKind::delay:
                return {-double(s_max_) * spec.bound, double(B_max)};
            case PenaltyKind::weighted_drop_objective: {
                double hi = 0.0;
                for (int k = 0; k < K; ++k) hi += spec.weights[k] * (a_max_ + B_max);
                return {0.0, hi};
            }
            case PenaltyKind::custom:
                return {spec.custom_min, spec.custom_max};
        }
        return {0.0, 0.0};
    }

    Outcome sample_outcome(std::mt19937_64& rng) const {
        check_final();
        Outcome out;
        double u = uniform01(rng);
        out.omega = int(std::lower_bound(cum_probs_.begin(), cum_probs_.end(), u) -
                        cum_probs_.begin());
        if (out.omega >= num_outcomes()) out.omega = num_outcomes() - 1;
        out.forced_renewal = uniform01(rng) < phi;
        return out;
    }

private:
    void validate_penalty(std::size_t m) const {
        const auto& spec = penalties[m];
        std::string at = "penalties[" + std::to_string(m) + "]";
        if (spec.kind != PenaltyKind::weighted_drop_objective &&
            spec.kind != PenaltyKind::custom) {
            if (spec.target_queue < 0 || spec.target_queue >= K)
                throw Error(ErrorCategory::config, at + ".queue out of range");
        }
        if (spec.kind == PenaltyKind::delay && spec.bound <= 0.0)
            throw Error(ErrorCategory::config, at + ".bound: delay target W_av must be > 0");
        if (!std::isfinite(spec.bound))
            throw Error(ErrorCategory::config, at + ".bound not finite");
        if (spec.kind == PenaltyKind::weighted_drop_objective) {
            if (static_cast<int>(spec.weights.size()) != K)
                throw Error(ErrorCategory::config, at + ".weights: need K entries");
            for (double w : spec.weights)
                if (w < 0.0) throw Error(ErrorCategory::config, at + ".weights negative");
        }
        if (spec.kind == PenaltyKind::custom && !spec.custom)
            throw Error(ErrorCategory::config, at + ": custom penalty without callback");
    }

    void check_final() const {
        if (!finalized_) throw Error(ErrorCategory::config, "instance not finalized");
    }

    bool finalized_ = false;
    int a_max_ = 0, s_max_ = 0;
    std::vector<std::vector<int>> states_;
    std::vector<double> cum_probs_;
    mutable std::vector<std::vector<ControlAction>> action_cache_;
};

}  // namespace wssp
