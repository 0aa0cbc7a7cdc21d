#pragma once

#include <random>
#include <string>
#include <vector>

#include "wssp/instance.hpp"
#include "wssp/instance_io.hpp"
#include "wssp/ssp.hpp"

namespace wssp::testing {

inline std::string instance_path(const std::string& name) {
    return std::string(WSSP_INSTANCE_DIR) + "/" + name;
}

inline Instance reference_instance() { return load_instance_file(instance_path("tiny-k1n1.json")); }

// Single delay-constrained queue, one unconstrained queue, unit channels,
// independent Bernoulli arrivals; built in code so tests don't depend on the
// JSON loader.
inline Instance make_k1n1(double phi = 0.1, double drop_bound = 0.3) {
    Instance ins;
    ins.K = 1;
    ins.N = 1;
    ins.B_max = 2;
    ins.phi = phi;
    ins.outcomes = {
        {0.42, {0, 0}, {1, 1}},
        {0.18, {0, 1}, {1, 1}},
        {0.28, {1, 0}, {1, 1}},
        {0.12, {1, 1}, {1, 1}},
    };
    PenaltySpec obj;
    obj.kind = PenaltyKind::weighted_drop_objective;
    obj.weights = {1.0};
    PenaltySpec con;
    con.kind = PenaltyKind::drop_rate;
    con.target_queue = 0;
    con.bound = drop_bound;
    ins.penalties = {obj, con};
    ins.finalize();
    return ins;
}

// Random tiny instance for property tests: K<=2, B_max<=2, N<=2, random
// Bernoulli-style outcome support with rational-looking probabilities.
inline Instance random_tiny(std::mt19937_64& rng, double phi) {
    std::uniform_int_distribution<int> ki(1, 2), ni(0, 2), bi(1, 2), vi(0, 1), si(0, 2);
    Instance ins;
    ins.K = ki(rng);
    ins.N = ni(rng);
    ins.B_max = bi(rng);
    ins.phi = phi;
    int n_out = 2 + vi(rng);
    std::vector<double> w(n_out);
    double tot = 0.0;
    for (double& x : w) {
        x = 1 + (rng() % 8);
        tot += x;
    }
    for (int i = 0; i < n_out; ++i) {
        OutcomeSpec o;
        o.prob = w[i] / tot;
        for (int q = 0; q < ins.K + ins.N; ++q) {
            o.arrivals.push_back(vi(rng));
            o.channels.push_back(si(rng));
        }
        ins.outcomes.push_back(std::move(o));
    }
    // Fix float round-off so probabilities sum to exactly 1.
    double s = 0.0;
    for (auto& o : ins.outcomes) s += o.prob;
    ins.outcomes.back().prob += 1.0 - s;
    PenaltySpec obj;
    obj.kind = PenaltyKind::weighted_drop_objective;
    obj.weights.assign(ins.K, 1.0);
    ins.penalties = {obj};
    if (vi(rng)) {
        PenaltySpec con;
        con.kind = PenaltyKind::drop_rate;
        con.target_queue = 0;
        con.bound = 0.5;
        ins.penalties.push_back(con);
    }
    ins.finalize();
    return ins;
}

inline CostVector random_costs(std::mt19937_64& rng, long long S, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    CostVector J(S + 1, 0.0);
    for (long long i = 0; i < S; ++i) J[i] = u(rng);
    return J;
}

}  // namespace wssp::testing
