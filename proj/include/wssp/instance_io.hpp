#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "wssp/instance.hpp"

namespace wssp {

inline PenaltyKind parse_penalty_kind(const std::string& s, const std::string& at) {
    if (s == "congestion") return PenaltyKind::congestion;
    if (s == "drop_rate") return PenaltyKind::drop_rate;
    if (s == "delay") return PenaltyKind::delay;
    if (s == "weighted_drop_objective") return PenaltyKind::weighted_drop_objective;
    throw Error(ErrorCategory::config, at + ".kind: unknown penalty kind '" + s + "'");
}

inline const char* penalty_kind_name(PenaltyKind k) {
    switch (k) {
        case PenaltyKind::congestion: return "congestion";
        case PenaltyKind::drop_rate: return "drop_rate";
        case PenaltyKind::delay: return "delay";
        case PenaltyKind::weighted_drop_objective: return "weighted_drop_objective";
        case PenaltyKind::custom: return "custom";
    }
    return "?";
}

// Parses an instance from JSON. Error messages name the offending field.
inline Instance load_instance(const nlohmann::json& j) {
    auto require = [&](const nlohmann::json& obj, const char* field, const std::string& at) {
        if (!obj.contains(field))
            throw Error(ErrorCategory::config, at + ": missing field '" + field + "'");
        return obj.at(field);
    };
    Instance ins;
    try {
        ins.K = require(j, "K", "instance").get<int>();
        ins.N = require(j, "N", "instance").get<int>();
        ins.B_max = require(j, "B_max", "instance").get<int>();
        ins.phi = require(j, "phi", "instance").get<double>();
        if (j.contains("state_ceiling")) ins.state_ceiling = j.at("state_ceiling").get<long long>();

        const auto& outs = require(j, "outcomes", "instance");
        for (std::size_t i = 0; i < outs.size(); ++i) {
            std::string at = "outcomes[" + std::to_string(i) + "]";
            OutcomeSpec o;
            o.prob = require(outs[i], "prob", at).get<double>();
            o.arrivals = require(outs[i], "arrivals", at).get<std::vector<int>>();
            o.channels = require(outs[i], "channels", at).get<std::vector<int>>();
            ins.outcomes.push_back(std::move(o));
        }

        const auto& pens = require(j, "penalties", "instance");
        for (std::size_t m = 0; m < pens.size(); ++m) {
            std::string at = "penalties[" + std::to_string(m) + "]";
            PenaltySpec p;
            p.kind = parse_penalty_kind(require(pens[m], "kind", at).get<std::string>(), at);
            if (pens[m].contains("queue")) p.target_queue = pens[m].at("queue").get<int>();
            if (pens[m].contains("bound")) p.bound = pens[m].at("bound").get<double>();
            if (pens[m].contains("weights"))
                p.weights = pens[m].at("weights").get<std::vector<double>>();
            ins.penalties.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::config, std::string("instance json: ") + e.what());
    }
    ins.finalize();
    return ins;
}

inline Instance load_instance_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCategory::io, "cannot open instance file " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::config, path + ": " + e.what());
    }
    return load_instance(j);
}

}  // namespace wssp
