// Command-line front end: simulate an instance, verify theorem bounds against
// independently computed optima, or sweep the penalty weight V.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wssp/instance_io.hpp"
#include "wssp/oracle.hpp"
#include "wssp/scheduler.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kSchemaVersion = "1";

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

struct Options {
    std::string mode = "run";
    std::string instance;
    std::string out = ".";
    std::string solver = "exact";
    std::string v_list = "0";
    std::uint64_t seed = 1;
    long long slots = 100000;
    int reps = 1;
    int renewal = 2;
    long long renewal_b = 1;
    double gamma = 0.1;
    int batch = 0;
    int iters = 1;
    int history = 64;
    bool gen_quad = false;
    double gen_c = 0.0;
    double alpha = 0.0;
    bool keep_frames = false;
};

std::vector<double> parse_v_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        try {
            std::size_t pos = 0;
            double v = std::stod(tok, &pos);
            if (pos != tok.size()) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            throw wssp::Error(wssp::ErrorCategory::config, "--v: cannot parse '" + tok + "'");
        }
    }
    if (out.empty()) throw wssp::Error(wssp::ErrorCategory::config, "--v: empty list");
    return out;
}

std::string config_string(const Options& o, double V) {
    std::ostringstream s;
    s << o.mode << '|' << o.instance << '|' << o.solver << '|' << V << '|' << o.seed << '|'
      << o.slots << '|' << o.reps << '|' << o.renewal << '|' << o.renewal_b << '|' << o.gamma
      << '|' << o.batch << '|' << o.iters << '|' << o.history << '|' << o.gen_quad << '|'
      << o.gen_c << '|' << o.alpha;
    return s.str();
}

wssp::SimConfig make_sim_config(const Options& o, double V, std::uint64_t seed,
                                const wssp::GeneralizedSpec* gen) {
    wssp::SimConfig cfg;
    cfg.renewal.type = static_cast<wssp::RenewalType>(o.renewal);
    cfg.renewal.b = o.renewal_b;
    cfg.V = V;
    cfg.slots = o.slots;
    cfg.seed = seed;
    cfg.keep_frames = o.keep_frames;
    cfg.gen = gen;
    if (o.solver == "exact")
        cfg.solver.mode = wssp::SolverMode::exact;
    else if (o.solver == "rm-classic")
        cfg.solver.mode = wssp::SolverMode::rm_classic;
    else if (o.solver == "rm-fixed")
        cfg.solver.mode = wssp::SolverMode::rm_fixed;
    else
        throw wssp::Error(wssp::ErrorCategory::config, "--solver: unknown value " + o.solver);
    cfg.solver.gamma = o.gamma;
    cfg.solver.batch = o.batch;
    cfg.solver.iters = o.iters;
    cfg.solver.history = o.history;
    return cfg;
}

json summary_json(const wssp::Instance& ins, const wssp::SimResult& r) {
    json j;
    j["slots"] = r.slots;
    j["frames"] = r.frames;
    j["penalty_avgs"] = r.penalty_avgs;
    j["frame_start_backlog_avg"] = r.frame_start_backlog_avg;
    j["time_avg_backlog"] = r.time_avg_backlog;
    j["avg_frame_cost"] = r.avg_frame_cost;
    j["avg_frame_len"] = r.avg_frame_len;
    j["avg_delay"] = r.avg_delay;
    j["served"] = r.served;
    j["admitted"] = r.admitted;
    j["dropped"] = r.dropped;
    j["exact_fallbacks"] = r.exact_fallbacks;
    if (!r.final_W.empty()) {
        j["final_W"] = r.final_W;
        j["gamma_avg"] = r.gamma_avg;
    }
    (void)ins;
    return j;
}

void write_trace(const fs::path& path, const Options& o, double V,
                 const std::vector<wssp::SlotRow>& rows) {
    std::ofstream f(path);
    if (!f) throw wssp::Error(wssp::ErrorCategory::io, "cannot open " + path.string());
    f << "# schema-version " << kSchemaVersion << "\n";
    f << "# config-hash " << fnv1a(config_string(o, V)) << "\n";
    f << "# seed " << o.seed << "\n";
    f << "t,frame,state,omega,forced,serve,admit,penalties,Q,Y\n";
    auto join = [](const auto& v) {
        std::ostringstream s;
        for (std::size_t i = 0; i < v.size(); ++i) s << (i ? ";" : "") << v[i];
        return s.str();
    };
    for (const auto& r : rows) {
        f << r.t << ',' << r.frame << ',' << r.state << ',' << r.omega << ',' << int(r.forced)
          << ',' << r.serve << ',' << join(r.admit) << ',' << join(r.penalties) << ','
          << join(r.Q) << ',' << join(r.Y) << "\n";
    }
}

void write_frames(const fs::path& path, const wssp::SimResult& res) {
    std::ofstream f(path);
    if (!f) throw wssp::Error(wssp::ErrorCategory::io, "cannot open " + path.string());
    for (const auto& fr : res.frame_log) {
        json j;
        j["start_slot"] = fr.start_slot;
        j["duration"] = fr.duration;
        j["frame_cost"] = fr.frame_cost;
        j["backlog_at_start"] = fr.backlog_at_start;
        j["penalty_sums"] = fr.penalty_sums;
        j["solver_residual"] = fr.solver_residual;
        j["solver_iters"] = fr.solver_iters;
        j["mismatch_delta"] = fr.mismatch_delta;
        j["history_gap"] = fr.history_gap;
        j["exact_fallback"] = fr.exact_fallback;
        if (!fr.gamma.empty()) j["gamma"] = fr.gamma;
        f << j.dump() << "\n";
    }
}

int mode_run(const Options& o, const wssp::Instance& ins, const wssp::GeneralizedSpec* gen) {
    double V = parse_v_list(o.v_list).front();
    fs::create_directories(o.out);
    json summary;
    summary["schema_version"] = kSchemaVersion;
    summary["config_hash"] = fnv1a(config_string(o, V));
    summary["seed"] = o.seed;
    summary["V"] = V;

    if (o.reps <= 1) {
        Options oo = o;
        oo.keep_frames = true;
        wssp::Simulator sim(ins, make_sim_config(oo, V, o.seed, gen));
        std::vector<wssp::SlotRow> rows;
        wssp::SimResult res = sim.run([&](const wssp::SlotRow& r) { rows.push_back(r); });
        write_trace(fs::path(o.out) / "trace.csv", o, V, rows);
        write_frames(fs::path(o.out) / "frames.jsonl", res);
        summary["result"] = summary_json(ins, res);
    } else {
        wssp::SeedSplitter split(o.seed);
        std::vector<wssp::SimResult> results(o.reps);
        std::vector<std::exception_ptr> errs(o.reps);
        std::vector<std::thread> pool;
        for (int i = 0; i < o.reps; ++i)
            pool.emplace_back([&, i] {
                try {
                    wssp::Simulator sim(ins, make_sim_config(o, V, split.child_seed("rep", i), gen));
                    results[i] = sim.run();
                } catch (...) {
                    errs[i] = std::current_exception();
                }
            });
        for (auto& t : pool) t.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
        json reps = json::array();
        for (const auto& r : results) reps.push_back(summary_json(ins, r));
        summary["reps"] = reps;
        json mean;
        std::vector<double> pa(results[0].penalty_avgs.size(), 0.0);
        double bl = 0.0;
        for (const auto& r : results) {
            for (std::size_t m = 0; m < pa.size(); ++m) pa[m] += r.penalty_avgs[m] / o.reps;
            bl += r.frame_start_backlog_avg / o.reps;
        }
        mean["penalty_avgs"] = pa;
        mean["frame_start_backlog_avg"] = bl;
        summary["mean"] = mean;
    }
    std::ofstream f(fs::path(o.out) / "summary.json");
    if (!f) throw wssp::Error(wssp::ErrorCategory::io, "cannot open summary.json");
    f << summary.dump(2) << "\n";
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int mode_verify(const Options& o, const wssp::Instance& ins, const wssp::GeneralizedSpec* gen) {
    double V = parse_v_list(o.v_list).front();
    wssp::Simulator sim(ins, make_sim_config(o, V, o.seed, gen));
    wssp::SimResult res = sim.run();

    wssp::VerifyInputs in;
    in.V = V;
    in.dc = gen ? wssp::compute_drift_constants_generalized(ins, *gen,
                                                            make_sim_config(o, V, o.seed, gen).renewal)
                : wssp::compute_drift_constants(ins, make_sim_config(o, V, o.seed, gen).renewal);
    if (gen) {
        in.gen = gen;
        if (ins.num_constraints() == 1) in.f_opt = wssp::f_opt_grid(ins, *gen, 1e-4);
        in.B2 = in.dc.B;
    } else {
        in.epsilon = wssp::lp_max_slack(ins).epsilon;
        if (V > 0.0) in.x0_opt = wssp::lp_optimal_penalty(ins).x0_opt;
    }
    auto verdicts = wssp::check_theorem_bounds(ins, res, in);

    fs::create_directories(o.out);
    json out;
    out["schema_version"] = kSchemaVersion;
    out["config_hash"] = fnv1a(config_string(o, V));
    out["seed"] = o.seed;
    json list = json::array();
    bool all_pass = true;
    for (const auto& v : verdicts) {
        json j;
        j["name"] = v.name;
        j["measured"] = v.measured;
        j["bound"] = v.bound;
        j["slack"] = v.slack;
        j["pass"] = v.pass;
        j["vacuous"] = v.vacuous;
        list.push_back(j);
        if (!v.vacuous && !v.pass) all_pass = false;
        std::cout << (v.pass ? "pass" : "FAIL") << (v.vacuous ? " (vacuous)" : "") << "  "
                  << v.name << "  measured=" << v.measured << " bound=" << v.bound << "\n";
    }
    out["verdicts"] = list;
    out["all_pass"] = all_pass;
    std::ofstream f(fs::path(o.out) / "verdicts.json");
    if (!f) throw wssp::Error(wssp::ErrorCategory::io, "cannot open verdicts.json");
    f << out.dump(2) << "\n";
    return all_pass ? 0 : 1;
}

int mode_sweep(const Options& o, const wssp::Instance& ins, const wssp::GeneralizedSpec* gen) {
    std::vector<double> vs = parse_v_list(o.v_list);
    if (vs.size() < 2)
        throw wssp::Error(wssp::ErrorCategory::config, "--mode sweep needs at least two --v values");
    std::optional<double> x0_opt;
    double B = 0.0;
    if (!gen) {
        x0_opt = wssp::lp_optimal_penalty(ins).x0_opt;
        B = wssp::compute_drift_constants(ins, make_sim_config(o, 0, o.seed, gen).renewal).B;
    }
    struct Cell {
        wssp::SimResult res;
        std::exception_ptr err;
    };
    std::vector<Cell> cells(vs.size() * o.reps);
    wssp::SeedSplitter split(o.seed);
    std::vector<std::thread> pool;
    for (std::size_t vi = 0; vi < vs.size(); ++vi)
        for (int r = 0; r < o.reps; ++r)
            pool.emplace_back([&, vi, r] {
                Cell& c = cells[vi * o.reps + r];
                try {
                    std::uint64_t seed = split.child_seed("rep", static_cast<int>(vi) * 1000 + r);
                    wssp::Simulator sim(ins, make_sim_config(o, vs[vi], seed, gen));
                    c.res = sim.run();
                } catch (...) {
                    c.err = std::current_exception();
                }
            });
    for (auto& t : pool) t.join();
    for (auto& c : cells)
        if (c.err) std::rethrow_exception(c.err);

    fs::create_directories(o.out);
    std::ofstream f(fs::path(o.out) / "sweep.csv");
    if (!f) throw wssp::Error(wssp::ErrorCategory::io, "cannot open sweep.csv");
    f << "# schema-version " << kSchemaVersion << "\n";
    f << "# config-hash " << fnv1a(config_string(o, vs[0])) << "\n";
    f << "# seed " << o.seed << "\n";
    f << "V,rep,x0_avg,backlog_frame_avg,penalty_bound\n";
    for (std::size_t vi = 0; vi < vs.size(); ++vi) {
        double mean_x0 = 0, mean_bl = 0;
        for (int r = 0; r < o.reps; ++r) {
            const auto& res = cells[vi * o.reps + r].res;
            std::string bound = "n/a";
            if (vs[vi] > 0 && x0_opt) {
                std::ostringstream b;
                b << (*x0_opt + B * ins.phi / vs[vi]);
                bound = b.str();
            }
            f << vs[vi] << ',' << r << ',' << res.penalty_avgs[0] << ','
              << res.frame_start_backlog_avg << ',' << bound << "\n";
            mean_x0 += res.penalty_avgs[0] / o.reps;
            mean_bl += res.frame_start_backlog_avg / o.reps;
        }
        f << vs[vi] << ",mean," << mean_x0 << ',' << mean_bl << ",n/a\n";
        std::cout << "V=" << vs[vi] << " mean_x0=" << mean_x0 << " mean_backlog=" << mean_bl
                  << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"Frame-based drift-plus-penalty scheduler for Markov-modulated queues"};
    app.option_defaults()->always_capture_default();
    app.add_option("--mode", o.mode)->check(CLI::IsMember({"run", "verify", "sweep"}));
    app.add_option("--instance", o.instance)->required();
    app.add_option("--config", o.instance);  // alias
    app.add_option("--out", o.out);
    app.add_option("--seed", o.seed);
    app.add_option("--slots", o.slots)->check(CLI::PositiveNumber);
    app.add_option("--reps", o.reps)->check(CLI::PositiveNumber);
    app.add_option("--v", o.v_list);
    app.add_option("--solver", o.solver)->check(CLI::IsMember({"exact", "rm-classic", "rm-fixed"}));
    app.add_option("--gamma", o.gamma);
    app.add_option("--batch", o.batch);
    app.add_option("--iters", o.iters);
    app.add_option("--history", o.history);
    app.add_option("--renewal", o.renewal)->check(CLI::Range(1, 3));
    app.add_option("--renewal-b", o.renewal_b);
    app.add_flag("--gen-quad", o.gen_quad,
                 "generalized mode: minimize the square of the constrained average");
    app.add_option("--gen-c", o.gen_c);
    app.add_option("--alpha", o.alpha);
    for (auto* opt : app.get_options()) opt->envname("WSSP_" + opt->get_single_name());

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        wssp::Instance ins = wssp::load_instance_file(o.instance);
        wssp::GeneralizedSpec gen;
        const wssp::GeneralizedSpec* gp = nullptr;
        if (o.gen_quad) {
            gen.f = [](const std::vector<double>& g) { return g[0] * g[0]; };
            gen.h = {[](const std::vector<double>& g) { return g[0]; }};
            gen.c = {o.gen_c};
            auto [lo, hi] = ins.penalty_range(1);
            gen.h_min = {lo};
            gen.h_max = {hi};
            gen.alpha = o.alpha;
            gen.separable = true;
            gp = &gen;
        }
        if (o.mode == "run") return mode_run(o, ins, gp);
        if (o.mode == "verify") return mode_verify(o, ins, gp);
        return mode_sweep(o, ins, gp);
    } catch (const wssp::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
