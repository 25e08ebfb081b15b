#include "hypstab/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "hypstab/acceptance.hpp"
#include "hypstab/scenario.hpp"

namespace hypstab {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunContext {
    Scenario scenario;
    HyperbolicSystem sys;
    FeedbackLaw law;
    TimingData timing;
};

RunContext load_context(const std::string& path) {
    Scenario s = parse_scenario(path);
    HyperbolicSystem sys = s.make_system();
    ValidationReport rep = validate_system(sys, s.y_max);
    if (!rep.ok()) {
        std::vector<std::string> msgs;
        for (const auto& v : rep.violations) msgs.push_back(path + ": " + v);
        throw SchemaError(msgs);
    }
    FeedbackLaw law = s.make_law(sys);
    TimingData timing = compute_timing(sys);
    return RunContext{std::move(s), std::move(sys), std::move(law), std::move(timing)};
}

double pick_gamma(const RunContext& ctx) {
    if (!ctx.scenario.lyapunov.gamma_auto) return ctx.scenario.lyapunov.gamma;
    return calibrate_gamma(ctx.sys, ctx.law, ctx.scenario.seed);
}

json synth_json(const RunContext& ctx, const ClassBReport& cls, double gamma) {
    json j;
    j["k"] = ctx.sys.k();
    j["m"] = ctx.sys.m();
    j["class_membership"] = json::array();
    for (auto [i, ok] : cls.per_index)
        j["class_membership"].push_back({{"i", i}, {"invertible", ok}});
    j["member"] = cls.member;
    j["checked_indices"] = ctx.law.checked_invertibility_indices;
    j["maps"] = json::array();
    for (int c = ctx.law.ell(); c < ctx.law.n(); ++c) {
        json row = json::array();
        const auto& r = ctx.law.linear_row(c);
        for (int i = 0; i < r.size(); ++i) row.push_back(r[i]);
        json entry;
        entry["component"] = c + 1;
        entry["row"] = row;
        entry["sample_positions"] = ctx.law.sample_positions(c);
        j["maps"].push_back(entry);
    }
    j["tau"] = ctx.timing.tau;
    j["t_opt"] = ctx.timing.t_opt;
    j["gamma"] = gamma;
    return j;
}

int cmd_synth(const std::string& path, bool json_out) {
    RunContext ctx = load_context(path);
    ClassBReport cls = check_class_B(ctx.sys.coupling_matrix_at_zero(), ctx.sys.k(), ctx.sys.m());
    double gamma = pick_gamma(ctx);
    json j = synth_json(ctx, cls, gamma);

    if (json_out) {
        std::cout << j.dump(2) << "\n";
        return 0;
    }

    std::cout << "system: k=" << ctx.sys.k() << " m=" << ctx.sys.m() << "\n";
    std::cout << "class membership (trailing blocks):";
    if (cls.per_index.empty()) std::cout << " vacuous (empty index range)";
    for (auto [i, ok] : cls.per_index) std::cout << " i=" << i << (ok ? ":ok" : ":singular");
    std::cout << "\n";
    std::cout << "transit times tau:";
    for (double t : ctx.timing.tau) std::cout << " " << t;
    std::cout << "\noptimal time T_opt: " << ctx.timing.t_opt << "\n";
    for (int c = ctx.law.ell(); c < ctx.law.n(); ++c) {
        std::cout << "M for w_" << c + 1 << "(t,1): [";
        const auto& r = ctx.law.linear_row(c);
        for (int i = 0; i < r.size(); ++i) std::cout << (i ? " " : "") << r[i];
        std::cout << "]  samples at x =";
        for (double p : ctx.law.sample_positions(c)) std::cout << " " << p;
        std::cout << "\n";
    }
    std::cout << "gamma: " << gamma << "\n";

    fs::path dir = resolve_output_dir(ctx.scenario);
    fs::create_directories(dir);
    std::ofstream(dir / "synth.json") << j.dump(2) << "\n";
    return 0;
}

SimulationTrace run_cell(const RunContext& ctx, double q, double rate, double gamma, int nx,
                         SolverMode mode, std::vector<double> snapshot_times = {}) {
    return run_with_lyapunov(ctx.sys, ctx.law, ctx.scenario, q, rate, gamma, nx, mode,
                             std::move(snapshot_times));
}

void require_compatibility(const RunContext& ctx) {
    if (ctx.scenario.feedback != FeedbackMode::Nonlinear) return;
    StateGrid g = ctx.scenario.initial.sample(ctx.scenario.nx);
    CompatibilityReport rep = check_compatibility(g, ctx.sys);
    if (!rep.pass(ctx.scenario.tol_compat)) {
        std::vector<std::string> msgs;
        msgs.push_back("initial data violates the x = 0 compatibility conditions (order0=" +
                       std::to_string(rep.max_order0()) +
                       ", order1=" + std::to_string(rep.max_order1()) + ")");
        throw SchemaError(msgs);
    }
}

int cmd_simulate(const std::string& path, const std::vector<double>& snapshot_times) {
    RunContext ctx = load_context(path);
    require_compatibility(ctx);

    double q = ctx.scenario.lyapunov.q.front();
    double rate = ctx.scenario.lyapunov.rate.front();
    double gamma = pick_gamma(ctx);

    SimulationTrace trace = run_cell(ctx, q, rate, gamma, ctx.scenario.nx, ctx.scenario.solver,
                                     snapshot_times);

    fs::path dir = resolve_output_dir(ctx.scenario);
    fs::create_directories(dir);
    write_trace_csv((dir / "trace.csv").string(), trace);
    for (const auto& [t, snap] : trace.snapshots) {
        char name[64];
        std::snprintf(name, sizeof name, "snapshot_t%.6f.csv", t);
        write_snapshot_csv((dir / name).string(), snap);
    }

    const TraceRow& last = trace.rows.back();
    std::cout << "simulated to t=" << last.t << "  linf=" << last.linf
              << "  lyapunov=" << last.lyapunov << "\n";
    std::cout << "trace: " << (dir / "trace.csv").string() << "\n";
    return 0;
}

int cmd_verify(const std::string& suite_name, const std::string& out_dir) {
    Suite suite = Suite::All;
    if (suite_name == "linear") suite = Suite::Linear;
    else if (suite_name == "nonlinear") suite = Suite::Nonlinear;
    else if (suite_name != "all") {
        std::cerr << "unknown suite: " << suite_name << "\n";
        return 2;
    }

    auto results = run_acceptance(suite);
    json j = json::array();
    bool all_pass = true;
    for (const auto& r : results) {
        std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << r.id << ": " << r.name
                  << " (" << r.detail << ")\n";
        all_pass = all_pass && r.pass;
        j.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
    }

    fs::path dir = out_dir;
    if (const char* env = std::getenv("HYPSTAB_OUTPUT_DIR")) dir = env;
    fs::create_directories(dir);
    std::ofstream(dir / "acceptance_report.json") << j.dump(2) << "\n";
    std::ofstream txt(dir / "acceptance_report.txt");
    for (const auto& r : results)
        txt << (r.pass ? "PASS" : "FAIL") << " criterion " << r.id << ": " << r.name << " ("
            << r.detail << ")\n";

    std::cout << (all_pass ? "all criteria passed" : "criteria failed") << "\n";
    return all_pass ? 0 : 1;
}

int cmd_sweep(const std::string& path, std::vector<double> rates, std::vector<double> qs,
              std::vector<int> nxs) {
    RunContext ctx = load_context(path);
    require_compatibility(ctx);
    if (rates.empty()) rates = ctx.scenario.lyapunov.rate;
    if (qs.empty()) qs = ctx.scenario.lyapunov.q;
    if (nxs.empty()) nxs = {ctx.scenario.nx};
    double gamma = pick_gamma(ctx);
    double max_lambda = ctx.sys.max_speed(ctx.scenario.y_max);

    fs::path dir = resolve_output_dir(ctx.scenario);
    fs::create_directories(dir);
    std::ofstream summary(dir / "sweep_summary.csv");
    summary << "Lambda,q,nx,final_linf,decay_pass,decay_margin,envelope_C\n";

    bool all_pass = true;
    for (double rate : rates)
        for (double q : qs)
            for (int nx : nxs) {
                SimulationTrace trace =
                    run_cell(ctx, q, rate, gamma, nx, ctx.scenario.solver);

                char cell[96];
                std::snprintf(cell, sizeof cell, "sweep_L%g_q%g_nx%d", rate, q, nx);
                fs::create_directories(dir / cell);
                write_trace_csv((dir / cell / "trace.csv").string(), trace);

                std::vector<std::pair<double, double>> series, lq_series;
                for (const auto& r : trace.rows) {
                    series.emplace_back(r.t, r.lyapunov);
                    lq_series.emplace_back(r.t, r.lq);
                }
                double dx = 1.0 / (nx - 1);
                double tol = ctx.scenario.solver == SolverMode::ExactAdvection
                                 ? 1e-10
                                 : 5.0 * dx * q * rate * max_lambda;
                double slack = ctx.sys.is_quasilinear() ? 0.2 : 0.0;
                double t_min = ctx.scenario.feedback == FeedbackMode::Nonlinear
                                   ? 0.5 * ctx.scenario.delta
                                   : 0.0;
                DecayReport rep = verify_decay(series, q, rate, tol, 1e-12, slack, t_min);
                double env = envelope_constant(lq_series, rate, ctx.timing.t_opt);

                char row[160];
                std::snprintf(row, sizeof row, "%.17g,%.17g,%d,%.17g,%d,%.17g,%.17g\n", rate, q,
                              nx, trace.rows.back().linf, rep.pass ? 1 : 0, rep.worst_margin,
                              env);
                summary << row;
                std::cout << cell << ": decay " << (rep.pass ? "PASS" : "FAIL")
                          << "  final linf=" << trace.rows.back().linf << "\n";
                all_pass = all_pass && rep.pass;
            }
    std::cout << "summary: " << (dir / "sweep_summary.csv").string() << "\n";
    return all_pass ? 0 : 1;
}

std::vector<double> parse_list(const std::string& csv) {
    std::vector<double> out;
    std::istringstream is(csv);
    std::string tok;
    while (std::getline(is, tok, ','))
        if (!tok.empty()) out.push_back(std::stod(tok));
    return out;
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"finite-time boundary stabilization of 1-D hyperbolic systems"};
    app.require_subcommand(1);

    std::string scenario_path, snapshots_csv, suite = "all", verify_out = "out";
    std::string lambda_csv, q_csv, nx_csv;
    bool json_out = false;

    CLI::App* synth = app.add_subcommand("synth", "synthesize the feedback and print it");
    synth->add_option("scenario", scenario_path, "scenario file")->required();
    synth->add_flag("--json", json_out, "print machine-readable output");

    CLI::App* sim = app.add_subcommand("simulate", "run the closed loop and write the trace");
    sim->add_option("scenario", scenario_path, "scenario file")->required();
    sim->add_option("--snapshots", snapshots_csv, "comma-separated snapshot times");

    CLI::App* verify = app.add_subcommand("verify", "run the built-in acceptance suite");
    verify->add_option("--suite", suite, "linear | nonlinear | all");
    verify->add_option("--output", verify_out, "report directory");

    CLI::App* sweep = app.add_subcommand("sweep", "cartesian run over Lambda, q, nx");
    sweep->add_option("scenario", scenario_path, "scenario file")->required();
    sweep->add_option("--lambda", lambda_csv, "comma-separated Lambda values");
    sweep->add_option("--q", q_csv, "comma-separated q values");
    sweep->add_option("--nx", nx_csv, "comma-separated grid sizes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(scenario_path, json_out);
        if (sim->parsed()) return cmd_simulate(scenario_path, parse_list(snapshots_csv));
        if (verify->parsed()) return cmd_verify(suite, verify_out);
        if (sweep->parsed()) {
            std::vector<int> nxs;
            for (double v : parse_list(nx_csv)) nxs.push_back(static_cast<int>(v));
            return cmd_sweep(scenario_path, parse_list(lambda_csv), parse_list(q_csv), nxs);
        }
    } catch (const SchemaError& e) {
        std::cerr << "scenario error:\n" << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const SingularSubmatrix& e) {
        std::cerr << "synthesis failed: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace hypstab
