#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "qucert/report.hpp"
#include "qucert/simbench.hpp"

namespace {

using namespace qucert;

std::string read_file(const std::string& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw SchemaError(what + " file not found: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string stem_of(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

void write_or_print(const nlohmann::ordered_json& doc, const std::string& out_path) {
    if (out_path.empty())
        std::cout << doc.dump(2) << "\n";
    else
        save_report(doc, out_path);
}

DerControlParams params_from_file(DerKind kind, const std::string& path) {
    if (path.empty()) return default_control_params(kind);
    nlohmann::json doc = nlohmann::json::parse(read_file(path, "params"));
    DerControlParams p = default_control_params(kind);
    if (doc.contains("t_u")) p.t_u = doc["t_u"].get<double>();
    if (doc.contains("va_order")) p.va_order = doc["va_order"].get<int>();
    if (doc.contains("t_dq")) p.t_dq = doc["t_dq"].get<double>();
    if (doc.contains("k_q")) p.k_q = doc["k_q"].get<double>();
    if (doc.contains("t_q")) p.t_q = doc["t_q"].get<double>();
    if (doc.contains("t_l")) p.t_l = doc["t_l"].get<double>();
    if (doc.contains("t_g")) p.t_g = doc["t_g"].get<double>();
    return p;
}

struct AssessArgs {
    std::string grid_path, out_path, representation = "all";
    SearchOptions search;
    AssessOptions opts;
    bool with_sim = false;
    SimScenario sim;
};

int cmd_assess(const AssessArgs& args) {
    const GridModel grid = load_grid_file(args.grid_path);
    const PowerFlowSolution pf = solve_power_flow(grid);
    const SensitivityMatrix kq = sensitivity(grid, pf);

    double penetration = std::numeric_limits<double>::quiet_NaN();
    try {
        penetration = penetration_factor(grid);
    } catch (const ComputationError&) {
        // branch lengths unknown; the report carries null
    }

    std::optional<double> sim_threshold;
    std::optional<bool> sim_limit_found;
    if (args.with_sim) {
        SimSearchOptions ss;
        ss.m_start = args.search.m_start;
        ss.m_cap = args.search.m_cap;
        const SimThresholdResult st = find_sim_threshold(grid, args.sim, ss);
        sim_threshold = st.threshold;
        sim_limit_found = st.limit_found;
    }

    std::vector<std::string> reprs;
    if (args.representation == "all")
        reprs = {"orig", "pt2-der", "pt2-tar"};
    else
        reprs = {args.representation};

    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    std::cout << "grid " << stem_of(args.grid_path) << " (" << grid.ders.size()
              << " DER, rho = ";
    if (std::isfinite(penetration))
        std::cout << penetration << " kW/km)\n";
    else
        std::cout << "unknown)\n";
    std::cout << "  representation   m_max [%/p.u.]\n";

    for (const auto& name : reprs) {
        AssessmentReport rep;
        rep.grid_id = stem_of(args.grid_path);
        rep.representation = name;
        rep.search = max_slope_search(grid, kq, representation_from_string(name), args.search,
                                      args.opts);
        rep.sim_threshold = sim_threshold;
        rep.sim_limit_found = sim_limit_found;
        rep.penetration_kw_per_km = penetration;
        rep.timestamp = current_timestamp_utc();
        out.push_back(report_to_json(rep));

        std::cout << "  " << name << std::string(name.size() < 16 ? 16 - name.size() : 1, ' ');
        if (rep.search.limit_found)
            std::cout << rep.search.m_max << "\n";
        else
            std::cout << "no limit below cap " << args.search.m_cap << "\n";
    }
    if (sim_threshold) {
        std::cout << "  simulation      ";
        if (*sim_limit_found)
            std::cout << *sim_threshold << "\n";
        else
            std::cout << "no limit below cap " << args.search.m_cap << "\n";
    }

    if (!args.out_path.empty())
        save_report(out.size() == 1 ? out.front() : out, args.out_path);
    return 0;
}

struct FitArgs {
    std::string mode = "tar", model = "wf-frc", params_path, out_path;
    TarStepSpec tar;
    FitConfig cfg;
};

int cmd_fit_pt2(const FitArgs& args) {
    Pt2Fit fit;
    if (args.mode == "tar") {
        fit = fit_tar(args.tar, args.cfg);
    } else if (args.mode == "der") {
        const DerKind kind = der_kind_from_string(args.model);
        if (kind == DerKind::Pt2) throw SchemaError("fit-pt2: --model pt2 is already a PT2");
        const DelayedTransfer model =
            build_control_loop(kind, params_from_file(kind, args.params_path));
        fit = fit_der(model, args.cfg);
    } else {
        throw SchemaError("fit-pt2: mode must be \"tar\" or \"der\"");
    }
    nlohmann::ordered_json doc{{"d", fit.params.damping},
                               {"t", fit.params.time_constant},
                               {"kappa", fit.params.gain},
                               {"residual", fit.residual},
                               {"mode", args.mode}};
    write_or_print(doc, args.out_path);
    return 0;
}

struct SimulateArgs {
    std::string grid_path, out_path, class_path;
    SimScenario sc;
};

int cmd_simulate(const SimulateArgs& args) {
    const GridModel grid = load_grid_file(args.grid_path);
    const SimTrace trace = simulate(grid, args.sc);
    if (!args.out_path.empty()) write_trace_csv(trace, args.out_path);

    const double ramp_end = args.sc.ramp.start_s + args.sc.ramp.duration_s;
    nlohmann::ordered_json doc;
    if (trace.truncated) {
        doc["verdict"] = "diverged";
        doc["note"] = "power flow diverged mid-run; trace truncated";
    } else {
        const StabilityClassification cls = classify(trace, ramp_end);
        doc["verdict"] = to_string(cls.verdict);
        doc["decay_ratio"] = cls.decay_ratio;
        doc["window_s"] = {cls.window.first, cls.window.second};
    }
    doc["slope_percent_per_pu"] = args.sc.slope;
    write_or_print(doc, args.class_path);
    return trace.truncated ? 1 : 0;
}

struct ResponsesArgs {
    std::string model = "wf-frc", params_path, prefix = "responses";
    FitConfig cfg;
    double horizon = 20.0, dt = 1e-3;
};

int cmd_responses(const ResponsesArgs& args) {
    const DerKind kind = der_kind_from_string(args.model);
    const DelayedTransfer orig = build_control_loop(kind, params_from_file(kind, args.params_path));
    const Pt2Fit der_fit = fit_der(orig, args.cfg);
    const Pt2Fit tar_fit = fit_tar(TarStepSpec{}, args.cfg);
    const RationalTransfer pt2_der = build_pt2(der_fit.params);
    const RationalTransfer pt2_tar = build_pt2(tar_fit.params);

    const StepResponse s_orig = step_response(orig.rational(3), args.horizon, args.dt);
    const StepResponse s_der = step_response(pt2_der, args.horizon, args.dt);
    const StepResponse s_tar = step_response(pt2_tar, args.horizon, args.dt);

    std::ofstream step_out(args.prefix + "_step.csv");
    if (!step_out) throw ComputationError("cannot write " + args.prefix + "_step.csv");
    step_out << "time_s,orig,pt2_der,pt2_tar\n";
    step_out.precision(10);
    for (std::size_t k = 0; k < s_orig.time.size(); ++k)
        step_out << s_orig.time[k] << "," << s_orig.value[k] << "," << s_der.value[k] << ","
                 << s_tar.value[k] << "\n";

    std::ofstream freq_out(args.prefix + "_freq.csv");
    if (!freq_out) throw ComputationError("cannot write " + args.prefix + "_freq.csv");
    freq_out << "omega_rad_s,mag_orig,phase_orig_rad,mag_pt2_der,phase_pt2_der_rad,"
                "mag_pt2_tar,phase_pt2_tar_rad\n";
    freq_out.precision(10);
    for (double w : log_grid(args.cfg.band_low, args.cfg.band_high, args.cfg.grid_points)) {
        const Complex go = orig.response(w);
        const Complex gd = pt2_der.evaluate(Complex(0.0, w));
        const Complex gt = pt2_tar.evaluate(Complex(0.0, w));
        freq_out << w << "," << std::abs(go) << "," << std::arg(go) << "," << std::abs(gd) << ","
                 << std::arg(gd) << "," << std::abs(gt) << "," << std::arg(gt) << "\n";
    }
    std::cout << "pt2-der: D = " << der_fit.params.damping << ", T = " << der_fit.params.time_constant
              << "; pt2-tar: D = " << tar_fit.params.damping << ", T = "
              << tar_fit.params.time_constant << "\n";
    return 0;
}

struct ImportArgs {
    std::string nodes, lines, trafos, loads, res, out_path = "grid.json";
};

int cmd_import(const ImportArgs& args) {
    SimbenchTables tables;
    tables.nodes = read_file(args.nodes, "node table");
    if (!args.lines.empty()) tables.lines = read_file(args.lines, "line table");
    if (!args.trafos.empty()) tables.trafos = read_file(args.trafos, "trafo table");
    if (!args.loads.empty()) tables.loads = read_file(args.loads, "load table");
    if (!args.res.empty()) tables.res = read_file(args.res, "RES table");
    const GridModel grid = import_simbench(tables);
    save_grid_file(grid, args.out_path);
    std::cout << "imported " << grid.nodes.size() << " nodes, " << grid.branches.size()
              << " branches, " << grid.transformers.size() << " transformers, "
              << grid.loads.size() << " loads, " << grid.ders.size() << " DER -> "
              << args.out_path << "\n";
    return 0;
}

struct PfArgs {
    std::string grid_path, out_path;
    PowerFlowOptions opts;
};

int cmd_powerflow(const PfArgs& args) {
    const GridModel grid = load_grid_file(args.grid_path);
    const PowerFlowSolution sol = solve_power_flow(grid, args.opts);
    std::cout << "converged in " << sol.iterations << " iterations, max mismatch "
              << sol.max_mismatch << " p.u.\n";
    std::cout << "node        u [p.u.]   angle [deg]   P [MW]      Q [Mvar]\n";
    char line[160];
    for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
        std::snprintf(line, sizeof(line), "%-10s %9.5f %12.4f %10.3f %10.3f",
                      grid.nodes[i].id.c_str(), sol.v_mag(i), sol.v_angle(i) * 180.0 / 3.14159265358979,
                      sol.p_injection(i) * grid.base_mva, sol.q_injection(i) * grid.base_mva);
        std::cout << line << "\n";
    }
    if (!args.out_path.empty()) {
        nlohmann::ordered_json doc;
        doc["iterations"] = sol.iterations;
        doc["max_mismatch_pu"] = sol.max_mismatch;
        auto nodes = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < grid.nodes.size(); ++i)
            nodes.push_back({{"id", grid.nodes[i].id},
                             {"u_pu", sol.v_mag(i)},
                             {"angle_rad", sol.v_angle(i)},
                             {"p_mw", sol.p_injection(i) * grid.base_mva},
                             {"q_mvar", sol.q_injection(i) * grid.base_mva}});
        doc["nodes"] = std::move(nodes);
        save_report(doc, args.out_path);
    }
    return 0;
}

int cmd_sensitivity(const PfArgs& args) {
    const GridModel grid = load_grid_file(args.grid_path);
    const PowerFlowSolution sol = solve_power_flow(grid, args.opts);
    const SensitivityMatrix kq = sensitivity(grid, sol);
    std::cout << "K_Q (p.u./p.u.), order:";
    for (const auto& id : kq.der_order) std::cout << " " << id;
    std::cout << "\n" << kq.entries << "\n";
    if (!args.out_path.empty()) {
        nlohmann::ordered_json doc;
        doc["der_order"] = kq.der_order;
        auto rows = nlohmann::ordered_json::array();
        for (Eigen::Index i = 0; i < kq.entries.rows(); ++i) {
            auto row = nlohmann::ordered_json::array();
            for (Eigen::Index j = 0; j < kq.entries.cols(); ++j) row.push_back(kq.entries(i, j));
            rows.push_back(std::move(row));
        }
        doc["k_q"] = std::move(rows);
        save_report(doc, args.out_path);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Q(U) droop stability certification toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string grid_path, out_path;
    unsigned seed = 0;
    bool verbose = false;
    app.add_option("--grid", grid_path, "grid JSON file")->envname("QUCERT_GRID");
    app.add_option("--out", out_path, "output file");
    app.add_option("--seed", seed, "seed for randomized fixtures (reserved)");
    app.add_flag("--verbose", verbose, "verbose diagnostics");

    AssessArgs assess;
    auto* sc_assess = app.add_subcommand("assess", "certify the maximum stable Q(U) slope");
    sc_assess->add_option("--representation", assess.representation,
                          "orig | pt2-der | pt2-tar | all")
        ->check(CLI::IsMember({"orig", "pt2-der", "pt2-tar", "all"}));
    sc_assess->add_option("--m-start", assess.search.m_start, "starting slope, %/p.u.");
    sc_assess->add_option("--m-cap", assess.search.m_cap, "slope cap, %/p.u.");
    sc_assess->add_option("--tolerance", assess.search.tolerance, "bisection tolerance, %/p.u.");
    sc_assess->add_option("--pade-order", assess.opts.pade_order, "Pade order for dead times")
        ->check(CLI::Range(1, 5));
    sc_assess->add_option("--delta", assess.opts.delta, "imaginary-axis tolerance for the SPR test");
    sc_assess->add_flag("--with-sim", assess.with_sim, "also search the simulation threshold");

    FitArgs fit;
    auto* sc_fit = app.add_subcommand("fit-pt2", "least-squares PT2 approximation");
    sc_fit->add_option("--mode", fit.mode, "tar | der")->check(CLI::IsMember({"tar", "der"}));
    sc_fit->add_option("--zeta", fit.tar.overshoot, "TAR overshoot, fraction");
    sc_fit->add_option("--t90", fit.tar.rise_time_90, "TAR 90% rise time, s");
    sc_fit->add_option("--tstl", fit.tar.settling_time, "TAR settling time, s");
    sc_fit->add_option("--settle-band", fit.tar.settle_band, "settling band half-width");
    sc_fit->add_option("--model", fit.model, "detailed model kind for --mode der");
    sc_fit->add_option("--params", fit.params_path, "JSON file with control parameters");
    sc_fit->add_option("--band-low", fit.cfg.band_low, "fit band lower edge, rad/s");
    sc_fit->add_option("--band-high", fit.cfg.band_high, "fit band upper edge, rad/s");
    sc_fit->add_option("--points", fit.cfg.grid_points, "fit grid points");

    SimulateArgs sim;
    auto* sc_sim = app.add_subcommand("simulate", "nonlinear quasi-static time simulation");
    sc_sim->add_option("--slope", sim.sc.slope, "uniform Q(U) slope, %/p.u.")->required();
    sc_sim->add_option("--coupling", [&sim](const std::vector<std::string>& v) {
        if (v.front() == "linearized") sim.sc.coupling = Coupling::Linearized;
        else if (v.front() == "full") sim.sc.coupling = Coupling::FullPowerFlow;
        else return false;
        return true;
    }, "linearized | full");
    sc_sim->add_option("--dt", sim.sc.dt_s, "step size, s");
    sc_sim->add_option("--horizon", sim.sc.horizon_s, "simulation horizon, s");
    sc_sim->add_option("--ramp-start", sim.sc.ramp.start_s, "ramp start, s");
    sc_sim->add_option("--ramp-duration", sim.sc.ramp.duration_s, "ramp duration, s");
    sc_sim->add_option("--p-init", sim.sc.ramp.p_initial_share, "initial feed-in share");
    sc_sim->add_option("--p-final", sim.sc.ramp.p_final_share, "final feed-in share");
    sc_sim->add_option("--classification", sim.class_path, "classification JSON output");
    bool absolute_uref = false;
    sc_sim->add_flag("--absolute-uref", absolute_uref,
                     "use the configured u_ref instead of the initial voltage");

    ResponsesArgs resp;
    auto* sc_resp = app.add_subcommand("responses", "step and frequency response CSV data");
    sc_resp->add_option("--model", resp.model, "detailed model kind");
    sc_resp->add_option("--params", resp.params_path, "JSON file with control parameters");
    sc_resp->add_option("--prefix", resp.prefix, "output file prefix");
    sc_resp->add_option("--band-low", resp.cfg.band_low, "band lower edge, rad/s");
    sc_resp->add_option("--band-high", resp.cfg.band_high, "band upper edge, rad/s");
    sc_resp->add_option("--points", resp.cfg.grid_points, "frequency points");
    sc_resp->add_option("--horizon", resp.horizon, "step horizon, s");
    sc_resp->add_option("--dt", resp.dt, "step integration dt, s");

    ImportArgs imp;
    auto* sc_imp = app.add_subcommand("import-simbench", "build a grid JSON from SimBench CSVs");
    sc_imp->add_option("--nodes", imp.nodes, "node table CSV")->required();
    sc_imp->add_option("--lines", imp.lines, "line table CSV");
    sc_imp->add_option("--trafos", imp.trafos, "transformer table CSV");
    sc_imp->add_option("--loads", imp.loads, "load table CSV");
    sc_imp->add_option("--res", imp.res, "RES table CSV");

    PfArgs pf;
    auto* sc_pf = app.add_subcommand("powerflow", "Newton-Raphson AC power flow");
    sc_pf->add_option("--tolerance", pf.opts.tolerance, "mismatch tolerance, p.u.");
    sc_pf->add_option("--max-iter", pf.opts.max_iterations, "iteration cap");

    auto* sc_sens = app.add_subcommand("sensitivity", "voltage/reactive-power sensitivity K_Q");
    sc_sens->add_option("--tolerance", pf.opts.tolerance, "mismatch tolerance, p.u.");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sc_assess->parsed()) {
            assess.grid_path = grid_path;
            assess.out_path = out_path;
            if (assess.grid_path.empty()) throw SchemaError("assess: --grid is required");
            return cmd_assess(assess);
        }
        if (sc_fit->parsed()) {
            fit.out_path = out_path;
            return cmd_fit_pt2(fit);
        }
        if (sc_sim->parsed()) {
            sim.grid_path = grid_path;
            sim.out_path = out_path;
            sim.sc.uref_from_initial = !absolute_uref;
            if (sim.grid_path.empty()) throw SchemaError("simulate: --grid is required");
            return cmd_simulate(sim);
        }
        if (sc_resp->parsed()) {
            if (!out_path.empty()) resp.prefix = out_path;
            return cmd_responses(resp);
        }
        if (sc_imp->parsed()) {
            if (!out_path.empty()) imp.out_path = out_path;
            return cmd_import(imp);
        }
        if (sc_pf->parsed()) {
            pf.grid_path = grid_path;
            pf.out_path = out_path;
            if (pf.grid_path.empty()) throw SchemaError("powerflow: --grid is required");
            return cmd_powerflow(pf);
        }
        if (sc_sens->parsed()) {
            pf.grid_path = grid_path;
            pf.out_path = out_path;
            if (pf.grid_path.empty()) throw SchemaError("sensitivity: --grid is required");
            return cmd_sensitivity(pf);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
