#include "fracid/eigen_core.hpp"
#include "fracid/experiments.hpp"
#include "fracid/extension_fem.hpp"
#include "fracid/identify.hpp"
#include "fracid/state_map.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using fracid::RunConfig;
using nlohmann::json;

namespace {

struct CommonOptions {
    std::string config_path;
    std::string experiment;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string ladder;
    std::optional<double> sigma;
    std::optional<double> tol;
    std::string phi;
    std::optional<int> dim;
    bool traces = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config_path, "JSON run configuration (see docs/config.md)")->check(CLI::ExistingFile);
    cmd->add_option("--experiment", o.experiment, "preset: example1, example2, example3, example4, custom");
    cmd->add_option("--seed", o.seed, "64-bit noise seed");
    cmd->add_option("--out-dir", o.out_dir, "output directory");
    cmd->add_option("--ladder", o.ladder, "desk, full, or a list like 10x25,15x40");
    cmd->add_option("--sigma", o.sigma, "explicit difference step sigma");
    cmd->add_option("--tol", o.tol, "bisection tolerance");
    cmd->add_option("--phi", o.phi, "regularizer: example1, example2, rational_ab, exp_ab");
    cmd->add_option("--dim", o.dim, "spatial dimension (1 or 2)")->check(CLI::Range(1, 2));
    cmd->add_flag("--traces", o.traces, "write per-iteration JSON-lines traces");
}

RunConfig load_config(const CommonOptions& o, const std::string& fallback) {
    RunConfig c;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& ex) {
            throw fracid::ConfigError("cannot parse " + o.config_path + ": " + ex.what());
        }
        if (!o.experiment.empty()) {
            j["experiment"] = o.experiment;
        }
        c = fracid::config_from_json(j);
    } else {
        c = fracid::preset(o.experiment.empty() ? fallback : o.experiment);
    }
    if (o.seed) {
        c.seed = *o.seed;
    }
    if (!o.out_dir.empty()) {
        c.out_dir = o.out_dir;
    }
    if (!o.ladder.empty()) {
        c.ladder = fracid::parse_ladder(o.ladder);
    }
    if (o.sigma) {
        c.sigma = *o.sigma;
    }
    if (o.tol) {
        c.tol = *o.tol;
    }
    if (!o.phi.empty()) {
        c.regularizer = o.phi;
    }
    if (o.dim) {
        c.dim = *o.dim;
        c.data.k.resize(static_cast<std::size_t>(c.dim), c.data.k.empty() ? 1 : c.data.k.front());
    }
    c.write_traces = c.write_traces || o.traces;
    fracid::validate(c);
    return c;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw fracid::Error("cannot open " + path.string());
    }
    out << std::setprecision(17);
    return out;
}

json result_json(const fracid::IdentifyResult& r) {
    json brackets = json::array();
    for (const auto& b : r.bracket_history) {
        brackets.push_back({b.s_l, b.s_r, b.j_l, b.j_r});
    }
    return {{"s_star", r.s_star},
            {"j_at_star", r.j_at_star},
            {"N", r.iterations},
            {"evaluations", r.evaluations},
            {"isolation_steps", r.isolation_steps},
            {"converged", r.converged},
            {"termination", fracid::to_string(r.termination)},
            {"sigma", r.sigma},
            {"tol", r.tol},
            {"max_iter", r.max_iter},
            {"initial_bracket", {r.s_l0, r.s_r0}},
            {"bounds", {r.bounds.lower, r.bounds.upper}},
            {"brackets", brackets}};
}

void print_result(const fracid::IdentifyResult& r) {
    std::cout << std::setprecision(6) << std::scientific << "s* = " << r.s_star << "  j(s*) = " << r.j_at_star
              << "  N = " << r.iterations << "  sigma = " << r.sigma << "  (" << fracid::to_string(r.termination)
              << ")\n";
}

void print_record(const fracid::RunRecord& rec) {
    const bool noisy = !rec.config.noise_levels.empty();
    std::cout << std::setw(8) << "dofs" << (noisy ? "        e" : "") << std::setw(14) << "s" << std::setw(14) << "j"
              << std::setw(5) << "N" << '\n';
    for (const auto& row : rec.rows) {
        std::cout << std::setw(8) << row.dofs;
        if (noisy) {
            std::cout << std::setw(9) << std::defaultfloat << row.noise.value_or(0.0);
        }
        if (row.ok) {
            std::cout << std::scientific << std::setprecision(5) << std::setw(14) << row.s_star << std::setw(14)
                      << row.j_at_star << std::setw(5) << row.N << '\n';
        } else {
            std::cout << "  failed: " << row.error << '\n';
        }
    }
    if (rec.rate) {
        std::cout << std::defaultfloat << std::setprecision(4) << "observed rate: " << rec.rate->slope
                  << (rec.rate->stagnation ? " (stagnation)" : "") << '\n';
    }
}

fs::path out_path(const RunConfig& c, const std::string& name) {
    return fs::path(c.out_dir) / name;
}

int cmd_state(const CommonOptions& o, double order, const std::string& method, int modes) {
    RunConfig c = load_config(o, "example1");
    const fracid::ProblemSpec problem = fracid::make_problem(c);
    const auto& f = std::get<fracid::PointFunction>(problem.f);
    const fracid::LadderLevel level = c.ladder.front();
    const fracid::OmegaMesh omega(c.dim, level.m);
    Eigen::VectorXd nodal(omega.num_nodes());
    const auto start = std::chrono::steady_clock::now();
    if (method == "spectral") {
        const int count = modes > 0 ? modes : fracid::default_mode_count(c.dim);
        const auto coeffs = fracid::project(f, fracid::enumerate_modes(fracid::BoxDomain(c.dim), count));
        const auto u = fracid::solve_state(coeffs, order);
        for (Eigen::Index i = 0; i < nodal.size(); ++i) {
            nodal(i) = fracid::synthesize(u.u, omega.node_coords(i));
        }
        std::cout << "spectral tail bound: " << u.tail_bound << '\n';
    } else if (method == "fem") {
        fracid::FemConfig fem;
        fem.dim = c.dim;
        fem.omega_cells = level.m;
        fem.y_intervals = level.M;
        fem.Y = c.Y;
        fem.grading = c.grading;
        fem.a_lower = c.a_lower;
        fem.solver.kind = c.solver;
        const fracid::FemStateProvider provider(fem, f);
        const fracid::CylinderMesh mesh = provider.mesh_for(order);
        const fracid::FESpace space(mesh);
        const Eigen::VectorXd full = fracid::solve_extension(mesh, space, f, order, fem.solver);
        nodal = fracid::trace(full, space);
        std::ofstream snap = open_out(out_path(c, "state_snapshot.txt"));
        fracid::write_snapshot(snap, mesh, order, full);
    } else {
        throw fracid::ConfigError("--method must be spectral or fem");
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ofstream csv = open_out(out_path(c, "state.csv"));
    csv << (c.dim == 1 ? "x,u\n" : "x,y,u\n");
    for (Eigen::Index i = 0; i < nodal.size(); ++i) {
        const fracid::Point x = omega.node_coords(i);
        for (int d = 0; d < c.dim; ++d) {
            csv << x(d) << ',';
        }
        csv << nodal(i) << '\n';
    }
    std::cout << "solved s = " << order << " (" << method << ") on " << omega.num_nodes() << " nodes in " << seconds
              << " s; wrote " << out_path(c, "state.csv").string() << '\n';
    return 0;
}

int cmd_identify(const CommonOptions& o, int modes) {
    RunConfig c = load_config(o, "example1");
    fracid::ProblemSpec problem = fracid::make_problem(c);
    problem.modes = modes;
    if (!problem.sigma) {
        problem.sigma = 1e-3;
    }
    std::ofstream trace;
    if (c.write_traces) {
        trace = open_out(out_path(c, "identify_trace.jsonl"));
        problem.trace = fracid::json_lines_sink(trace);
    }
    const auto r = fracid::identify_semidiscrete(problem);
    print_result(r);
    json out = result_json(r);
    out["config"] = fracid::to_json(c);
    out["code_version"] = fracid::code_version();
    open_out(out_path(c, "identify.json")) << out.dump(2) << '\n';
    return 0;
}

int cmd_identify_fem(const CommonOptions& o) {
    RunConfig c = load_config(o, "example1");
    if (c.ladder.size() != 1) {
        if (!o.ladder.empty()) {
            throw fracid::ConfigError("identify-fem takes a single level; use `convergence` for ladders");
        }
        c.ladder.resize(1);
    }
    fracid::ProblemSpec problem = fracid::make_problem(c);
    std::ofstream trace;
    if (c.write_traces) {
        trace = open_out(out_path(c, "identify_fem_trace.jsonl"));
        problem.trace = fracid::json_lines_sink(trace);
    }
    fracid::FemConfig fem;
    fem.dim = c.dim;
    fem.omega_cells = c.ladder.front().m;
    fem.y_intervals = c.ladder.front().M;
    fem.Y = c.Y;
    fem.grading = c.grading;
    fem.a_lower = c.a_lower;
    fem.solver.kind = c.solver;
    if (!problem.sigma) {
        problem.sigma = fracid::coupled_sigma(static_cast<double>(c.ladder.front().dofs(c.dim)), c.sigma_eps);
    }
    const auto r = fracid::identify_fullydiscrete(problem, fem);
    std::cout << "dofs = " << c.ladder.front().dofs(c.dim) << "  ";
    print_result(r);
    json out = result_json(r);
    out["dofs"] = c.ladder.front().dofs(c.dim);
    out["config"] = fracid::to_json(c);
    out["code_version"] = fracid::code_version();
    open_out(out_path(c, "identify_fem.json")) << out.dump(2) << '\n';
    return 0;
}

int cmd_ladder(const CommonOptions& o, const std::string& fallback, const std::string& noise_mode) {
    RunConfig c = load_config(o, fallback);
    if (!noise_mode.empty()) {
        c.noise_mode = fracid::parse_noise_mode(noise_mode);
    }
    if (fallback == "example4" && c.noise_levels.empty()) {
        c.noise_levels = fracid::preset("example4").noise_levels;
    }
    const fracid::RunRecord rec = fracid::run_experiment(c);
    print_record(rec);
    const std::string stem = c.experiment;
    fracid::write_table_csv(rec, out_path(c, stem + "_table.csv"));
    open_out(out_path(c, stem + "_record.json")) << fracid::to_json(rec).dump(2) << '\n';
    if (rec.reference && c.noise_levels.empty()) {
        fracid::write_rate_csv(rec, *rec.reference, out_path(c, stem + "_rate.csv"));
    }
    std::cout << "wrote " << out_path(c, stem + "_table.csv").string() << '\n';
    bool all_ok = true;
    for (const auto& row : rec.rows) {
        all_ok = all_ok && row.ok;
    }
    return all_ok ? 0 : 1;
}

int cmd_fem_verify(const CommonOptions& o, const std::vector<double>& orders) {
    fracid::TraceStudyConfig study;
    if (o.dim) {
        study.dim = *o.dim;
    }
    if (!o.ladder.empty()) {
        study.ladder = fracid::parse_ladder(o.ladder);
    }
    if (!orders.empty()) {
        study.orders = orders;
    }
    if (study.dim == 2) {
        study.modes = 1024;
    }
    const fs::path dir = o.out_dir.empty() ? fs::path("results") : fs::path(o.out_dir);
    const auto res = fracid::trace_error_study(study);
    std::ofstream csv = open_out(dir / "fem_verify.csv");
    csv << "s,dofs,l2_error\n";
    for (const auto& row : res.rows) {
        csv << row.s << ',' << row.dofs << ',' << row.l2_error << '\n';
    }
    for (std::size_t i = 0; i < res.orders.size(); ++i) {
        const double s = res.orders[i];
        const double target = -(1.0 + s) / (study.dim + 1.0);
        std::cout << std::defaultfloat << std::setprecision(4) << "s = " << s << "  slope " << res.fits[i].slope
                  << "  (theory " << target << ")\n";
    }
    std::cout << "wrote " << (dir / "fem_verify.csv").string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Identification of the order of a fractional Laplacian"};
    app.require_subcommand(1);
    app.set_version_flag("--version", fracid::code_version());

    CommonOptions state_opts, id_opts, idf_opts, conv_opts, noise_opts, verify_opts;
    double order = 0.5;
    std::string method = "fem";
    int modes = 0;
    std::string noise_mode;
    std::vector<double> orders;

    auto* state = app.add_subcommand("state", "single fractional solve on the first ladder level");
    add_common(state, state_opts);
    state->add_option("--order", order, "order s in (0,1)")->check(CLI::Range(0.0, 1.0));
    state->add_option("--method", method, "spectral or fem");
    state->add_option("--modes", modes, "spectral truncation");

    auto* identify = app.add_subcommand("identify", "semi-discrete identification (exact spectral state)");
    add_common(identify, id_opts);
    identify->add_option("--modes", modes, "spectral truncation");

    auto* identify_fem = app.add_subcommand("identify-fem", "fully discrete identification on one mesh level");
    add_common(identify_fem, idf_opts);

    auto* convergence = app.add_subcommand("convergence", "ladder run with rate estimate");
    add_common(convergence, conv_opts);

    auto* noise = app.add_subcommand("noise", "noisy-data robustness run at a fixed mesh");
    add_common(noise, noise_opts);
    noise->add_option("--noise-mode", noise_mode, "scalar or field");

    auto* verify = app.add_subcommand("fem-verify", "trace error of the extension solver against the spectral state");
    add_common(verify, verify_opts);
    verify->add_option("--orders", orders, "orders to study");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*state) {
            return cmd_state(state_opts, order, method, modes);
        }
        if (*identify) {
            return cmd_identify(id_opts, modes);
        }
        if (*identify_fem) {
            return cmd_identify_fem(idf_opts);
        }
        if (*convergence) {
            return cmd_ladder(conv_opts, "example1", "");
        }
        if (*noise) {
            return cmd_ladder(noise_opts, "example4", noise_mode);
        }
        if (*verify) {
            return cmd_fem_verify(verify_opts, orders);
        }
    } catch (const fracid::ConfigError& ex) {
        std::cerr << "configuration error: " << ex.what() << '\n';
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}
