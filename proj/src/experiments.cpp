#include "fracid/experiments.hpp"

#include "fracid/eigen_core.hpp"
#include "fracid/regularizer.hpp"
#include "fracid/state_map.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#ifndef FRACID_VERSION
#define FRACID_VERSION "unknown"
#endif

namespace fracid {

namespace {

using json = nlohmann::json;

PointFunction mode_function(const EigenPair& pair, double scale) {
    return [pair, scale](const Point& x) { return scale * eigenfunction_eval(pair, x); };
}

ModeIndex mode_from(const std::vector<int>& k, int dim) {
    if (static_cast<int>(k.size()) != dim) {
        throw ConfigError("data.k must have one entry per dimension");
    }
    ModeIndex mode;
    mode.dim = dim;
    for (int d = 0; d < dim; ++d) {
        if (k[static_cast<std::size_t>(d)] < 1) {
            throw ConfigError("data.k entries must be >= 1");
        }
        mode.k[static_cast<std::size_t>(d)] = k[static_cast<std::size_t>(d)];
    }
    return mode;
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out << std::setprecision(17);
    return out;
}

template <typename T>
void read_if(const json& j, const char* key, T& target) {
    if (auto it = j.find(key); it != j.end()) {
        target = it->template get<T>();
    }
}

double error_against(const LevelRow& row, double reference) {
    return std::abs(row.s_star - reference);
}

} // namespace

long LadderLevel::dofs(int dim) const {
    long omega = 1;
    for (int d = 0; d < dim; ++d) {
        omega *= (m + 1);
    }
    return omega * (M + 1);
}

std::vector<LadderLevel> desk_ladder() {
    return {{10, 25}, {15, 40}, {20, 56}};
}

std::vector<LadderLevel> full_ladder() {
    return {{10, 25}, {15, 40}, {20, 56}, {25, 72}, {30, 88}};
}

std::vector<LadderLevel> parse_ladder(const std::string& text) {
    if (text == "desk") {
        return desk_ladder();
    }
    if (text == "full") {
        return full_ladder();
    }
    std::vector<LadderLevel> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto x = item.find('x');
        if (x == std::string::npos) {
            throw ConfigError("ladder entry '" + item + "' is not of the form MxN");
        }
        try {
            out.push_back({std::stoi(item.substr(0, x)), std::stoi(item.substr(x + 1))});
        } catch (const std::exception&) {
            throw ConfigError("ladder entry '" + item + "' is not of the form MxN");
        }
    }
    return out;
}

NoiseMode parse_noise_mode(const std::string& name) {
    if (name == "scalar") {
        return NoiseMode::scalar;
    }
    if (name == "field") {
        return NoiseMode::field;
    }
    throw ConfigError("unknown noise mode '" + name + "'");
}

std::string to_string(NoiseMode mode) {
    return mode == NoiseMode::scalar ? "scalar" : "field";
}

RunConfig preset(const std::string& experiment) {
    RunConfig c;
    c.experiment = experiment;
    if (experiment == "example1") {
        return c;
    }
    if (experiment == "example2") {
        c.regularizer = "example2";
        c.data.s_bar = (3.0 - std::sqrt(5.0)) / 2.0;
        return c;
    }
    if (experiment == "example3") {
        c.regularizer = "example2";
        c.data.kind = "expression";
        c.data.f_constant = 10.0;
        c.data.u_d = "cone";
        return c;
    }
    if (experiment == "example4") {
        c.ladder = {{30, 88}};
        c.noise_levels = {200.0, 20.0, 2.0, 0.5, 0.25, 0.125};
        return c;
    }
    if (experiment == "custom") {
        return c;
    }
    throw ConfigError("unknown experiment '" + experiment + "'");
}

void validate(RunConfig& c) {
    if (c.dim != 1 && c.dim != 2) {
        throw ConfigError("dim must be 1 or 2");
    }
    if (!(0.0 < c.a && c.a < c.b && c.b < 1.0)) {
        throw ConfigError("bounds must satisfy 0 < a < b < 1");
    }
    if (c.sigma && !(*c.sigma > 0.0 && *c.sigma < (c.b - c.a) / 2.0)) {
        throw ConfigError("sigma must lie in (0, (b - a)/2)");
    }
    if (c.ladder.empty()) {
        throw ConfigError("ladder is empty");
    }
    for (const auto& level : c.ladder) {
        if (level.m < 2 || level.M < 2) {
            throw ConfigError("ladder levels need m >= 2 and M >= 2");
        }
    }
    std::sort(c.ladder.begin(), c.ladder.end(),
              [dim = c.dim](const LadderLevel& x, const LadderLevel& y) { return x.dofs(dim) < y.dofs(dim); });
    for (std::size_t i = 1; i < c.ladder.size(); ++i) {
        if (c.ladder[i].dofs(c.dim) == c.ladder[i - 1].dofs(c.dim)) {
            throw ConfigError("ladder contains duplicate dof counts");
        }
    }
    if (!(c.tol > 0.0) || c.max_iter < 1) {
        throw ConfigError("tol must be positive and max_iter >= 1");
    }
    if (!(c.s_l0 < c.s_r0)) {
        throw ConfigError("initial bracket needs s_l0 < s_r0");
    }
    for (double e : c.noise_levels) {
        if (!(e >= 0.0)) {
            throw ConfigError("noise levels must be nonnegative");
        }
    }
    if (c.level_threads < 1 || c.solve_threads < 1) {
        throw ConfigError("thread counts must be >= 1");
    }
    if (c.data.kind != "mode" && c.data.kind != "expression") {
        throw ConfigError("data.kind must be 'mode' or 'expression'");
    }
    if (c.data.kind == "expression" && c.data.u_d != "cone" && c.data.u_d != "zero") {
        throw ConfigError("data.u_d must be 'cone' or 'zero'");
    }
    if (c.data.kind == "mode") {
        (void)mode_from(c.data.k, c.dim);
    }
    (void)make_regularizer(c.regularizer, c.a, c.b);
}

RunConfig config_from_json(const json& j) {
    static const std::set<std::string> known = {
        "experiment", "dim",        "a",          "b",           "regularizer",   "data",         "ladder",
        "sigma",      "sigma_eps",  "tol",        "max_iter",    "s_l0",          "s_r0",         "seed",
        "noise_levels", "noise_mode", "Y",        "grading",     "a_lower",       "solver",       "level_threads",
        "solve_threads", "out_dir", "write_traces"};
    if (!j.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    RunConfig c = preset(j.value("experiment", std::string("example1")));
    try {
        read_if(j, "dim", c.dim);
        read_if(j, "a", c.a);
        read_if(j, "b", c.b);
        read_if(j, "regularizer", c.regularizer);
        if (auto it = j.find("data"); it != j.end()) {
            read_if(*it, "kind", c.data.kind);
            read_if(*it, "k", c.data.k);
            read_if(*it, "s_bar", c.data.s_bar);
            read_if(*it, "f", c.data.f_constant);
            read_if(*it, "u_d", c.data.u_d);
        }
        if (auto it = j.find("ladder"); it != j.end()) {
            if (it->is_string()) {
                c.ladder = parse_ladder(it->get<std::string>());
            } else {
                c.ladder.clear();
                for (const auto& level : *it) {
                    c.ladder.push_back({level.at(0).get<int>(), level.at(1).get<int>()});
                }
            }
        }
        if (auto it = j.find("sigma"); it != j.end()) {
            if (it->is_string()) {
                if (it->get<std::string>() != "coupled") {
                    throw ConfigError("sigma must be a number or \"coupled\"");
                }
                c.sigma.reset();
            } else {
                c.sigma = it->get<double>();
            }
        }
        read_if(j, "sigma_eps", c.sigma_eps);
        read_if(j, "tol", c.tol);
        read_if(j, "max_iter", c.max_iter);
        read_if(j, "s_l0", c.s_l0);
        read_if(j, "s_r0", c.s_r0);
        read_if(j, "seed", c.seed);
        read_if(j, "noise_levels", c.noise_levels);
        if (auto it = j.find("noise_mode"); it != j.end()) {
            c.noise_mode = parse_noise_mode(it->get<std::string>());
        }
        if (auto it = j.find("Y"); it != j.end() && !it->is_null()) {
            c.Y = it->get<double>();
        }
        if (auto it = j.find("grading"); it != j.end()) {
            c.grading = parse_grading_policy(it->get<std::string>());
        }
        read_if(j, "a_lower", c.a_lower);
        if (auto it = j.find("solver"); it != j.end()) {
            c.solver = parse_solver_kind(it->get<std::string>());
        }
        read_if(j, "level_threads", c.level_threads);
        read_if(j, "solve_threads", c.solve_threads);
        read_if(j, "out_dir", c.out_dir);
        read_if(j, "write_traces", c.write_traces);
    } catch (const json::exception& ex) {
        throw ConfigError(std::string("malformed config: ") + ex.what());
    }
    return c;
}

json to_json(const RunConfig& c) {
    json ladder = json::array();
    for (const auto& level : c.ladder) {
        ladder.push_back({level.m, level.M});
    }
    json data = {{"kind", c.data.kind}};
    if (c.data.kind == "mode") {
        data["k"] = c.data.k;
        data["s_bar"] = c.data.s_bar;
    } else {
        data["f"] = c.data.f_constant;
        data["u_d"] = c.data.u_d;
    }
    json out = {{"experiment", c.experiment},
                {"dim", c.dim},
                {"a", c.a},
                {"b", c.b},
                {"regularizer", c.regularizer},
                {"data", data},
                {"ladder", ladder},
                {"sigma_eps", c.sigma_eps},
                {"tol", c.tol},
                {"max_iter", c.max_iter},
                {"s_l0", c.s_l0},
                {"s_r0", c.s_r0},
                {"seed", c.seed},
                {"noise_levels", c.noise_levels},
                {"noise_mode", to_string(c.noise_mode)},
                {"grading", to_string(c.grading)},
                {"a_lower", c.a_lower},
                {"solver", to_string(c.solver)},
                {"level_threads", c.level_threads},
                {"solve_threads", c.solve_threads},
                {"out_dir", c.out_dir},
                {"write_traces", c.write_traces}};
    out["sigma"] = c.sigma ? json(*c.sigma) : json("coupled");
    out["Y"] = c.Y ? json(*c.Y) : json(nullptr);
    return out;
}

std::optional<double> reference_order(const RunConfig& config) {
    if (config.data.kind != "mode") {
        return std::nullopt;
    }
    // The optimum sits at s_bar only when phi'(s_bar) = 0.
    const Regularizer reg = make_regularizer(config.regularizer, config.a, config.b);
    if (std::abs(reg.d1(config.data.s_bar)) < 1e-10) {
        return config.data.s_bar;
    }
    return std::nullopt;
}

ProblemSpec make_problem(const RunConfig& c) {
    ProblemSpec p;
    p.dim = c.dim;
    p.regularizer = make_regularizer(c.regularizer, c.a, c.b);
    p.bounds = {c.a, c.b};
    p.sigma = c.sigma;
    p.s_l0 = c.s_l0;
    p.s_r0 = c.s_r0;
    p.tol = c.tol;
    p.max_iter = c.max_iter;
    p.threads = c.solve_threads;
    if (c.data.kind == "mode") {
        const EigenPair pair = make_eigenpair(mode_from(c.data.k, c.dim));
        p.f = mode_function(pair, std::pow(pair.lambda, c.data.s_bar));
        p.u_d = mode_function(pair, 1.0);
    } else {
        const double value = c.data.f_constant;
        p.f = PointFunction([value](const Point&) { return value; });
        if (c.data.u_d == "cone") {
            p.u_d = PointFunction([](const Point& x) {
                const double r = (x.array() - 0.5).matrix().norm();
                return std::max(0.5 - r, 0.0);
            });
        } else {
            p.u_d = PointFunction([](const Point&) { return 0.0; });
        }
    }
    return p;
}

NoisyData inject_noise(const PointFunction& f, double e, std::uint64_t seed, NoiseMode mode) {
    if (!(e >= 0.0)) {
        throw ConfigError("noise amplitude must be nonnegative");
    }
    NoisyData out;
    out.f = f;
    if (e == 0.0) {
        return out;
    }
    if (mode == NoiseMode::field) {
        out.field = FieldNoise{e, seed};
        return out;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> draw(-e, e);
    const double r = draw(rng);
    out.scalar_draw = r;
    out.f = [f, r](const Point& x) { return f(x) + r; };
    return out;
}

RunRecord run_experiment(const RunConfig& input) {
    RunConfig config = input;
    validate(config);
    const ProblemSpec problem = make_problem(config);

    struct Task {
        LadderLevel level;
        std::optional<double> noise;
    };
    std::vector<Task> tasks;
    if (!config.noise_levels.empty()) {
        for (double e : config.noise_levels) {
            tasks.push_back({config.ladder.back(), e});
        }
    } else {
        for (const auto& level : config.ladder) {
            tasks.push_back({level, std::nullopt});
        }
    }

    const auto run_task = [&config, &problem](const Task& task) {
        LevelRow row;
        row.level = task.level;
        row.dofs = task.level.dofs(config.dim);
        row.noise = task.noise;
        const auto start = std::chrono::steady_clock::now();
        try {
            ProblemSpec p = problem;
            std::optional<FieldNoise> field;
            if (task.noise) {
                const NoisyData noisy =
                    inject_noise(std::get<PointFunction>(problem.f), *task.noise, config.seed, config.noise_mode);
                p.f = noisy.f;
                field = noisy.field;
                row.noise_draw = noisy.scalar_draw;
            }
            row.sigma = config.sigma ? *config.sigma : coupled_sigma(static_cast<double>(row.dofs), config.sigma_eps);
            p.sigma = row.sigma;
            std::ofstream trace_file;
            if (config.write_traces) {
                std::string name = "trace_" + std::to_string(row.dofs);
                if (task.noise) {
                    std::ostringstream e;
                    e << *task.noise;
                    name += "_e" + e.str();
                }
                trace_file = open_output(std::filesystem::path(config.out_dir) / (name + ".jsonl"));
                p.trace = json_lines_sink(trace_file);
            }
            FemConfig fem;
            fem.dim = config.dim;
            fem.omega_cells = task.level.m;
            fem.y_intervals = task.level.M;
            fem.Y = config.Y;
            fem.grading = config.grading;
            fem.a_lower = config.a_lower;
            fem.solver.kind = config.solver;
            const IdentifyResult r = identify_fullydiscrete(p, fem, field);
            row.s_star = r.s_star;
            row.j_at_star = r.j_at_star;
            row.N = r.iterations;
            row.evaluations = r.evaluations;
            row.termination = to_string(r.termination);
            row.ok = true;
        } catch (const std::exception& ex) {
            row.ok = false;
            row.error = ex.what();
        }
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return row;
    };

    RunRecord record;
    record.config = config;
    record.code_version = code_version();
    record.reference = reference_order(config);
    record.rows.resize(tasks.size());
    const std::size_t workers = static_cast<std::size_t>(config.level_threads);
    for (std::size_t first = 0; first < tasks.size(); first += workers) {
        const std::size_t last = std::min(tasks.size(), first + workers);
        std::vector<std::future<LevelRow>> batch;
        for (std::size_t i = first; i < last; ++i) {
            batch.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, run_task,
                                       std::cref(tasks[i])));
        }
        for (std::size_t i = first; i < last; ++i) {
            record.rows[i] = batch[i - first].get();
        }
    }
    if (record.reference && config.noise_levels.empty()) {
        try {
            record.rate = estimate_rate(record, *record.reference);
        } catch (const InsufficientDataError&) {
            record.rate.reset();
        }
    }
    return record;
}

RateFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) {
        throw DomainError("fit_loglog: size mismatch");
    }
    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    if (lx.size() < 3) {
        throw InsufficientDataError("rate fit needs at least 3 usable points, got " + std::to_string(lx.size()));
    }
    const auto n = static_cast<Eigen::Index>(lx.size());
    Eigen::MatrixXd A(n, 2);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        A(i, 0) = lx[static_cast<std::size_t>(i)];
        A(i, 1) = 1.0;
        b(i) = ly[static_cast<std::size_t>(i)];
    }
    const Eigen::Vector2d coef = A.colPivHouseholderQr().solve(b);
    RateFit fit;
    fit.slope = coef(0);
    fit.intercept = coef(1);
    fit.points = static_cast<int>(n);
    fit.stagnation = std::abs(fit.slope) < 0.05;
    return fit;
}

RateFit estimate_rate(const RunRecord& record, double reference) {
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& row : record.rows) {
        if (row.ok) {
            x.push_back(static_cast<double>(row.dofs));
            y.push_back(error_against(row, reference));
        }
    }
    return fit_loglog(x, y);
}

void write_table_csv(const RunRecord& record, const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    const bool noisy = !record.config.noise_levels.empty();
    out << "dofs,s,j,N" << (noisy ? ",e" : "") << '\n';
    for (const auto& row : record.rows) {
        if (!row.ok) {
            out << row.dofs << ",nan,nan,0";
        } else {
            out << row.dofs << ',' << row.s_star << ',' << row.j_at_star << ',' << row.N;
        }
        if (noisy) {
            out << ',' << row.noise.value_or(0.0);
        }
        out << '\n';
    }
}

json to_json(const RunRecord& record) {
    json rows = json::array();
    for (const auto& row : record.rows) {
        json r = {{"m", row.level.m},
                  {"M", row.level.M},
                  {"dofs", row.dofs},
                  {"sigma", row.sigma},
                  {"ok", row.ok},
                  {"wall_seconds", row.wall_seconds}};
        if (row.ok) {
            r["s"] = row.s_star;
            r["j"] = row.j_at_star;
            r["N"] = row.N;
            r["evaluations"] = row.evaluations;
            r["termination"] = row.termination;
        } else {
            r["error"] = row.error;
        }
        if (row.noise) {
            r["e"] = *row.noise;
            r["noise_draw"] = row.noise_draw;
        }
        rows.push_back(r);
    }
    json out = {{"config", to_json(record.config)}, {"rows", rows}, {"code_version", record.code_version}};
    out["reference"] = record.reference ? json(*record.reference) : json(nullptr);
    if (record.rate) {
        out["rate"] = {{"slope", record.rate->slope},
                       {"intercept", record.rate->intercept},
                       {"points", record.rate->points},
                       {"stagnation", record.rate->stagnation}};
    } else {
        out["rate"] = nullptr;
    }
    return out;
}

void write_rate_csv(const RunRecord& record, double reference, const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    out << "log_dofs,log_error\n";
    for (const auto& row : record.rows) {
        const double err = error_against(row, reference);
        if (row.ok && err > 0.0) {
            out << std::log(static_cast<double>(row.dofs)) << ',' << std::log(err) << '\n';
        }
    }
}

TraceStudyResult trace_error_study(const TraceStudyConfig& config) {
    if (config.ladder.size() < 3) {
        throw ConfigError("trace study needs at least 3 levels");
    }
    TraceStudyResult result;
    result.orders = config.orders;
    const BoxDomain domain(config.dim);
    const auto basis = enumerate_modes(domain, config.modes);
    for (double s : config.orders) {
        // f_k = |k|^(-p): just outside H^(1-s), so u(s) just outside H^(1+s).
        const double p = (1.0 - s) + 0.5 * config.dim + config.decay_shift;
        Eigen::VectorXd coeffs(static_cast<Eigen::Index>(basis.size()));
        for (std::size_t i = 0; i < basis.size(); ++i) {
            coeffs(static_cast<Eigen::Index>(i)) =
                std::pow(static_cast<double>(basis[i].mode.sum_of_squares()), -0.5 * p);
        }
        const SpectralCoeffs f(basis, coeffs);
        const SpectralCoeffs u = solve_state(f, s).u;
        std::vector<double> x;
        std::vector<double> y;
        for (const auto& level : config.ladder) {
            FemConfig fem;
            fem.dim = config.dim;
            fem.omega_cells = level.m;
            fem.y_intervals = level.M;
            fem.Y = config.Y;
            fem.solver.kind = config.solver;
            const FemStateProvider provider(fem, f);
            const DiscreteTarget target = provider.represent(u);
            const double err = std::sqrt(provider.residual_norm2(provider.state(s), target));
            TraceStudyRow row{s, level, level.dofs(config.dim), err};
            result.rows.push_back(row);
            x.push_back(static_cast<double>(row.dofs));
            y.push_back(err);
        }
        result.fits.push_back(fit_loglog(x, y));
    }
    return result;
}

std::string code_version() {
    return FRACID_VERSION;
}

} // namespace fracid
