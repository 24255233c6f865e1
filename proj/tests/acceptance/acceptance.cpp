// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Pass --full (or set FRACID_ACCEPTANCE_FULL=1) to add the two largest
// ladder levels to the table reproductions.

#include "fracid/experiments.hpp"
#include "fracid/extension_fem.hpp"
#include "fracid/identify.hpp"
#include "fracid/objective.hpp"
#include "fracid/oracle.hpp"
#include "fracid/state_map.hpp"

#include "support/cell_assembly.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace fracid;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = check();
    } catch (const std::exception& ex) {
        out = {false, std::string("exception: ") + ex.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!out.pass) {
        ++failures;
    }
    std::cout << (out.pass ? "[PASS] " : "[FAIL] ") << "C" << std::setw(2) << std::left << id << std::right << " "
              << name << ": " << out.detail << " (" << std::fixed << std::setprecision(2) << secs << " s)"
              << std::defaultfloat << std::endl;
}

std::string fmt(double v, int digits = 6) {
    std::ostringstream s;
    s << std::setprecision(digits) << v;
    return s.str();
}

std::string fmt_list(const std::vector<double>& v, int digits = 6) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i ? ", " : "") + fmt(v[i], digits);
    }
    return out + "]";
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// f = lambda^s_bar phi_k, u_d = phi_k in exact coefficients.
struct SingleMode {
    SpectralCoeffs f;
    SpectralCoeffs u_d;
    double lambda = 0.0;
};

SingleMode single_mode_data(const RunConfig& config) {
    ModeIndex mode;
    mode.dim = config.dim;
    for (int i = 0; i < config.dim; ++i) {
        mode.k[static_cast<std::size_t>(i)] = config.data.k[static_cast<std::size_t>(i)];
    }
    const EigenPair pair = make_eigenpair(mode);
    std::vector<EigenPair> basis{pair};
    SingleMode out;
    out.lambda = pair.lambda;
    out.f = SpectralCoeffs(basis, Eigen::VectorXd::Constant(1, std::pow(pair.lambda, config.data.s_bar)));
    out.u_d = SpectralCoeffs(basis, Eigen::VectorXd::Constant(1, 1.0));
    return out;
}

std::vector<double> s_values(const RunRecord& record) {
    std::vector<double> out;
    for (const auto& row : record.rows) {
        out.push_back(row.ok ? row.s_star : std::nan(""));
    }
    return out;
}

std::string row_errors(const RunRecord& record) {
    std::string out;
    for (const auto& row : record.rows) {
        if (!row.ok) {
            out += "; level " + std::to_string(row.dofs) + " failed: " + row.error;
        }
    }
    return out;
}

RunConfig table_config(const std::string& experiment, bool full) {
    RunConfig c = preset(experiment);
    c.ladder = full ? full_ladder() : desk_ladder();
    c.solve_threads = 1;
    return c;
}

// Table reproduction: |s - table| <= 2e-3 per row and |s - target| decreasing.
Outcome table_check(const RunRecord& record, const std::vector<double>& table, double target) {
    const auto s = s_values(record);
    bool ok = s.size() == table.size();
    double worst = 0.0;
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
        const double d = std::abs(s[i] - table[i]);
        worst = std::max(worst, d);
        ok = ok && std::isfinite(s[i]) && d <= 2e-3;
    }
    bool monotone = true;
    for (std::size_t i = 1; i < s.size(); ++i) {
        monotone = monotone && std::abs(s[i] - target) < std::abs(s[i - 1] - target);
    }
    return {ok && monotone, "s = " + fmt_list(s) + ", max table diff " + fmt(worst, 3) + " (tol 2e-3), " +
                                (monotone ? "monotone" : "NOT monotone") + " toward " + fmt(target) +
                                row_errors(record)};
}

} // namespace

int main(int argc, char** argv) {
    bool full = false;
    if (const char* env = std::getenv("FRACID_ACCEPTANCE_FULL"); env && std::strcmp(env, "1") == 0) {
        full = true;
    }
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--full") == 0) {
            full = true;
        }
    }
    std::cout << "fracid acceptance, " << (full ? "full" : "desk") << " ladder" << std::endl;

    const RunConfig ex1 = preset("example1");
    const RunConfig ex2 = preset("example2");

    report(1, "single-mode oracle equivalence", [&] {
        const auto t0 = std::chrono::steady_clock::now();
        double worst = 0.0;
        for (const RunConfig* c : {&ex1, &ex2}) {
            const SingleMode data = single_mode_data(*c);
            const Regularizer reg = make_regularizer(c->regularizer, c->a, c->b);
            for (int i = 0; i < 50; ++i) {
                const double s = c->a + (c->b - c->a) * (i + 0.5) / 50.0;
                const ReducedValues ref = singlemode_reduced(s, data.lambda, c->data.s_bar, reg);
                const double g = reduced_grad(s, data.f, data.u_d, reg);
                const double h = reduced_hess(s, data.f, data.u_d, reg);
                worst = std::max(worst, std::abs(g - ref.df) / std::max(1.0, std::abs(ref.df)));
                worst = std::max(worst, std::abs(h - ref.d2f) / std::max(1.0, std::abs(ref.d2f)));
            }
        }
        const double secs = elapsed_since(t0);
        return Outcome{worst <= 1e-12 && secs < 1.0, "max scaled error " + fmt(worst, 3) +
                                                         " over 2x50 orders (tol 1e-12), " + fmt(secs, 3) + " s"};
    });

    report(2, "semi-discrete sigma rate", [&] {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<double> err;
        for (double sigma : {4e-3, 2e-3, 1e-3, 5e-4}) {
            ProblemSpec p = make_problem(ex1);
            p.sigma = sigma;
            err.push_back(std::abs(identify_semidiscrete(p).s_star - 0.5));
        }
        std::vector<double> ratios;
        bool ok = true;
        for (std::size_t i = 1; i < err.size(); ++i) {
            const double r = err[i - 1] / err[i];
            ratios.push_back(r);
            ok = ok && err[i] < err[i - 1] && r >= 3.0 && r <= 5.0;
        }
        const double secs = elapsed_since(t0);
        std::string detail = "|s_sigma - 0.5| = " + fmt_list(err, 3) + ", ratios " + fmt_list(ratios, 3);
        if (!ok) {
            detail += "; the single-mode surrogate vanishes at 0.5 for every sigma, so there is no rate to observe";
        }
        return Outcome{ok && secs < 5.0, detail + ", " + fmt(secs, 3) + " s"};
    });

    report(3, "bisection contraction", [&] {
        ProblemSpec p = make_problem(ex1);
        p.sigma = 1e-3;
        const IdentifyResult r = identify_semidiscrete(p);
        bool halving = r.bracket_history.size() >= 2 && r.s_l0 == 0.3 && r.s_r0 == 0.9;
        double worst = 0.0;
        for (std::size_t k = 0; k < r.bracket_history.size(); ++k) {
            const double expected = std::ldexp(0.6, -static_cast<int>(k));
            worst = std::max(worst, std::abs(r.bracket_history[k].width() - expected));
        }
        // 0.9 - 0.3 is not 0.6 in binary; allow the rounding of the endpoints.
        const double eps = std::numeric_limits<double>::epsilon();
        halving = halving && worst <= 4.0 * eps;
        const bool band = r.iterations >= 50 && r.iterations <= 55;
        return Outcome{halving && band, "max |width_k - 0.6*2^-k| = " + fmt(worst, 3) + " (<= 4 eps), N = " +
                                            std::to_string(r.iterations) + " (band [50, 55]), termination " +
                                            to_string(r.termination)};
    });

    report(4, "Taylor bound for the centered difference", [&] {
        const SingleMode data = single_mode_data(ex1);
        const SpectralStateProvider provider(data.f);
        double worst_ratio = 0.0;
        int checks = 0;
        bool ok = true;
        for (double sigma : {0.05, 1e-2, 1e-3}) {
            for (int i = 0; i <= 40; ++i) {
                const double s = 0.1 + 0.8 * i / 40.0;
                const double lhs =
                    (ds_state(data.f, s, 1).coeffs - centered_diff(provider, s, sigma)).norm();
                double sup = 0.0;
                for (int q = 0; q <= 200; ++q) {
                    const double t = s - sigma + 2.0 * sigma * q / 200.0;
                    sup = std::max(sup, ds_state(data.f, t, 3).coeffs.norm());
                }
                const double rhs = sigma * sigma / 3.0 * sup;
                worst_ratio = std::max(worst_ratio, lhs / rhs);
                ok = ok && lhs <= rhs;
                ++checks;
            }
        }
        return Outcome{ok, std::to_string(checks) + " (s, sigma) pairs, max lhs/rhs = " + fmt(worst_ratio, 4)};
    });

    report(5, "derivative bound", [&] {
        const auto basis = enumerate_modes(BoxDomain(2), 64);
        std::mt19937_64 gen(20240501);
        std::normal_distribution<double> normal;
        double worst_ratio = 0.0;
        bool ok = true;
        for (int trial = 0; trial < 20; ++trial) {
            Eigen::VectorXd c(64);
            for (Eigen::Index i = 0; i < c.size(); ++i) {
                c(i) = normal(gen);
            }
            const SpectralCoeffs f(basis, c);
            for (int i = 0; i < 30; ++i) {
                const double s = 0.05 * std::pow(0.95 / 0.05, (i + 0.5) / 30.0);
                for (int m = 1; m <= 3; ++m) {
                    const double lhs = l2_norm(ds_state(f, s, m));
                    const double rhs = std::pow(m / (std::exp(1.0) * s), m) * l2_norm(f);
                    worst_ratio = std::max(worst_ratio, lhs / rhs);
                    ok = ok && lhs <= rhs;
                }
            }
        }
        return Outcome{ok, "20 trials x 30 orders x m = 1..3, max lhs/rhs = " + fmt(worst_ratio, 4)};
    });

    report(6, "extension FEM trace rate (1-D)", [&] {
        const auto t0 = std::chrono::steady_clock::now();
        const TraceStudyResult study = trace_error_study(TraceStudyConfig{});
        bool ok = true;
        std::string detail;
        for (std::size_t i = 0; i < study.orders.size(); ++i) {
            const double s = study.orders[i];
            const double target = -(1.0 + s) / 2.0;
            const double slope = study.fits[i].slope;
            const bool within = std::abs(slope - target) <= 0.15 * std::abs(target);
            ok = ok && within;
            detail += (i ? ", " : "") + std::string("s=") + fmt(s, 2) + ": slope " + fmt(slope, 4) + " vs " +
                      fmt(target, 3);
        }
        const double secs = elapsed_since(t0);
        return Outcome{ok && secs < 120.0, detail + " (15% band), " + fmt(secs, 3) + " s"};
    });

    RunRecord table1;
    report(7, "example 1 ladder reproduction", [&] {
        table1 = run_experiment(table_config("example1", full));
        std::vector<double> table{4.96572e-01, 4.98371e-01, 4.99069e-01};
        if (full) {
            table.insert(table.end(), {4.99402e-01, 4.99585e-01});
        }
        return table_check(table1, table, 0.5);
    });

    report(8, "example 2 ladder reproduction", [&] {
        const RunRecord record = run_experiment(table_config("example2", full));
        std::vector<double> table{3.81417e-01, 3.81697e-01, 3.81811e-01};
        if (full) {
            table.insert(table.end(), {3.81866e-01, 3.81897e-01});
        }
        return table_check(record, table, (3.0 - std::sqrt(5.0)) / 2.0);
    });

    report(9, "observed identification rate", [&] {
        if (table1.rows.empty()) {
            table1 = run_experiment(table_config("example1", full));
        }
        const RateFit fit = estimate_rate(table1, 0.5);
        return Outcome{fit.slope <= -0.4, "slope " + fmt(fit.slope, 4) + " over " + std::to_string(fit.points) +
                                              " levels (need <= -0.4)"};
    });

    report(10, "Example 3 trend", [&] {
        const RunRecord record = run_experiment(table_config("example3", false));
        const auto s = s_values(record);
        bool ok = s.size() == 3;
        for (std::size_t i = 1; ok && i < s.size(); ++i) {
            ok = s[i] > s[i - 1];
        }
        const double last_change = s.size() == 3 ? s[2] - s[1] : std::nan("");
        const std::vector<double> table{4.44005e-01, 4.47239e-01, 4.48182e-01};
        double worst = 0.0;
        for (std::size_t i = 0; i < s.size() && i < table.size(); ++i) {
            worst = std::max(worst, std::isfinite(s[i]) ? std::abs(s[i] - table[i]) : 1.0);
        }
        ok = ok && last_change < 4e-3 && worst <= 5e-3;
        return Outcome{ok, "s = " + fmt_list(s) + ", third-level change " + fmt(last_change, 3) +
                               " (< 4e-3), max table diff " + fmt(worst, 3) + " (<= 5e-3)" +
                               row_errors(record)};
    });

    report(11, "Example 4 robustness", [&] {
        RunConfig c = preset("example4");
        c.solve_threads = 1;
        const RunRecord record = run_experiment(c);
        bool ok = true;
        std::string detail;
        for (const auto& row : record.rows) {
            const double e = row.noise.value_or(0.0);
            const double bound = e <= 2.0 ? 1e-2 : (e == 200.0 ? 0.15 : std::numeric_limits<double>::infinity());
            const double err = row.ok ? std::abs(row.s_star - 0.5) : std::nan("");
            const bool pass = row.ok && err <= bound;
            ok = ok && (pass || !std::isfinite(bound));
            detail += (detail.empty() ? "" : ", ") + std::string("e=") + fmt(e) + ": " +
                      (row.ok ? "|s-0.5| " + fmt(err, 3) : "failed (" + row.error + ")");
        }
        // Determinism: rerun the e = 2 level with the same seed.
        RunConfig again = c;
        again.noise_levels = {2.0};
        const RunRecord repeat = run_experiment(again);
        const auto it = std::find_if(record.rows.begin(), record.rows.end(),
                                     [](const LevelRow& r) { return r.noise == 2.0; });
        const bool deterministic =
            it != record.rows.end() && repeat.rows.size() == 1 && repeat.rows[0].s_star == it->s_star;
        ok = ok && deterministic;
        return Outcome{ok, detail + "; seed " + std::to_string(c.seed) + " rerun " +
                               (deterministic ? "identical" : "DIFFERS")};
    });

    report(12, "quadratic growth", [&] {
        bool ok = true;
        std::string detail;
        for (const RunConfig* c : {&ex1, &ex2}) {
            const SingleMode data = single_mode_data(*c);
            const Regularizer reg = make_regularizer(c->regularizer, c->a, c->b);
            const ScalarFunction grad = [&](double s) { return reduced_grad(s, data.f, data.u_d, reg); };
            const IdentifyResult root = bisect(grad, isolate_root(grad, 0.3, 0.9, 1e-2, {c->a, c->b}));
            const double s_star = root.s_star;
            const double theta = reduced_hess(s_star, data.f, data.u_d, reg) * (1.0 - 1e-6);
            const SpectralStateProvider provider(data.f);
            const DiscreteTarget target = provider.represent(data.u_d);
            const double f_star = reduced_value(s_star, provider, target, reg);
            double min_slack = std::numeric_limits<double>::infinity();
            for (int i = 0; i < 21; ++i) {
                const double s = s_star - 0.05 + 0.1 * (i + 1) / 22.0;
                const double slack = reduced_value(s, provider, target, reg) - f_star -
                                     theta / 4.0 * (s - s_star) * (s - s_star);
                min_slack = std::min(min_slack, slack);
            }
            ok = ok && min_slack >= 0.0;
            detail += (detail.empty() ? "" : "; ") + c->experiment + ": s* = " + fmt(s_star, 8) + ", theta = " +
                      fmt(theta, 5) + ", min slack " + fmt(min_slack, 3);
        }
        return Outcome{ok, detail};
    });

    report(13, "Kronecker assembly equivalence", [&] {
        double worst = 0.0;
        for (double alpha : {-0.8, 0.0, 0.8}) {
            const double s = (1.0 - alpha) / 2.0;
            const CylinderMesh mesh{OmegaMesh(2, 2), graded_mesh(1.0, 2, grading_exponent(s))};
            const FESpace space(mesh);
            const Eigen::MatrixXd kron(assemble_stiffness(mesh, space, s).matrix);
            const Eigen::MatrixXd loop = fracid::testing::cell_loop_operator(space, alpha);
            worst = std::max(worst, (kron - loop).norm() / loop.norm());
        }
        return Outcome{worst <= 1e-10, "max relative difference " + fmt(worst, 3) + " on 2x2x2 cells (tol 1e-10)"};
    });

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
