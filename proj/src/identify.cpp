#include "fracid/identify.hpp"

#include "fracid/eigen_core.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

namespace fracid {

namespace {

bool exact_zero(double v) {
    return std::abs(v) < kExactZero;
}

double checked(double v, double s) {
    if (!std::isfinite(v)) {
        throw EvaluationError("surrogate gradient is not finite at s = " + std::to_string(s));
    }
    return v;
}

// Keeps the stencil s +- sigma strictly inside the open interval despite rounding.
double guard_pad(Interval bounds) {
    return 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(bounds.upper));
}

Interval intersect(Interval a, Interval b) {
    return {std::max(a.lower, b.lower), std::min(a.upper, b.upper)};
}

SpectralCoeffs spectral_data(const ProblemSpec& problem) {
    if (const auto* coeffs = std::get_if<SpectralCoeffs>(&problem.f)) {
        if (coeffs->dim() != problem.dim) {
            throw ConfigError("spectral data dimension does not match the problem");
        }
        return *coeffs;
    }
    const int count = problem.modes > 0 ? problem.modes : default_mode_count(problem.dim);
    return project(std::get<PointFunction>(problem.f), enumerate_modes(BoxDomain(problem.dim), count));
}

} // namespace

TraceSink json_lines_sink(std::ostream& out) {
    return [&out](const TraceRecord& r) {
        const nlohmann::ordered_json line = {{"k", r.k}, {"s", r.s_k}, {"j", r.j_k}, {"width", r.width}};
        out << line.dump() << '\n';
    };
}

std::string to_string(Termination t) {
    switch (t) {
    case Termination::exact_zero:
        return "exact_zero";
    case Termination::tolerance:
        return "tolerance";
    case Termination::midpoint_stall:
        return "midpoint_stall";
    case Termination::max_iter:
        return "max_iter";
    }
    return "max_iter";
}

Bracket isolate_root(const ScalarFunction& j, double s_l0, double s_r0, double sigma, Interval bounds) {
    if (!(sigma > 0.0)) {
        throw StepError("isolate_root: sigma must be positive");
    }
    const double pad = guard_pad(bounds);
    const double lo = bounds.lower + sigma + pad;
    const double hi = bounds.upper - sigma - pad;
    if (!(lo <= s_l0 && s_l0 < s_r0 && s_r0 <= hi)) {
        throw DomainError("isolate_root: need a + sigma <= s_l < s_r <= b - sigma, got [" + std::to_string(s_l0) +
                          ", " + std::to_string(s_r0) + "] with sigma " + std::to_string(sigma));
    }
    Bracket b;
    b.s_l = s_l0;
    b.s_r = s_r0;
    b.j_l = checked(j(s_l0), s_l0);
    b.j_r = checked(j(s_r0), s_r0);

    const auto collapse_left = [&b] {
        b.s_r = b.s_l;
        b.j_r = b.j_l;
        b.exact_root = true;
    };
    const auto collapse_right = [&b] {
        b.s_l = b.s_r;
        b.j_l = b.j_r;
        b.exact_root = true;
    };
    if (exact_zero(b.j_l)) {
        collapse_left();
        return b;
    }
    if (exact_zero(b.j_r)) {
        collapse_right();
        return b;
    }
    while (b.j_r < 0.0) {
        const double next = b.s_r + sigma;
        if (next > hi) {
            throw IsolationFailure("root isolation: j < 0 up to s = " + std::to_string(b.s_r) +
                                       "; next step leaves the guard interval",
                                   b);
        }
        b.s_r = next;
        b.j_r = checked(j(next), next);
        ++b.isolation_steps;
        if (exact_zero(b.j_r)) {
            collapse_right();
            return b;
        }
    }
    while (b.j_l > 0.0) {
        const double next = b.s_l - sigma;
        if (next < lo) {
            throw IsolationFailure("root isolation: j > 0 down to s = " + std::to_string(b.s_l) +
                                       "; next step leaves the guard interval",
                                   b);
        }
        b.s_l = next;
        b.j_l = checked(j(next), next);
        ++b.isolation_steps;
        if (exact_zero(b.j_l)) {
            collapse_left();
            return b;
        }
    }
    return b;
}

IdentifyResult bisect(const ScalarFunction& j, const Bracket& bracket, double tol, int max_iter,
                      const TraceSink& trace) {
    if (!(tol > 0.0)) {
        throw ConfigError("bisect: tol must be positive");
    }
    if (max_iter < 0) {
        throw ConfigError("bisect: max_iter must be nonnegative");
    }
    IdentifyResult r;
    r.tol = tol;
    r.max_iter = max_iter;
    r.isolation_steps = bracket.isolation_steps;
    r.evaluations = 2 + bracket.isolation_steps;
    r.bracket_history.push_back(bracket);

    if (bracket.exact_root) {
        r.s_star = bracket.s_l;
        r.j_at_star = bracket.j_l;
        r.converged = true;
        r.termination = Termination::exact_zero;
        return r;
    }
    if (!(bracket.s_l < bracket.s_r) || std::signbit(bracket.j_l) == std::signbit(bracket.j_r)) {
        throw DomainError("bisect: bracket must satisfy s_l < s_r and j_l * j_r < 0");
    }
    // Before any midpoint exists, report the endpoint with the smaller residual.
    const bool left_better = std::abs(bracket.j_l) <= std::abs(bracket.j_r);
    r.s_star = left_better ? bracket.s_l : bracket.s_r;
    r.j_at_star = left_better ? bracket.j_l : bracket.j_r;

    Bracket cur = bracket;
    for (int k = 1;; ++k) {
        if (cur.width() <= tol) {
            r.termination = Termination::tolerance;
            r.converged = true;
            break;
        }
        if (k > max_iter) {
            r.termination = Termination::max_iter;
            r.converged = false;
            break;
        }
        const double s_k = 0.5 * (cur.s_l + cur.s_r);
        if (s_k <= cur.s_l || s_k >= cur.s_r) {
            r.termination = Termination::midpoint_stall;
            r.converged = true;
            break;
        }
        const double j_k = checked(j(s_k), s_k);
        ++r.evaluations;
        r.iterations = k;
        r.s_star = s_k;
        r.j_at_star = j_k;
        if (exact_zero(j_k)) {
            if (trace) {
                trace({k, s_k, j_k, 0.0});
            }
            r.termination = Termination::exact_zero;
            r.converged = true;
            break;
        }
        if (std::signbit(cur.j_l) == std::signbit(j_k)) {
            cur.s_l = s_k;
            cur.j_l = j_k;
        } else {
            cur.s_r = s_k;
            cur.j_r = j_k;
        }
        r.bracket_history.push_back(cur);
        if (trace) {
            trace({k, s_k, j_k, cur.width()});
        }
    }
    return r;
}

double coupled_sigma(double dofs, double eps) {
    if (!(dofs >= 1.0)) {
        throw DomainError("coupled_sigma: dof count must be >= 1");
    }
    return std::pow(dofs, -(1.0 + eps) / 9.0) / 2.5;
}

std::pair<double, double> guarded_start(const ProblemSpec& problem, double sigma, Interval bounds) {
    const double pad = guard_pad(bounds);
    const double lo = bounds.lower + sigma + pad;
    const double hi = bounds.upper - sigma - pad;
    if (!(lo < hi)) {
        throw StepError("sigma = " + std::to_string(sigma) + " leaves no room inside (" +
                        std::to_string(bounds.lower) + ", " + std::to_string(bounds.upper) + ")");
    }
    const double s_l = std::clamp(problem.s_l0, lo, hi);
    const double s_r = std::clamp(problem.s_r0, lo, hi);
    if (!(s_l < s_r)) {
        throw ConfigError("initial bracket collapses after clamping to the isolation guard");
    }
    return {s_l, s_r};
}

IdentifyResult identify_with(const ScalarFunction& j, const ProblemSpec& problem, double sigma, Interval bounds) {
    const auto [s_l, s_r] = guarded_start(problem, sigma, bounds);
    const Bracket bracket = isolate_root(j, s_l, s_r, sigma, bounds);
    IdentifyResult r = bisect(j, bracket, problem.tol, problem.max_iter, problem.trace);
    r.sigma = sigma;
    r.s_l0 = s_l;
    r.s_r0 = s_r;
    r.bounds = bounds;
    return r;
}

IdentifyResult identify_semidiscrete(const ProblemSpec& problem) {
    if (!problem.sigma) {
        throw ConfigError("identify_semidiscrete: sigma is required");
    }
    const double sigma = *problem.sigma;
    const SpectralStateProvider provider(spectral_data(problem));
    const DiscreteTarget target = provider.represent(problem.u_d);
    const Interval bounds = intersect(problem.bounds, {problem.regularizer.a, problem.regularizer.b});

    std::map<double, double> memo;
    const ScalarFunction j = [&](double s) {
        if (auto it = memo.find(s); it != memo.end()) {
            return it->second;
        }
        const double v = j_sigma(s, provider, target, problem.regularizer, sigma);
        memo.emplace(s, v);
        return v;
    };
    return identify_with(j, problem, sigma, bounds);
}

IdentifyResult identify_fullydiscrete(const ProblemSpec& problem, const FemConfig& mesh_config,
                                      const std::optional<FieldNoise>& noise) {
    if (mesh_config.dim != problem.dim) {
        throw ConfigError("identify_fullydiscrete: mesh dimension does not match the problem");
    }
    PointFunction f;
    if (const auto* coeffs = std::get_if<SpectralCoeffs>(&problem.f)) {
        f = as_point_function(*coeffs);
    } else {
        f = std::get<PointFunction>(problem.f);
    }
    const FemStateProvider provider(mesh_config, f, noise);
    const DiscreteTarget target = provider.represent(problem.u_d);
    const Interval bounds = intersect(intersect(problem.bounds, {problem.regularizer.a, problem.regularizer.b}),
                                      provider.admissible());
    const double dofs =
        static_cast<double>(provider.omega().num_nodes()) * static_cast<double>(mesh_config.y_intervals + 1);
    const double sigma = problem.sigma ? *problem.sigma : coupled_sigma(dofs);

    const ScalarFunction j = [&](double s) {
        if (problem.threads > 1 && s - sigma > bounds.lower && s + sigma < bounds.upper) {
            provider.prefetch({s - sigma, s, s + sigma}, problem.threads);
        }
        return j_sigma(s, provider, target, problem.regularizer, sigma);
    };
    return identify_with(j, problem, sigma, bounds);
}

} // namespace fracid
