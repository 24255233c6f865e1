#pragma once

#include "fracid/common.hpp"
#include "fracid/extension_fem.hpp"
#include "fracid/objective.hpp"
#include "fracid/regularizer.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fracid {

using ScalarFunction = std::function<double(double)>;

/// |j| below this counts as an exact zero.
inline constexpr double kExactZero = 1e-300;
inline constexpr double kDefaultTol = 2.2204e-16;
inline constexpr int kDefaultMaxIter = 200;

struct Bracket {
    double s_l = 0.0;
    double s_r = 0.0;
    double j_l = 0.0;
    double j_r = 0.0;
    /// Set when j vanished at an endpoint; s_l == s_r is the root.
    bool exact_root = false;
    /// Number of sigma-steps taken during root isolation.
    int isolation_steps = 0;

    [[nodiscard]] double width() const { return s_r - s_l; }
};

/// One bisection iteration.
struct TraceRecord {
    int k = 0;
    double s_k = 0.0;
    double j_k = 0.0;
    double width = 0.0;
};

using TraceSink = std::function<void(const TraceRecord&)>;

/// Writes each record as one JSON object per line.
[[nodiscard]] TraceSink json_lines_sink(std::ostream& out);

enum class Termination {
    exact_zero,     ///< j vanished at an endpoint or a midpoint
    tolerance,      ///< bracket width <= tol
    midpoint_stall, ///< the midpoint rounds onto an endpoint
    max_iter        ///< iteration cap reached first; not converged
};

[[nodiscard]] std::string to_string(Termination t);

struct IdentifyResult {
    double s_star = 0.0;
    double j_at_star = 0.0;
    int iterations = 0; ///< N: midpoints evaluated
    std::vector<Bracket> bracket_history;
    int evaluations = 0; ///< calls of j, isolation included
    int isolation_steps = 0;
    bool converged = false;
    Termination termination = Termination::max_iter;

    // configuration echo
    double sigma = 0.0;
    double tol = kDefaultTol;
    int max_iter = kDefaultMaxIter;
    double s_l0 = 0.0;
    double s_r0 = 0.0;
    Interval bounds;
};

/// Root isolation failed: the next step would leave [a + sigma, b - sigma].
class IsolationFailure : public Error {
public:
    IsolationFailure(const std::string& what, Bracket last) : Error(what), bracket(last) {}

    Bracket bracket;
};

/// Evaluates j at both initial endpoints, handles the exact-zero cases, then
/// steps s_r up by sigma while j(s_r) < 0 and s_l down while j(s_l) > 0.
/// Endpoints must lie in [a + sigma, b - sigma].
[[nodiscard]] Bracket isolate_root(const ScalarFunction& j, double s_l0, double s_r0, double sigma, Interval bounds);

/// Midpoint bisection on a sign-changing bracket. Each iteration evaluates j
/// once; s_star is the last evaluated midpoint.
[[nodiscard]] IdentifyResult bisect(const ScalarFunction& j, const Bracket& bracket, double tol = kDefaultTol,
                                    int max_iter = kDefaultMaxIter, const TraceSink& trace = {});

/// sigma = (1/2.5) * dofs^(-(1 + eps)/9).
[[nodiscard]] double coupled_sigma(double dofs, double eps = 1e-10);

struct ProblemSpec {
    int dim = 2;
    Field f;
    Field u_d;
    Regularizer regularizer;
    /// Search interval; the effective interval is intersected with the
    /// regularizer domain.
    Interval bounds{0.05, 0.95};
    /// Explicit sigma; when absent the fully discrete driver uses coupled_sigma
    /// of the cylinder node count.
    std::optional<double> sigma;
    double s_l0 = 0.3;
    double s_r0 = 0.9;
    double tol = kDefaultTol;
    int max_iter = kDefaultMaxIter;
    /// Spectral truncation for point-function data; 0 selects the default.
    int modes = 0;
    /// Concurrent PDE solves per j evaluation (fully discrete only).
    int threads = 1;
    TraceSink trace;
};

/// Initial bracket clamped into the isolation guard [a + sigma, b - sigma].
[[nodiscard]] std::pair<double, double> guarded_start(const ProblemSpec& problem, double sigma, Interval bounds);

/// Bisection on j_sigma with the exact spectral state.
[[nodiscard]] IdentifyResult identify_semidiscrete(const ProblemSpec& problem);

/// Bisection on j_{sigma,T} with the extension finite element state.
[[nodiscard]] IdentifyResult identify_fullydiscrete(const ProblemSpec& problem, const FemConfig& mesh_config,
                                                    const std::optional<FieldNoise>& noise = std::nullopt);

/// Runs isolation then bisection on an arbitrary surrogate.
[[nodiscard]] IdentifyResult identify_with(const ScalarFunction& j, const ProblemSpec& problem, double sigma,
                                           Interval bounds);

} // namespace fracid
