#pragma once

#include "fracid/common.hpp"
#include "fracid/extension_fem.hpp"
#include "fracid/identify.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fracid {

/// One ladder level: m cells per Omega axis, M graded y-intervals.
struct LadderLevel {
    int m = 10;
    int M = 25;

    /// (m+1)^dim (M+1), the dof count the tables report.
    [[nodiscard]] long dofs(int dim) const;
    friend bool operator==(const LadderLevel&, const LadderLevel&) = default;
};

/// Levels with 3146, 10496 and 25137 dofs in 2-D.
[[nodiscard]] std::vector<LadderLevel> desk_ladder();
/// desk_ladder() plus the 49348 and 85529 dof levels.
[[nodiscard]] std::vector<LadderLevel> full_ladder();
/// "desk", "full" or a comma list "10x25,15x40".
[[nodiscard]] std::vector<LadderLevel> parse_ladder(const std::string& text);

enum class NoiseMode { scalar, field };

[[nodiscard]] NoiseMode parse_noise_mode(const std::string& name);
[[nodiscard]] std::string to_string(NoiseMode mode);

/// Data description. kind "mode": f = lambda_k^s_bar phi_k, u_d = phi_k.
/// kind "expression": f is a constant, u_d is "cone" or "zero".
struct DataSpec {
    std::string kind = "mode";
    std::vector<int> k{2, 2};
    double s_bar = 0.5;
    double f_constant = 10.0;
    std::string u_d = "cone";
};

struct RunConfig {
    std::string experiment = "example1";
    int dim = 2;
    double a = 0.05;
    double b = 0.95;
    std::string regularizer = "example1";
    DataSpec data;
    std::vector<LadderLevel> ladder = desk_ladder();
    std::optional<double> sigma; ///< explicit; otherwise mesh-coupled per level
    double sigma_eps = 1e-10;
    double tol = kDefaultTol;
    int max_iter = kDefaultMaxIter;
    double s_l0 = 0.3;
    double s_r0 = 0.9;
    std::uint64_t seed = 1;
    std::vector<double> noise_levels; ///< example4 only
    NoiseMode noise_mode = NoiseMode::scalar;
    std::optional<double> Y;
    GradingPolicy grading = GradingPolicy::per_order;
    double a_lower = 0.1;
    SolverKind solver = SolverKind::automatic;
    int level_threads = 1; ///< ladder levels run concurrently
    int solve_threads = 3; ///< PDE solves per j evaluation
    std::string out_dir = "results";
    /// Per-level iteration traces as out_dir/trace_<dofs>[_e<e>].jsonl.
    bool write_traces = false;
};

/// Defaults for "example1".."example4" of the numerical experiments.
[[nodiscard]] RunConfig preset(const std::string& experiment);

/// Throws ConfigError on 0 < a < b < 1 violations, sigma >= (b-a)/2, an
/// empty ladder, or duplicate dof counts; sorts the ladder by dofs.
void validate(RunConfig& config);

[[nodiscard]] RunConfig config_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const RunConfig& config);

struct LevelRow {
    LadderLevel level;
    long dofs = 0;
    double sigma = 0.0;
    std::optional<double> noise; ///< e, example4
    double noise_draw = 0.0;     ///< scalar shift actually applied
    double s_star = 0.0;
    double j_at_star = 0.0;
    int N = 0;
    int evaluations = 0;
    std::string termination;
    double wall_seconds = 0.0;
    bool ok = false;
    std::string error;
};

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    int points = 0;
    bool stagnation = false; ///< |slope| < 0.05
};

struct RunRecord {
    RunConfig config;
    std::vector<LevelRow> rows;
    std::optional<double> reference; ///< exact s_bar when known
    std::optional<RateFit> rate;
    std::string code_version;
};

/// Exact optimal order of the data, when the experiment has one.
[[nodiscard]] std::optional<double> reference_order(const RunConfig& config);

/// Problem data and regularizer for a config (noise not applied).
[[nodiscard]] ProblemSpec make_problem(const RunConfig& config);

/// f + r with one draw r ~ U(-e, e) (scalar), or f together with a per-node
/// field perturbation for the load quadrature (field).
struct NoisyData {
    PointFunction f;
    std::optional<FieldNoise> field;
    double scalar_draw = 0.0;
};

[[nodiscard]] NoisyData inject_noise(const PointFunction& f, double e, std::uint64_t seed, NoiseMode mode);

/// Runs one fully discrete identification per ladder level (per noise level
/// for example4, on the last ladder level). Failed levels are recorded.
[[nodiscard]] RunRecord run_experiment(const RunConfig& config);

/// Least-squares slope of log|s* - s_bar| against log dofs over usable rows.
[[nodiscard]] RateFit estimate_rate(const RunRecord& record, double reference);
[[nodiscard]] RateFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

/// CSV columns dofs,s,j,N (plus e for noise runs).
void write_table_csv(const RunRecord& record, const std::filesystem::path& path);
[[nodiscard]] nlohmann::json to_json(const RunRecord& record);
/// (log dofs, log error) pairs.
void write_rate_csv(const RunRecord& record, double reference, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Trace-error study of the extension solver against the spectral solution

struct TraceStudyConfig {
    int dim = 1;
    std::vector<double> orders{0.3, 0.5, 0.7};
    std::vector<LadderLevel> ladder{{16, 16}, {32, 32}, {64, 64}, {128, 128}};
    /// Coefficients f_k = |k|^(-p), p = (1 - s) + dim/2 + decay_shift: with no
    /// shift f just misses H^(1-s).
    double decay_shift = 0.0;
    int modes = 4096;
    std::optional<double> Y;
    SolverKind solver = SolverKind::automatic;
};

struct TraceStudyRow {
    double s = 0.0;
    LadderLevel level;
    long dofs = 0;
    double l2_error = 0.0;
};

struct TraceStudyResult {
    std::vector<TraceStudyRow> rows;
    std::vector<double> orders;
    std::vector<RateFit> fits; ///< per order, slope vs #T_Y
};

[[nodiscard]] TraceStudyResult trace_error_study(const TraceStudyConfig& config);

[[nodiscard]] std::string code_version();

} // namespace fracid
