#pragma once

#include "fracid/common.hpp"
#include "fracid/objective.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace fracid {

// ---------------------------------------------------------------------------
// Meshes

/// Graded partition y_j = (j/M)^gamma * Y of [0, Y].
struct GradedMesh1D {
    double Y = 1.0;
    int M = 2;
    double gamma = 1.0;
    Eigen::VectorXd nodes;

    [[nodiscard]] double interval(int j) const { return nodes(j + 1) - nodes(j); }
    /// max_j h_{j+1} / h_j over the constructed nodes.
    [[nodiscard]] double max_neighbor_ratio() const;
};

/// Upper bound 2^gamma - 1 on neighboring interval ratios of a graded mesh.
[[nodiscard]] double grading_ratio_bound(double gamma);

[[nodiscard]] GradedMesh1D graded_mesh(double Y, int M, double gamma);

/// Graded mesh with gamma = 3/(2 a_lower) + 0.1, valid for every s > a_lower.
[[nodiscard]] GradedMesh1D build_graded_mesh(double Y, int M, double a_lower);

/// Grading exponent 3/(2 s) + 0.1 for a single order s.
[[nodiscard]] double grading_exponent(double s);

/// Uniform tensor grid of (0,1)^dim with m cells per axis. Nodes are numbered
/// lexicographically with x_1 fastest.
class OmegaMesh {
public:
    OmegaMesh(int dim, int cells_per_axis);

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] int cells_per_axis() const { return m_; }
    [[nodiscard]] double h() const { return 1.0 / m_; }
    [[nodiscard]] Eigen::Index num_cells() const;
    [[nodiscard]] Eigen::Index num_nodes() const;
    [[nodiscard]] Eigen::Index num_interior() const;
    [[nodiscard]] bool is_boundary(Eigen::Index node) const;
    [[nodiscard]] Point node_coords(Eigen::Index node) const;
    /// Full node index of the i-th interior node (interior nodes numbered x_1 fastest).
    [[nodiscard]] Eigen::Index interior_to_node(Eigen::Index interior) const;

private:
    int dim_;
    int m_;
};

/// Omega x graded y-partition; #T_Y = M * #T_Omega cells.
struct CylinderMesh {
    OmegaMesh omega;
    GradedMesh1D y;

    [[nodiscard]] Eigen::Index num_cells() const { return omega.num_cells() * y.M; }
    /// (m+1)^dim (M+1): the dof count used to label mesh levels.
    [[nodiscard]] Eigen::Index num_nodes() const { return omega.num_nodes() * (y.M + 1); }
};

/// Q1 x P1 nodal space on the cylinder with zero values on
/// dOmega x [0,Y) and Omega x {Y}. Free dofs are ordered layer by layer
/// (y slowest), interior Omega nodes within a layer; layer 0 is the trace.
class FESpace {
public:
    explicit FESpace(CylinderMesh mesh);

    [[nodiscard]] const CylinderMesh& mesh() const { return mesh_; }
    [[nodiscard]] Eigen::Index layer_size() const { return mesh_.omega.num_interior(); }
    [[nodiscard]] int num_layers() const { return mesh_.y.M; }
    [[nodiscard]] Eigen::Index num_free() const { return layer_size() * num_layers(); }
    /// Full cylinder node index (Omega node + layer * #Omega nodes) of a free dof.
    [[nodiscard]] Eigen::Index free_to_node(Eigen::Index free) const;
    /// Free indices of the y = 0 layer.
    [[nodiscard]] std::vector<Eigen::Index> trace_layer() const;
    /// Scatter a free-dof vector into a full nodal vector with zeros on Gamma_D.
    [[nodiscard]] Eigen::VectorXd expand(const Eigen::VectorXd& free_values) const;

private:
    CylinderMesh mesh_;
};

// ---------------------------------------------------------------------------
// Operators

using SparseMatrixRM = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Symmetric operator over free dofs, compressed row storage.
struct SparseOperator {
    SparseMatrixRM matrix;
    Eigen::Index layer_size = 0;
    int num_layers = 0;

    [[nodiscard]] Eigen::Index rows() const { return matrix.rows(); }
};

/// Local mass and stiffness matrices of the P1 element [y0, y1] under the
/// weight y^alpha; index 0 is the node at y0.
struct WeightedElement {
    Eigen::Matrix2d mass;
    Eigen::Matrix2d stiffness;
};

[[nodiscard]] WeightedElement weighted_element(double y0, double y1, double alpha);

/// Tridiagonal y-direction matrices over nodes 0..M-1 (node M is Dirichlet).
struct TridiagonalPair {
    Eigen::VectorXd mass_diag;
    Eigen::VectorXd mass_off;
    Eigen::VectorXd stiff_diag;
    Eigen::VectorXd stiff_off;

    [[nodiscard]] Eigen::SparseMatrix<double> mass() const;
    [[nodiscard]] Eigen::SparseMatrix<double> stiffness() const;
};

[[nodiscard]] TridiagonalPair weighted_y_matrices(const GradedMesh1D& y, double alpha);

/// Standard Q1 stiffness and mass on interior Omega nodes.
struct OmegaMatrices {
    Eigen::SparseMatrix<double> stiffness;
    Eigen::SparseMatrix<double> mass;
};

[[nodiscard]] OmegaMatrices omega_matrices(const OmegaMesh& omega);

/// 2^(1-2s) Gamma(1-s) / Gamma(s).
[[nodiscard]] double d_s_constant(double s);

/// A_Omega (x) M^y_alpha + M_Omega (x) S^y_alpha with alpha = 1 - 2s, stored
/// with y as the slow index (kron(M^y, A_Omega) + kron(S^y, M_Omega)).
[[nodiscard]] SparseOperator assemble_stiffness(const CylinderMesh& mesh, const FESpace& space, double s);

/// Optional i.i.d. U(-amplitude, amplitude) perturbation of the data at every
/// load quadrature node, drawn in cell order from a seeded generator.
struct FieldNoise {
    double amplitude = 0.0;
    std::uint64_t seed = 0;
};

/// (f, psi_i) for every interior Omega node, 3-point Gauss per axis and cell
/// (exact for degree 4 integrands).
[[nodiscard]] Eigen::VectorXd omega_load_moments(const OmegaMesh& omega, const PointFunction& f,
                                                 const std::optional<FieldNoise>& noise = std::nullopt);

/// Exact (f, psi_i) for data given by sine coefficients, from the closed form
/// of (sin(k pi x), hat_i) on the uniform grid.
[[nodiscard]] Eigen::VectorXd spectral_load_moments(const OmegaMesh& omega, const SpectralCoeffs& f);

/// Right side d_s <f, tr W> over free dofs; nonzero on the trace layer only.
[[nodiscard]] Eigen::VectorXd assemble_load(const FESpace& space, const PointFunction& f, double s);
[[nodiscard]] Eigen::VectorXd assemble_load_from_moments(const FESpace& space, const Eigen::VectorXd& moments,
                                                         double s);

enum class SolverKind {
    automatic, ///< tensor
    tensor,    ///< exact fast diagonalization in Omega + tridiagonal solves in y
    direct,    ///< sparse LDL^T
    cg         ///< Jacobi-preconditioned conjugate gradients
};

struct SolverConfig {
    SolverKind kind = SolverKind::automatic;
    double rel_tol = 1e-12;
    int max_iter = 20000;
};

[[nodiscard]] SolverKind parse_solver_kind(const std::string& name);
[[nodiscard]] std::string to_string(SolverKind kind);

/// Solves the assembled system for free-dof values.
[[nodiscard]] Eigen::VectorXd solve_free(const SparseOperator& op, const Eigen::VectorXd& rhs,
                                         const SolverConfig& config);

/// Tensor-product solve: the Omega operators are diagonalized by discrete
/// sines, leaving one tridiagonal y-system per Omega mode.
[[nodiscard]] Eigen::VectorXd solve_tensor(const FESpace& space, double s, const Eigen::VectorXd& rhs);

/// Full nodal vector V_T (zeros on Gamma_D).
[[nodiscard]] Eigen::VectorXd solve_extension(const CylinderMesh& mesh, const FESpace& space, const PointFunction& f,
                                              double s, const SolverConfig& config = {});

/// Nodal values of V_T on the y = 0 layer: all (m+1)^dim Omega nodes.
[[nodiscard]] Eigen::VectorXd trace(const Eigen::VectorXd& full, const FESpace& space);

/// Truncation height: max(1, 1 + ln(#T_Omega)/3), or the override when given.
[[nodiscard]] double choose_truncation(Eigen::Index num_omega_cells, std::optional<double> override_Y = std::nullopt);

// ---------------------------------------------------------------------------
// Discrete functions on Omega

/// Tensor Gauss rule on every Omega cell with Q1 basis tabulation, used for
/// L2 inner products of nodal functions and point data.
class OmegaQuadrature {
public:
    OmegaQuadrature(const OmegaMesh& omega, int points_per_axis);

    [[nodiscard]] Eigen::Index size() const { return weights_.size(); }
    [[nodiscard]] const Eigen::VectorXd& weights() const { return weights_; }
    [[nodiscard]] const std::vector<Point>& points() const { return points_; }
    /// Values of the Q1 interpolant of a full nodal vector at all points.
    [[nodiscard]] Eigen::VectorXd interpolate(const Eigen::VectorXd& nodal) const;
    [[nodiscard]] Eigen::VectorXd sample(const PointFunction& fn) const;

private:
    OmegaMesh omega_;
    Eigen::VectorXd weights_;
    std::vector<Point> points_;
    SparseMatrixRM interp_;
};

// ---------------------------------------------------------------------------
// Discrete control-to-state map

enum class GradingPolicy {
    fixed,    ///< gamma = 3/(2 a_lower) + 0.1 for every s
    per_order ///< gamma = 3/(2 s) + 0.1 rebuilt for each solve
};

[[nodiscard]] GradingPolicy parse_grading_policy(const std::string& name);
[[nodiscard]] std::string to_string(GradingPolicy policy);

struct FemConfig {
    int dim = 2;
    int omega_cells = 10; ///< m
    int y_intervals = 25; ///< M
    std::optional<double> Y;
    GradingPolicy grading = GradingPolicy::per_order;
    double a_lower = 0.1; ///< used by GradingPolicy::fixed
    SolverConfig solver;
    int tracking_points = 4; ///< per axis and cell, exact for degree 7
};

/// S_T(s) = tr V_T(s) with solves memoized by s. Thread-safe.
class FemStateProvider final : public StateProvider {
public:
    FemStateProvider(FemConfig config, const PointFunction& f, const std::optional<FieldNoise>& noise = std::nullopt);
    /// Spectral data with exactly integrated load moments.
    FemStateProvider(FemConfig config, const SpectralCoeffs& f);

    [[nodiscard]] ProviderKind kind() const override { return ProviderKind::fem; }
    [[nodiscard]] Interval admissible() const override;
    [[nodiscard]] Eigen::VectorXd state(double s) const override;
    [[nodiscard]] DiscreteTarget represent(const Field& target) const override;
    [[nodiscard]] double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const override;
    [[nodiscard]] double residual_inner(const Eigen::VectorXd& u, const DiscreteTarget& ud,
                                        const Eigen::VectorXd& v) const override;
    [[nodiscard]] double residual_norm2(const Eigen::VectorXd& u, const DiscreteTarget& ud) const override;

    /// Solves for several orders, concurrently when threads > 1.
    void prefetch(const std::vector<double>& orders, int threads = 1) const;

    [[nodiscard]] const FemConfig& config() const { return config_; }
    [[nodiscard]] const OmegaMesh& omega() const { return omega_; }
    [[nodiscard]] double truncation() const { return Y_; }
    [[nodiscard]] CylinderMesh mesh_for(double s) const;
    [[nodiscard]] std::size_t solve_count() const;

private:
    [[nodiscard]] Eigen::VectorXd compute(double s) const;

    FemConfig config_;
    OmegaMesh omega_;
    double Y_;
    Eigen::VectorXd moments_;
    OmegaQuadrature quad_;
    mutable std::mutex mutex_;
    mutable std::map<double, Eigen::VectorXd> cache_;
    mutable std::size_t solves_ = 0;
};

// ---------------------------------------------------------------------------
// Snapshots

/// Plain-text snapshot of a cylinder nodal vector; see docs/formats.md.
void write_snapshot(std::ostream& out, const CylinderMesh& mesh, double s, const Eigen::VectorXd& full);

} // namespace fracid
