#pragma once

#include "fracid/common.hpp"
#include "fracid/regularizer.hpp"

#include <Eigen/Core>

namespace fracid {

/// Finite-difference reference for (-Laplace)^(-s): dense eigendecomposition of
/// the 3-point (dim 1) or 5-point (dim 2) Dirichlet Laplacian on a uniform grid
/// with m cells per axis. Nodal vectors cover all (m+1)^dim grid nodes, x_1
/// fastest; boundary entries are ignored on input and zero on output.
class DenseFractionalOracle {
public:
    static constexpr int kMaxCells = 40;

    DenseFractionalOracle(int dim, int m);

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] int cells() const { return m_; }
    [[nodiscard]] Eigen::Index num_nodes() const;
    /// Discrete eigenvalues, ascending.
    [[nodiscard]] const Eigen::VectorXd& eigenvalues() const { return lambda_; }
    /// Eigenvectors, orthonormal in the Euclidean inner product on interior nodes.
    [[nodiscard]] const Eigen::MatrixXd& eigenvectors() const { return vectors_; }

    /// lambda_h^(-s) applied to f; s >= 0.
    [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& f, double s) const;
    /// Grid samples of fn at every node.
    [[nodiscard]] Eigen::VectorXd sample(const PointFunction& fn) const;
    /// Discrete L2 inner product h^dim * sum_i a_i b_i.
    [[nodiscard]] double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

private:
    [[nodiscard]] Eigen::VectorXd to_interior(const Eigen::VectorXd& nodal) const;
    [[nodiscard]] Eigen::VectorXd to_nodal(const Eigen::VectorXd& interior) const;

    int dim_;
    int m_;
    Eigen::VectorXd lambda_;
    Eigen::MatrixXd vectors_;
};

struct ReducedValues {
    double f = 0.0;
    double df = 0.0;
    double d2f = 0.0;
};

/// Reduced functional and its first two derivatives for data f = lambda^s_bar phi,
/// u_d = phi with phi a unit eigenfunction of eigenvalue lambda.
[[nodiscard]] ReducedValues singlemode_reduced(double s, double lambda, double s_bar, const Regularizer& reg);

} // namespace fracid
