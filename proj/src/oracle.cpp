#include "fracid/oracle.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace fracid {

DenseFractionalOracle::DenseFractionalOracle(int dim, int m) : dim_(dim), m_(m) {
    if (dim != 1 && dim != 2) {
        throw DomainError("DenseFractionalOracle: dim must be 1 or 2");
    }
    if (m < 2 || m > kMaxCells) {
        throw DomainError("DenseFractionalOracle: grid of " + std::to_string(m) +
                          " cells per axis refused (dense cost guard, max " + std::to_string(kMaxCells) + ")");
    }
    const int n = m - 1;
    const Eigen::Index size = dim == 1 ? n : static_cast<Eigen::Index>(n) * n;
    const double inv_h2 = static_cast<double>(m) * m;
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(size, size);
    for (Eigen::Index p = 0; p < size; ++p) {
        const int i = static_cast<int>(p % n);
        const int j = static_cast<int>(p / n);
        L(p, p) = 2.0 * dim * inv_h2;
        if (i > 0) {
            L(p, p - 1) = -inv_h2;
        }
        if (i + 1 < n) {
            L(p, p + 1) = -inv_h2;
        }
        if (dim == 2) {
            if (j > 0) {
                L(p, p - n) = -inv_h2;
            }
            if (j + 1 < n) {
                L(p, p + n) = -inv_h2;
            }
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(L);
    if (eig.info() != Eigen::Success) {
        throw SolverError("DenseFractionalOracle: eigendecomposition failed");
    }
    lambda_ = eig.eigenvalues();
    vectors_ = eig.eigenvectors();
    if (!(lambda_.minCoeff() > 0.0)) {
        throw SolverError("DenseFractionalOracle: nonpositive discrete eigenvalue");
    }
}

Eigen::Index DenseFractionalOracle::num_nodes() const {
    return dim_ == 1 ? m_ + 1 : static_cast<Eigen::Index>(m_ + 1) * (m_ + 1);
}

Eigen::VectorXd DenseFractionalOracle::to_interior(const Eigen::VectorXd& nodal) const {
    if (nodal.size() != num_nodes()) {
        throw DomainError("DenseFractionalOracle: nodal vector size mismatch");
    }
    const int n = m_ - 1;
    Eigen::VectorXd out(vectors_.rows());
    for (Eigen::Index p = 0; p < out.size(); ++p) {
        const Eigen::Index i = p % n + 1;
        const Eigen::Index j = dim_ == 1 ? 0 : p / n + 1;
        out(p) = nodal(i + (m_ + 1) * j);
    }
    return out;
}

Eigen::VectorXd DenseFractionalOracle::to_nodal(const Eigen::VectorXd& interior) const {
    const int n = m_ - 1;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(num_nodes());
    for (Eigen::Index p = 0; p < interior.size(); ++p) {
        const Eigen::Index i = p % n + 1;
        const Eigen::Index j = dim_ == 1 ? 0 : p / n + 1;
        out(i + (m_ + 1) * j) = interior(p);
    }
    return out;
}

Eigen::VectorXd DenseFractionalOracle::solve(const Eigen::VectorXd& f, double s) const {
    if (!(s >= 0.0)) {
        throw DomainError("DenseFractionalOracle::solve: s must be nonnegative");
    }
    const Eigen::VectorXd c = vectors_.transpose() * to_interior(f);
    const Eigen::VectorXd scaled = c.array() * lambda_.array().pow(-s);
    return to_nodal(vectors_ * scaled);
}

Eigen::VectorXd DenseFractionalOracle::sample(const PointFunction& fn) const {
    Eigen::VectorXd out(num_nodes());
    for (Eigen::Index p = 0; p < out.size(); ++p) {
        const double x1 = static_cast<double>(p % (m_ + 1)) / m_;
        const double x2 = static_cast<double>(p / (m_ + 1)) / m_;
        out(p) = fn(dim_ == 1 ? make_point(x1) : make_point(x1, x2));
    }
    return out;
}

double DenseFractionalOracle::inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return std::pow(1.0 / m_, dim_) * a.dot(b);
}

ReducedValues singlemode_reduced(double s, double lambda, double s_bar, const Regularizer& reg) {
    // u(s) = g phi with g = lambda^(s_bar - s); u - u_d = (g - 1) phi
    const double ln = std::log(lambda);
    const double g = std::pow(lambda, s_bar - s);
    ReducedValues out;
    out.f = 0.5 * (g - 1.0) * (g - 1.0) + reg.value(s);
    out.df = -ln * g * (g - 1.0) + reg.d1(s);
    out.d2f = ln * ln * g * (2.0 * g - 1.0) + reg.d2(s);
    return out;
}

} // namespace fracid
