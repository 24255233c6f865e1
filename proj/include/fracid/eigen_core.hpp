#pragma once

#include "fracid/common.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace fracid {

/// The unit box (0,1)^dim with dim in {1, 2}.
class BoxDomain {
public:
    explicit BoxDomain(int dim);

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] bool contains_closure(const Point& x) const;

private:
    int dim_;
};

/// Multi-index (k) or (k, l) of a Dirichlet sine mode; every entry >= 1.
struct ModeIndex {
    std::array<int, 2> k{1, 1};
    int dim = 1;

    [[nodiscard]] int sum_of_squares() const;
    friend bool operator==(const ModeIndex&, const ModeIndex&) = default;
    friend bool operator<(const ModeIndex& a, const ModeIndex& b);
};

/// Analytic Dirichlet eigenpair of -Laplace on the unit box.
/// The eigenfunction is norm_factor * prod_i sin(k_i pi x_i), unit in L2.
struct EigenPair {
    ModeIndex mode;
    double lambda = 0.0;
    double norm_factor = 1.0;
};

[[nodiscard]] EigenPair make_eigenpair(const ModeIndex& mode);

/// Truncated expansion sum_k coeffs[k] phi_k in an ordered eigenbasis.
struct SpectralCoeffs {
    std::vector<EigenPair> basis;
    Eigen::VectorXd coeffs;

    SpectralCoeffs() = default;
    SpectralCoeffs(std::vector<EigenPair> b, Eigen::VectorXd c);

    [[nodiscard]] Eigen::Index size() const { return coeffs.size(); }
    [[nodiscard]] int dim() const { return basis.empty() ? 0 : basis.front().mode.dim; }
    /// Eigenvalues of the basis as a vector, in basis order.
    [[nodiscard]] Eigen::VectorXd lambdas() const;
    [[nodiscard]] SpectralCoeffs with_coeffs(Eigen::VectorXd c) const;
};

/// The N eigenpairs of smallest eigenvalue, ascending, ties broken
/// lexicographically on the mode indices.
[[nodiscard]] std::vector<EigenPair> enumerate_modes(const BoxDomain& domain, int count);

/// Default truncation: 32^dim modes.
[[nodiscard]] int default_mode_count(int dim);

[[nodiscard]] double eigenfunction_eval(const EigenPair& pair, const Point& x);

/// L2 projection coefficients (fn, phi_k) by tensor Gauss-Legendre quadrature
/// with quad_order points per cell on a uniform grid of 2 * k_max cells per axis.
[[nodiscard]] SpectralCoeffs project(const PointFunction& fn, const std::vector<EigenPair>& basis,
                                     int quad_order = 4);

[[nodiscard]] double synthesize(const SpectralCoeffs& c, const Point& x);

/// Wraps a coefficient vector as a point function.
[[nodiscard]] PointFunction as_point_function(SpectralCoeffs c);

/// (-1)^m ln(lambda)^m lambda^(-s): the m-th s-derivative of lambda^(-s).
template <typename Scalar>
Scalar e_lambda_deriv(Scalar lambda, Scalar s, int m) {
    if (!(lambda > Scalar(0))) {
        throw DomainError("e_lambda_deriv: lambda must be positive");
    }
    if (!(s > Scalar(0) && s < Scalar(1))) {
        throw DomainError("e_lambda_deriv: s must lie in (0,1)");
    }
    if (m < 0 || m > 3) {
        throw UnsupportedOrderError("e_lambda_deriv: order must be in 0..3");
    }
    using std::log;
    using std::pow;
    const Scalar ln = log(lambda);
    Scalar factor = 1;
    for (int i = 0; i < m; ++i) {
        factor *= -ln;
    }
    return factor * pow(lambda, -s);
}

} // namespace fracid
