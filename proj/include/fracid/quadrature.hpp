#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace fracid {

/// One-dimensional quadrature rule: nodes and weights on a reference interval.
template <typename Scalar>
struct QuadratureRule {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> nodes;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;

    [[nodiscard]] Eigen::Index size() const { return nodes.size(); }
};

/// n-point Gauss-Legendre rule on [0,1]; exact for polynomials of degree 2n-1.
template <typename Scalar = double>
QuadratureRule<Scalar> gauss_legendre(int n) {
    if (n < 1) {
        throw std::invalid_argument("gauss_legendre: n must be >= 1");
    }
    QuadratureRule<Scalar> rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const Scalar pi = std::numbers::pi_v<Scalar>;
    // Returns (P_n(x), P_n'(x)) by the three-term recurrence.
    const auto legendre = [n](Scalar x) {
        Scalar p0 = 1;
        Scalar p1 = x;
        for (int k = 2; k <= n; ++k) {
            const Scalar p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        return std::pair<Scalar, Scalar>{p1, n * (x * p1 - p0) / (x * x - 1)};
    };
    for (int i = 0; i < (n + 1) / 2; ++i) {
        Scalar x = std::cos(pi * (Scalar(i) + Scalar(0.75)) / (Scalar(n) + Scalar(0.5)));
        for (int it = 0; it < 100; ++it) {
            const auto [p, dp] = legendre(x);
            const Scalar dx = p / dp;
            x -= dx;
            if (std::abs(dx) < Scalar(1e-16)) {
                break;
            }
        }
        const Scalar dp = legendre(x).second;
        const Scalar w = 2 / ((1 - x * x) * dp * dp);
        // Map from [-1,1] to [0,1].
        rule.nodes(i) = (1 - x) / 2;
        rule.nodes(n - 1 - i) = (1 + x) / 2;
        rule.weights(i) = w / 2;
        rule.weights(n - 1 - i) = w / 2;
    }
    return rule;
}

/// n-point Gauss-Jacobi rule on [0,1] for the weight t^beta (beta > -1),
/// built with the Golub-Welsch eigenvalue method.
template <typename Scalar = double>
QuadratureRule<Scalar> gauss_jacobi_left(int n, Scalar beta) {
    if (n < 1 || !(beta > Scalar(-1))) {
        throw std::invalid_argument("gauss_jacobi_left: need n >= 1 and beta > -1");
    }
    // Jacobi weight (1-x)^a (1+x)^b on [-1,1] with a = 0, b = beta.
    const Scalar a = 0;
    const Scalar b = beta;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Mat jac = Mat::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        const Scalar t = 2 * k + a + b;
        if (k == 0) {
            jac(0, 0) = (b - a) / (a + b + 2);
        } else {
            jac(k, k) = (b * b - a * a) / (t * (t + 2));
        }
        if (k + 1 < n) {
            const Scalar kk = k + 1;
            const Scalar tt = 2 * kk + a + b;
            const Scalar num = 4 * kk * (kk + a) * (kk + b) * (kk + a + b);
            const Scalar den = tt * tt * (tt + 1) * (tt - 1);
            jac(k, k + 1) = jac(k + 1, k) = std::sqrt(num / den);
        }
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(jac);
    const Scalar mu0 = std::pow(Scalar(2), a + b + 1) * std::tgamma(a + 1) * std::tgamma(b + 1) /
                       std::tgamma(a + b + 2);
    QuadratureRule<Scalar> rule;
    rule.nodes = (eig.eigenvalues().array() + 1) / 2;
    rule.weights = mu0 * eig.eigenvectors().row(0).transpose().array().square();
    // Map weight (1+x)^b dx on [-1,1] to t^b dt on [0,1]: factor 2^-(b+1).
    rule.weights *= std::pow(Scalar(2), -(b + 1));
    return rule;
}

} // namespace fracid
