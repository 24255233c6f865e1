#pragma once

// Reference assembly of the weighted cylinder operator by a loop over cells,
// with y-integrals from Boost tanh-sinh quadrature. Independent of the
// Kronecker-product and closed-form element code in the library.

#include "fracid/extension_fem.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace fracid::testing {

struct YIntegrals {
    Eigen::Matrix2d mass;
    Eigen::Matrix2d stiffness;
};

inline YIntegrals weighted_y_integrals(double y0, double y1, double alpha) {
    // Integrate in the local coordinate t in [0, 1] so that short intervals
    // far from y = 0 keep full relative accuracy.
    boost::math::quadrature::tanh_sinh<double> rule;
    const double h = y1 - y0;
    const auto weight = [=](double t) { return std::pow(y0 + h * t, alpha) * h; };
    const std::array<std::function<double(double)>, 2> shape = {[](double t) { return 1.0 - t; },
                                                                [](double t) { return t; }};
    const std::array<double, 2> slope = {-1.0 / h, 1.0 / h};
    YIntegrals out;
    const double weight_integral = rule.integrate(weight, 0.0, 1.0);
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            out.mass(a, b) =
                rule.integrate([&](double t) { return weight(t) * shape[a](t) * shape[b](t); }, 0.0, 1.0);
            out.stiffness(a, b) = slope[a] * slope[b] * weight_integral;
        }
    }
    return out;
}

/// Q1 element matrices on a square/segment of side h from 2-point Gauss
/// (exact for the bilinear products). Local node a has bits (a & 1, a >> 1).
inline void omega_element(int dim, double h, Eigen::MatrixXd& K, Eigen::MatrixXd& M) {
    const int n = dim == 1 ? 2 : 4;
    K = Eigen::MatrixXd::Zero(n, n);
    M = Eigen::MatrixXd::Zero(n, n);
    const double g[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
    const auto val = [](int bit, double t) { return bit ? t : 1.0 - t; };
    const auto der = [](int bit) { return bit ? 1.0 : -1.0; };
    for (int qx = 0; qx < 2; ++qx) {
        for (int qy = 0; qy < (dim == 1 ? 1 : 2); ++qy) {
            const double w = dim == 1 ? 0.5 * h : 0.25 * h * h;
            const double tx = g[qx];
            const double ty = g[qy];
            for (int a = 0; a < n; ++a) {
                for (int b = 0; b < n; ++b) {
                    const int ax = a & 1, ay = a >> 1, bx = b & 1, by = b >> 1;
                    if (dim == 1) {
                        M(a, b) += w * val(ax, tx) * val(bx, tx);
                        K(a, b) += w * der(ax) * der(bx) / (h * h);
                    } else {
                        M(a, b) += w * val(ax, tx) * val(ay, ty) * val(bx, tx) * val(by, ty);
                        const double gxa = der(ax) / h * val(ay, ty);
                        const double gya = val(ax, tx) * der(ay) / h;
                        const double gxb = der(bx) / h * val(by, ty);
                        const double gyb = val(bx, tx) * der(by) / h;
                        K(a, b) += w * (gxa * gxb + gya * gyb);
                    }
                }
            }
        }
    }
}

/// Dense operator over the free dofs of `space`, assembled cell by cell.
inline Eigen::MatrixXd cell_loop_operator(const FESpace& space, double alpha) {
    const CylinderMesh& mesh = space.mesh();
    const int dim = mesh.omega.dim();
    const int m = mesh.omega.cells_per_axis();
    const Eigen::Index n_omega = mesh.omega.num_nodes();
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(mesh.num_nodes(), mesh.num_nodes());
    Eigen::MatrixXd Kx, Mx;
    omega_element(dim, mesh.omega.h(), Kx, Mx);
    const int nx = static_cast<int>(Kx.rows());
    for (int j = 0; j < mesh.y.M; ++j) {
        const YIntegrals yi = weighted_y_integrals(mesh.y.nodes(j), mesh.y.nodes(j + 1), alpha);
        for (int cy = 0; cy < (dim == 1 ? 1 : m); ++cy) {
            for (int cx = 0; cx < m; ++cx) {
                std::vector<Eigen::Index> omega_nodes(static_cast<std::size_t>(nx));
                for (int a = 0; a < nx; ++a) {
                    const int ix = cx + (a & 1);
                    const int iy = cy + (a >> 1);
                    omega_nodes[static_cast<std::size_t>(a)] = dim == 1 ? ix : ix + static_cast<Eigen::Index>(m + 1) * iy;
                }
                for (int ya = 0; ya < 2; ++ya) {
                    for (int yb = 0; yb < 2; ++yb) {
                        for (int a = 0; a < nx; ++a) {
                            for (int b = 0; b < nx; ++b) {
                                const Eigen::Index row = omega_nodes[static_cast<std::size_t>(a)] + (j + ya) * n_omega;
                                const Eigen::Index col = omega_nodes[static_cast<std::size_t>(b)] + (j + yb) * n_omega;
                                full(row, col) += Kx(a, b) * yi.mass(ya, yb) + Mx(a, b) * yi.stiffness(ya, yb);
                            }
                        }
                    }
                }
            }
        }
    }
    const Eigen::Index nf = space.num_free();
    Eigen::MatrixXd out(nf, nf);
    for (Eigen::Index p = 0; p < nf; ++p) {
        for (Eigen::Index q = 0; q < nf; ++q) {
            out(p, q) = full(space.free_to_node(p), space.free_to_node(q));
        }
    }
    return out;
}

} // namespace fracid::testing
