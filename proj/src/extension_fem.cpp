#include "fracid/extension_fem.hpp"

#include "fracid/quadrature.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <future>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>
#include <string>

namespace fracid {

namespace {

constexpr double kPi = std::numbers::pi;

using Triplet = Eigen::Triplet<double>;

// Interior index <-> (i, j) with 1-based grid indices along each axis.
Eigen::Index ipow(Eigen::Index base, int e) {
    Eigen::Index r = 1;
    for (int i = 0; i < e; ++i) {
        r *= base;
    }
    return r;
}

// Solves the symmetric tridiagonal system (diag, off) x = rhs in place.
void thomas_solve(const Eigen::VectorXd& diag, const Eigen::VectorXd& off, Eigen::Ref<Eigen::VectorXd> x) {
    const Eigen::Index n = diag.size();
    Eigen::VectorXd c(n);
    double denom = diag(0);
    c(0) = n > 1 ? off(0) / denom : 0.0;
    x(0) /= denom;
    for (Eigen::Index i = 1; i < n; ++i) {
        denom = diag(i) - off(i - 1) * c(i - 1);
        if (i + 1 < n) {
            c(i) = off(i) / denom;
        }
        x(i) = (x(i) - off(i - 1) * x(i - 1)) / denom;
    }
    for (Eigen::Index i = n - 2; i >= 0; --i) {
        x(i) -= c(i) * x(i + 1);
    }
}

} // namespace

// ---------------------------------------------------------------------------
// Meshes

double GradedMesh1D::max_neighbor_ratio() const {
    double ratio = 0.0;
    for (int j = 0; j + 1 < M; ++j) {
        ratio = std::max(ratio, interval(j + 1) / interval(j));
    }
    return ratio;
}

double grading_ratio_bound(double gamma) {
    return std::pow(2.0, gamma) - 1.0;
}

GradedMesh1D graded_mesh(double Y, int M, double gamma) {
    if (!(Y > 0.0) || M < 2 || !(gamma >= 1.0)) {
        throw DomainError("graded_mesh: need Y > 0, M >= 2, gamma >= 1");
    }
    GradedMesh1D mesh;
    mesh.Y = Y;
    mesh.M = M;
    mesh.gamma = gamma;
    mesh.nodes.resize(M + 1);
    for (int j = 0; j <= M; ++j) {
        mesh.nodes(j) = std::pow(static_cast<double>(j) / M, gamma) * Y;
    }
    mesh.nodes(M) = Y;
    return mesh;
}

GradedMesh1D build_graded_mesh(double Y, int M, double a_lower) {
    if (!(Y >= 1.0) || M < 2 || !(a_lower > 0.0 && a_lower < 1.0)) {
        throw DomainError("build_graded_mesh: need Y >= 1, M >= 2, 0 < a_lower < 1");
    }
    return graded_mesh(Y, M, grading_exponent(a_lower));
}

double grading_exponent(double s) {
    if (!(s > 0.0 && s < 1.0)) {
        throw DomainError("grading_exponent: s must lie in (0,1)");
    }
    return 3.0 / (2.0 * s) + 0.1;
}

OmegaMesh::OmegaMesh(int dim, int cells_per_axis) : dim_(dim), m_(cells_per_axis) {
    if (dim != 1 && dim != 2) {
        throw DomainError("OmegaMesh: dim must be 1 or 2");
    }
    if (cells_per_axis < 2) {
        throw DomainError("OmegaMesh: need at least 2 cells per axis");
    }
}

Eigen::Index OmegaMesh::num_cells() const {
    return ipow(m_, dim_);
}

Eigen::Index OmegaMesh::num_nodes() const {
    return ipow(m_ + 1, dim_);
}

Eigen::Index OmegaMesh::num_interior() const {
    return ipow(m_ - 1, dim_);
}

bool OmegaMesh::is_boundary(Eigen::Index node) const {
    for (int d = 0; d < dim_; ++d) {
        const Eigen::Index i = node % (m_ + 1);
        if (i == 0 || i == m_) {
            return true;
        }
        node /= (m_ + 1);
    }
    return false;
}

Point OmegaMesh::node_coords(Eigen::Index node) const {
    Point p(dim_);
    for (int d = 0; d < dim_; ++d) {
        p(d) = static_cast<double>(node % (m_ + 1)) / m_;
        node /= (m_ + 1);
    }
    return p;
}

Eigen::Index OmegaMesh::interior_to_node(Eigen::Index interior) const {
    Eigen::Index node = 0;
    Eigen::Index stride = 1;
    for (int d = 0; d < dim_; ++d) {
        node += (interior % (m_ - 1) + 1) * stride;
        interior /= (m_ - 1);
        stride *= (m_ + 1);
    }
    return node;
}

FESpace::FESpace(CylinderMesh mesh) : mesh_(std::move(mesh)) {}

Eigen::Index FESpace::free_to_node(Eigen::Index free) const {
    const Eigen::Index layer = free / layer_size();
    const Eigen::Index interior = free % layer_size();
    return layer * mesh_.omega.num_nodes() + mesh_.omega.interior_to_node(interior);
}

std::vector<Eigen::Index> FESpace::trace_layer() const {
    std::vector<Eigen::Index> out(static_cast<std::size_t>(layer_size()));
    for (Eigen::Index i = 0; i < layer_size(); ++i) {
        out[static_cast<std::size_t>(i)] = i;
    }
    return out;
}

Eigen::VectorXd FESpace::expand(const Eigen::VectorXd& free_values) const {
    if (free_values.size() != num_free()) {
        throw DomainError("FESpace::expand: size mismatch");
    }
    Eigen::VectorXd full = Eigen::VectorXd::Zero(mesh_.num_nodes());
    for (Eigen::Index k = 0; k < num_free(); ++k) {
        full(free_to_node(k)) = free_values(k);
    }
    return full;
}

// ---------------------------------------------------------------------------
// Weighted 1-D element integrals

WeightedElement weighted_element(double y0, double y1, double alpha) {
    if (!(alpha > -1.0)) {
        throw DomainError("weighted_element: weight y^alpha is not integrable for alpha <= -1");
    }
    if (!(y0 >= 0.0 && y1 > y0)) {
        throw DomainError("weighted_element: need 0 <= y0 < y1");
    }
    const double h = y1 - y0;
    const double r = y0 / y1;
    const double delta = h / y1;
    const double ap1 = alpha + 1.0;
    const double scale = std::pow(y1, ap1);

    double m00 = 0.0;
    double m01 = 0.0;
    double m11 = 0.0;
    double k0 = 0.0; // int_r^1 t^alpha dt
    if (delta <= 0.5) {
        // u = 1 - t; (1-u)^alpha = sum_n c_n u^n, all Beta integrals positive.
        double c = 1.0;
        double dpow = delta; // delta^(n+1)
        for (int n = 0; n < 400; ++n) {
            const double t00 = c * dpow / (n + 3);
            const double t01 = c * dpow / ((n + 2.0) * (n + 3.0));
            const double t11 = 2.0 * c * dpow / ((n + 1.0) * (n + 2.0) * (n + 3.0));
            m00 += t00;
            m01 += t01;
            m11 += t11;
            if (n > 2 && std::abs(t00) <= 1e-18 * std::abs(m00) && std::abs(t11) <= 1e-18 * std::abs(m11)) {
                break;
            }
            c *= (n - alpha) / (n + 1.0);
            dpow *= delta;
        }
        k0 = -std::expm1(ap1 * std::log1p(-delta)) / ap1;
    } else {
        const auto antiderivatives = [alpha](double t) {
            if (t == 0.0) {
                return Eigen::Vector3d::Zero().eval();
            }
            Eigen::Vector3d a;
            for (int p = 0; p < 3; ++p) {
                a(p) = std::pow(t, alpha + p + 1) / (alpha + p + 1);
            }
            return a;
        };
        const Eigen::Vector3d a1 = antiderivatives(1.0);
        const Eigen::Vector3d ar = antiderivatives(r);
        const Eigen::Vector3d d = a1 - ar;
        m00 = (d(0) - 2.0 * d(1) + d(2)) / (delta * delta);
        m01 = (-d(2) + (1.0 + r) * d(1) - r * d(0)) / (delta * delta);
        m11 = (d(2) - 2.0 * r * d(1) + r * r * d(0)) / (delta * delta);
        k0 = r == 0.0 ? 1.0 / ap1 : -std::expm1(ap1 * std::log(r)) / ap1;
    }
    WeightedElement el;
    el.mass << m00, m01, m01, m11;
    el.mass *= scale;
    const double k = scale * k0 / (h * h);
    el.stiffness << k, -k, -k, k;
    return el;
}

Eigen::SparseMatrix<double> TridiagonalPair::mass() const {
    const Eigen::Index n = mass_diag.size();
    std::vector<Triplet> t;
    for (Eigen::Index i = 0; i < n; ++i) {
        t.emplace_back(i, i, mass_diag(i));
        if (i + 1 < n) {
            t.emplace_back(i, i + 1, mass_off(i));
            t.emplace_back(i + 1, i, mass_off(i));
        }
    }
    Eigen::SparseMatrix<double> out(n, n);
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

Eigen::SparseMatrix<double> TridiagonalPair::stiffness() const {
    const Eigen::Index n = stiff_diag.size();
    std::vector<Triplet> t;
    for (Eigen::Index i = 0; i < n; ++i) {
        t.emplace_back(i, i, stiff_diag(i));
        if (i + 1 < n) {
            t.emplace_back(i, i + 1, stiff_off(i));
            t.emplace_back(i + 1, i, stiff_off(i));
        }
    }
    Eigen::SparseMatrix<double> out(n, n);
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

TridiagonalPair weighted_y_matrices(const GradedMesh1D& y, double alpha) {
    const int M = y.M;
    TridiagonalPair out;
    // Full (M+1) assembly, then drop node M.
    Eigen::VectorXd md = Eigen::VectorXd::Zero(M + 1);
    Eigen::VectorXd mo = Eigen::VectorXd::Zero(M);
    Eigen::VectorXd sd = Eigen::VectorXd::Zero(M + 1);
    Eigen::VectorXd so = Eigen::VectorXd::Zero(M);
    for (int j = 0; j < M; ++j) {
        const WeightedElement el = weighted_element(y.nodes(j), y.nodes(j + 1), alpha);
        md(j) += el.mass(0, 0);
        md(j + 1) += el.mass(1, 1);
        mo(j) += el.mass(0, 1);
        sd(j) += el.stiffness(0, 0);
        sd(j + 1) += el.stiffness(1, 1);
        so(j) += el.stiffness(0, 1);
    }
    out.mass_diag = md.head(M);
    out.mass_off = mo.head(M - 1);
    out.stiff_diag = sd.head(M);
    out.stiff_off = so.head(M - 1);
    return out;
}

OmegaMatrices omega_matrices(const OmegaMesh& omega) {
    const int n = omega.cells_per_axis() - 1;
    const double h = omega.h();
    std::vector<Triplet> kt;
    std::vector<Triplet> mt;
    for (int i = 0; i < n; ++i) {
        kt.emplace_back(i, i, 2.0 / h);
        mt.emplace_back(i, i, 4.0 * h / 6.0);
        if (i + 1 < n) {
            kt.emplace_back(i, i + 1, -1.0 / h);
            kt.emplace_back(i + 1, i, -1.0 / h);
            mt.emplace_back(i, i + 1, h / 6.0);
            mt.emplace_back(i + 1, i, h / 6.0);
        }
    }
    Eigen::SparseMatrix<double> k1(n, n);
    Eigen::SparseMatrix<double> m1(n, n);
    k1.setFromTriplets(kt.begin(), kt.end());
    m1.setFromTriplets(mt.begin(), mt.end());
    OmegaMatrices out;
    if (omega.dim() == 1) {
        out.stiffness = k1;
        out.mass = m1;
    } else {
        // x_1 is the fast index: kron(B_{x2}, B_{x1}).
        Eigen::SparseMatrix<double> a = Eigen::kroneckerProduct(m1, k1);
        Eigen::SparseMatrix<double> b = Eigen::kroneckerProduct(k1, m1);
        out.stiffness = a + b;
        out.mass = Eigen::kroneckerProduct(m1, m1);
    }
    return out;
}

double d_s_constant(double s) {
    if (!(s > 0.0 && s < 1.0)) {
        throw DomainError("d_s_constant: s must lie in (0,1)");
    }
    return std::pow(2.0, 1.0 - 2.0 * s) * std::tgamma(1.0 - s) / std::tgamma(s);
}

SparseOperator assemble_stiffness(const CylinderMesh& mesh, const FESpace& space, double s) {
    const double alpha = 1.0 - 2.0 * s;
    if (!(alpha + 1.0 > 0.0)) {
        throw DomainError("assemble_stiffness: weight y^alpha not integrable (alpha <= -1)");
    }
    const OmegaMatrices om = omega_matrices(mesh.omega);
    const TridiagonalPair ym = weighted_y_matrices(mesh.y, alpha);
    // y is the slow index of the free-dof ordering.
    Eigen::SparseMatrix<double> a = Eigen::kroneckerProduct(ym.mass(), om.stiffness);
    Eigen::SparseMatrix<double> b = Eigen::kroneckerProduct(ym.stiffness(), om.mass);
    SparseOperator op;
    op.matrix = SparseMatrixRM(a + b);
    op.matrix.makeCompressed();
    op.layer_size = space.layer_size();
    op.num_layers = space.num_layers();
    return op;
}

Eigen::VectorXd omega_load_moments(const OmegaMesh& omega, const PointFunction& f, const std::optional<FieldNoise>& noise) {
    const auto rule = gauss_legendre(3);
    const int m = omega.cells_per_axis();
    const double h = omega.h();
    const int dim = omega.dim();
    Eigen::VectorXd moments = Eigen::VectorXd::Zero(omega.num_interior());

    std::mt19937_64 rng(noise ? noise->seed : 0);
    std::uniform_real_distribution<double> draw(noise ? -noise->amplitude : 0.0, noise ? noise->amplitude : 0.0);
    const auto perturbed = [&](const Point& x) {
        double v = f(x);
        if (noise && noise->amplitude > 0.0) {
            v += draw(rng);
        }
        if (!std::isfinite(v)) {
            throw EvaluationError("omega_load_moments: non-finite data value");
        }
        return v;
    };
    // interior index of grid node (i, j); -1 on the boundary
    const auto interior_index = [m](int i, int j) -> Eigen::Index {
        if (i <= 0 || i >= m || j <= 0 || j >= m) {
            return -1;
        }
        return (i - 1) + static_cast<Eigen::Index>(m - 1) * (j - 1);
    };

    if (dim == 1) {
        for (int c = 0; c < m; ++c) {
            for (int q = 0; q < 3; ++q) {
                const double t = rule.nodes(q);
                const double w = rule.weights(q) * h;
                const double v = perturbed(make_point((c + t) * h));
                if (c >= 1) {
                    moments(c - 1) += w * v * (1.0 - t);
                }
                if (c + 1 <= m - 1) {
                    moments(c) += w * v * t;
                }
            }
        }
        return moments;
    }
    for (int cy = 0; cy < m; ++cy) {
        for (int cx = 0; cx < m; ++cx) {
            for (int qy = 0; qy < 3; ++qy) {
                for (int qx = 0; qx < 3; ++qx) {
                    const double tx = rule.nodes(qx);
                    const double ty = rule.nodes(qy);
                    const double w = rule.weights(qx) * rule.weights(qy) * h * h;
                    const double v = w * perturbed(make_point((cx + tx) * h, (cy + ty) * h));
                    const double phi[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
                    const Eigen::Index idx[4] = {interior_index(cx, cy), interior_index(cx + 1, cy),
                                                 interior_index(cx, cy + 1), interior_index(cx + 1, cy + 1)};
                    for (int a = 0; a < 4; ++a) {
                        if (idx[a] >= 0) {
                            moments(idx[a]) += v * phi[a];
                        }
                    }
                }
            }
        }
    }
    return moments;
}

Eigen::VectorXd spectral_load_moments(const OmegaMesh& omega, const SpectralCoeffs& f) {
    if (f.dim() != omega.dim()) {
        throw DomainError("spectral_load_moments: data dimension does not match the mesh");
    }
    const int m = omega.cells_per_axis();
    const int n = m - 1;
    const double h = omega.h();
    // (sin(k pi x), hat_i) = sin(k pi x_i) * 2 (1 - cos(k pi h)) / ((k pi)^2 h)
    const auto axis_factors = [n, h](int k) {
        const double w = k * kPi;
        const double scale = 2.0 * (1.0 - std::cos(w * h)) / (w * w * h);
        Eigen::VectorXd g(n);
        for (int i = 0; i < n; ++i) {
            g(i) = scale * std::sin(w * (i + 1) * h);
        }
        return g;
    };
    Eigen::VectorXd moments = Eigen::VectorXd::Zero(omega.num_interior());
    for (Eigen::Index p = 0; p < f.size(); ++p) {
        const EigenPair& pair = f.basis[static_cast<std::size_t>(p)];
        const double c = f.coeffs(p) * pair.norm_factor;
        if (c == 0.0) {
            continue;
        }
        const Eigen::VectorXd gx = axis_factors(pair.mode.k[0]);
        if (omega.dim() == 1) {
            moments += c * gx;
        } else {
            const Eigen::VectorXd gy = axis_factors(pair.mode.k[1]);
            Eigen::Map<Eigen::MatrixXd> grid(moments.data(), n, n);
            grid.noalias() += c * gx * gy.transpose();
        }
    }
    return moments;
}

Eigen::VectorXd assemble_load_from_moments(const FESpace& space, const Eigen::VectorXd& moments, double s) {
    if (moments.size() != space.layer_size()) {
        throw DomainError("assemble_load: moment vector does not match the Omega mesh");
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(space.num_free());
    rhs.head(space.layer_size()) = d_s_constant(s) * moments;
    return rhs;
}

Eigen::VectorXd assemble_load(const FESpace& space, const PointFunction& f, double s) {
    return assemble_load_from_moments(space, omega_load_moments(space.mesh().omega, f), s);
}

// ---------------------------------------------------------------------------
// Solvers

SolverKind parse_solver_kind(const std::string& name) {
    if (name == "auto" || name == "automatic") {
        return SolverKind::automatic;
    }
    if (name == "tensor") {
        return SolverKind::tensor;
    }
    if (name == "direct") {
        return SolverKind::direct;
    }
    if (name == "cg") {
        return SolverKind::cg;
    }
    throw ConfigError("unknown solver '" + name + "'");
}

std::string to_string(SolverKind kind) {
    switch (kind) {
    case SolverKind::automatic:
        return "auto";
    case SolverKind::tensor:
        return "tensor";
    case SolverKind::direct:
        return "direct";
    case SolverKind::cg:
        return "cg";
    }
    return "auto";
}

Eigen::VectorXd solve_free(const SparseOperator& op, const Eigen::VectorXd& rhs, const SolverConfig& config) {
    if (rhs.size() != op.rows()) {
        throw SolverError("solve_free: right-hand side size mismatch");
    }
    if (rhs.isZero(0.0)) {
        return Eigen::VectorXd::Zero(rhs.size());
    }
    if (config.kind == SolverKind::cg) {
        Eigen::ConjugateGradient<SparseMatrixRM, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
        cg.setTolerance(config.rel_tol);
        cg.setMaxIterations(config.max_iter);
        cg.compute(op.matrix);
        Eigen::VectorXd x = cg.solve(rhs);
        const double rel = (op.matrix * x - rhs).norm() / rhs.norm();
        if (cg.info() != Eigen::Success || !(rel <= 10.0 * config.rel_tol)) {
            throw SolverError("conjugate gradients did not converge: relative residual " + std::to_string(rel) +
                              " after " + std::to_string(cg.iterations()) + " iterations");
        }
        return x;
    }
    // direct (tensor and automatic route here when only the operator is known)
    const Eigen::SparseMatrix<double> colmajor(op.matrix);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(colmajor);
    if (ldlt.info() != Eigen::Success) {
        throw SolverError("sparse LDL^T factorization failed");
    }
    Eigen::VectorXd x = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !x.allFinite()) {
        throw SolverError("sparse LDL^T solve failed");
    }
    return x;
}

Eigen::VectorXd solve_tensor(const FESpace& space, double s, const Eigen::VectorXd& rhs) {
    const CylinderMesh& mesh = space.mesh();
    const int dim = mesh.omega.dim();
    const int m = mesh.omega.cells_per_axis();
    const int n = m - 1;
    const int layers = space.num_layers();
    const Eigen::Index ls = space.layer_size();
    if (rhs.size() != space.num_free()) {
        throw SolverError("solve_tensor: right-hand side size mismatch");
    }
    const double alpha = 1.0 - 2.0 * s;
    if (!(alpha + 1.0 > 0.0)) {
        throw DomainError("solve_tensor: weight y^alpha not integrable");
    }
    const TridiagonalPair ym = weighted_y_matrices(mesh.y, alpha);

    // Discrete sines diagonalize the uniform 1-D Q1 stiffness and mass.
    const double h = mesh.omega.h();
    Eigen::MatrixXd sines(n, n);
    Eigen::VectorXd kappa(n);
    Eigen::VectorXd mu(n);
    for (int k = 0; k < n; ++k) {
        const double theta = (k + 1) * kPi * h;
        kappa(k) = 2.0 / h * (1.0 - std::cos(theta));
        mu(k) = h / 3.0 * (2.0 + std::cos(theta));
        for (int i = 0; i < n; ++i) {
            sines(i, k) = std::sin((k + 1) * kPi * (i + 1) * h);
        }
    }
    const double inv_norm = 2.0 / m; // 1 / ||v_k||^2

    // Modal right-hand sides, one row per Omega mode, one column per layer.
    Eigen::MatrixXd modal(ls, layers);
    for (int l = 0; l < layers; ++l) {
        const auto block = rhs.segment(static_cast<Eigen::Index>(l) * ls, ls);
        if (dim == 1) {
            modal.col(l) = inv_norm * (sines.transpose() * block);
        } else {
            const Eigen::Map<const Eigen::MatrixXd> grid(block.data(), n, n);
            const Eigen::MatrixXd c = inv_norm * inv_norm * (sines.transpose() * grid * sines);
            modal.col(l) = Eigen::Map<const Eigen::VectorXd>(c.data(), ls);
        }
    }
    Eigen::VectorXd diag(layers);
    Eigen::VectorXd off(std::max(layers - 1, 0));
    for (Eigen::Index mode = 0; mode < ls; ++mode) {
        double stiff_factor = 0.0; // eigenvalue of A_Omega
        double mass_factor = 0.0;  // eigenvalue of M_Omega
        if (dim == 1) {
            stiff_factor = kappa(mode);
            mass_factor = mu(mode);
        } else {
            const Eigen::Index k = mode % n;
            const Eigen::Index l = mode / n;
            stiff_factor = kappa(k) * mu(l) + mu(k) * kappa(l);
            mass_factor = mu(k) * mu(l);
        }
        diag = stiff_factor * ym.mass_diag + mass_factor * ym.stiff_diag;
        off = stiff_factor * ym.mass_off + mass_factor * ym.stiff_off;
        Eigen::VectorXd x = modal.row(mode).transpose();
        thomas_solve(diag, off, x);
        modal.row(mode) = x.transpose();
    }
    Eigen::VectorXd out(space.num_free());
    for (int l = 0; l < layers; ++l) {
        if (dim == 1) {
            out.segment(static_cast<Eigen::Index>(l) * ls, ls) = sines * modal.col(l);
        } else {
            const Eigen::VectorXd col = modal.col(l);
            const Eigen::Map<const Eigen::MatrixXd> c(col.data(), n, n);
            const Eigen::MatrixXd grid = sines * c * sines.transpose();
            out.segment(static_cast<Eigen::Index>(l) * ls, ls) = Eigen::Map<const Eigen::VectorXd>(grid.data(), ls);
        }
    }
    return out;
}

Eigen::VectorXd solve_extension(const CylinderMesh& mesh, const FESpace& space, const PointFunction& f, double s,
                                const SolverConfig& config) {
    const Eigen::VectorXd rhs = assemble_load(space, f, s);
    Eigen::VectorXd free;
    if (config.kind == SolverKind::automatic || config.kind == SolverKind::tensor) {
        free = solve_tensor(space, s, rhs);
    } else {
        free = solve_free(assemble_stiffness(mesh, space, s), rhs, config);
    }
    return space.expand(free);
}

Eigen::VectorXd trace(const Eigen::VectorXd& full, const FESpace& space) {
    const Eigen::Index n = space.mesh().omega.num_nodes();
    if (full.size() != space.mesh().num_nodes()) {
        throw DomainError("trace: nodal vector does not match the cylinder mesh");
    }
    return full.head(n);
}

double choose_truncation(Eigen::Index num_omega_cells, std::optional<double> override_Y) {
    if (override_Y) {
        if (!(*override_Y > 0.0)) {
            throw ConfigError("choose_truncation: Y override must be positive");
        }
        return *override_Y;
    }
    const double n = static_cast<double>(std::max<Eigen::Index>(num_omega_cells, 1));
    return std::max(1.0, 1.0 + std::log(n) / 3.0);
}

// ---------------------------------------------------------------------------
// Quadrature on Omega

OmegaQuadrature::OmegaQuadrature(const OmegaMesh& omega, int points_per_axis) : omega_(omega) {
    const auto rule = gauss_legendre(points_per_axis);
    const int m = omega.cells_per_axis();
    const int q = points_per_axis;
    const double h = omega.h();
    const int dim = omega.dim();
    const Eigen::Index per_cell = dim == 1 ? q : q * q;
    const Eigen::Index total = omega.num_cells() * per_cell;
    weights_.resize(total);
    points_.reserve(static_cast<std::size_t>(total));
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(total) * (dim == 1 ? 2 : 4));
    Eigen::Index row = 0;
    if (dim == 1) {
        for (int c = 0; c < m; ++c) {
            for (int a = 0; a < q; ++a) {
                const double x = rule.nodes(a);
                weights_(row) = rule.weights(a) * h;
                points_.push_back(make_point((c + x) * h));
                t.emplace_back(row, c, 1.0 - x);
                t.emplace_back(row, c + 1, x);
                ++row;
            }
        }
    } else {
        const Eigen::Index stride = m + 1;
        for (int cy = 0; cy < m; ++cy) {
            for (int cx = 0; cx < m; ++cx) {
                const Eigen::Index n00 = cx + stride * cy;
                for (int b = 0; b < q; ++b) {
                    for (int a = 0; a < q; ++a) {
                        const double tx = rule.nodes(a);
                        const double ty = rule.nodes(b);
                        weights_(row) = rule.weights(a) * rule.weights(b) * h * h;
                        points_.push_back(make_point((cx + tx) * h, (cy + ty) * h));
                        t.emplace_back(row, n00, (1 - tx) * (1 - ty));
                        t.emplace_back(row, n00 + 1, tx * (1 - ty));
                        t.emplace_back(row, n00 + stride, (1 - tx) * ty);
                        t.emplace_back(row, n00 + stride + 1, tx * ty);
                        ++row;
                    }
                }
            }
        }
    }
    interp_.resize(total, omega.num_nodes());
    interp_.setFromTriplets(t.begin(), t.end());
}

Eigen::VectorXd OmegaQuadrature::interpolate(const Eigen::VectorXd& nodal) const {
    if (nodal.size() != interp_.cols()) {
        throw DomainError("OmegaQuadrature::interpolate: nodal vector size mismatch");
    }
    return interp_ * nodal;
}

Eigen::VectorXd OmegaQuadrature::sample(const PointFunction& fn) const {
    Eigen::VectorXd out(size());
    for (Eigen::Index i = 0; i < size(); ++i) {
        out(i) = fn(points_[static_cast<std::size_t>(i)]);
    }
    if (!out.allFinite()) {
        throw EvaluationError("OmegaQuadrature::sample: non-finite value");
    }
    return out;
}

// ---------------------------------------------------------------------------
// FemStateProvider

GradingPolicy parse_grading_policy(const std::string& name) {
    if (name == "fixed") {
        return GradingPolicy::fixed;
    }
    if (name == "per_order" || name == "per-order") {
        return GradingPolicy::per_order;
    }
    throw ConfigError("unknown grading policy '" + name + "'");
}

std::string to_string(GradingPolicy policy) {
    return policy == GradingPolicy::fixed ? "fixed" : "per_order";
}

FemStateProvider::FemStateProvider(FemConfig config, const PointFunction& f, const std::optional<FieldNoise>& noise)
    : config_(std::move(config)),
      omega_(config_.dim, config_.omega_cells),
      Y_(choose_truncation(omega_.num_cells(), config_.Y)),
      moments_(omega_load_moments(omega_, f, noise)),
      quad_(omega_, config_.tracking_points) {
    if (config_.y_intervals < 2) {
        throw ConfigError("FemStateProvider: need at least 2 y-intervals");
    }
    if (config_.grading == GradingPolicy::fixed && !(config_.a_lower > 0.0 && config_.a_lower < 1.0)) {
        throw ConfigError("FemStateProvider: a_lower must lie in (0,1)");
    }
}

FemStateProvider::FemStateProvider(FemConfig config, const SpectralCoeffs& f)
    : config_(std::move(config)),
      omega_(config_.dim, config_.omega_cells),
      Y_(choose_truncation(omega_.num_cells(), config_.Y)),
      moments_(spectral_load_moments(omega_, f)),
      quad_(omega_, config_.tracking_points) {
    if (config_.y_intervals < 2) {
        throw ConfigError("FemStateProvider: need at least 2 y-intervals");
    }
}

Interval FemStateProvider::admissible() const {
    if (config_.grading == GradingPolicy::fixed) {
        return {config_.a_lower, 1.0};
    }
    return {0.0, 1.0};
}

CylinderMesh FemStateProvider::mesh_for(double s) const {
    const double gamma =
        config_.grading == GradingPolicy::fixed ? grading_exponent(config_.a_lower) : grading_exponent(s);
    return CylinderMesh{omega_, graded_mesh(Y_, config_.y_intervals, gamma)};
}

Eigen::VectorXd FemStateProvider::compute(double s) const {
    if (!admissible().contains(s)) {
        throw DomainError("FemStateProvider: order " + std::to_string(s) + " outside the admissible interval");
    }
    const CylinderMesh mesh = mesh_for(s);
    const FESpace space(mesh);
    const Eigen::VectorXd rhs = assemble_load_from_moments(space, moments_, s);
    Eigen::VectorXd free;
    if (config_.solver.kind == SolverKind::automatic || config_.solver.kind == SolverKind::tensor) {
        free = solve_tensor(space, s, rhs);
    } else {
        free = solve_free(assemble_stiffness(mesh, space, s), rhs, config_.solver);
    }
    // Trace layer: interior Omega nodes of layer 0, scattered with zero boundary.
    Eigen::VectorXd nodal = Eigen::VectorXd::Zero(omega_.num_nodes());
    for (Eigen::Index i = 0; i < space.layer_size(); ++i) {
        nodal(omega_.interior_to_node(i)) = free(i);
    }
    return nodal;
}

Eigen::VectorXd FemStateProvider::state(double s) const {
    {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(s); it != cache_.end()) {
            return it->second;
        }
    }
    Eigen::VectorXd value = compute(s);
    std::lock_guard lock(mutex_);
    ++solves_;
    return cache_.emplace(s, std::move(value)).first->second;
}

void FemStateProvider::prefetch(const std::vector<double>& orders, int threads) const {
    if (threads <= 1) {
        for (double s : orders) {
            (void)state(s);
        }
        return;
    }
    std::vector<std::future<Eigen::VectorXd>> jobs;
    jobs.reserve(orders.size());
    for (double s : orders) {
        jobs.push_back(std::async(std::launch::async, [this, s] { return state(s); }));
    }
    for (auto& job : jobs) {
        job.get();
    }
}

std::size_t FemStateProvider::solve_count() const {
    std::lock_guard lock(mutex_);
    return solves_;
}

DiscreteTarget FemStateProvider::represent(const Field& target) const {
    DiscreteTarget out;
    if (const auto* coeffs = std::get_if<SpectralCoeffs>(&target)) {
        out.values = quad_.sample(as_point_function(*coeffs));
    } else {
        out.values = quad_.sample(std::get<PointFunction>(target));
    }
    return out;
}

double FemStateProvider::inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return (quad_.weights().array() * quad_.interpolate(a).array() * quad_.interpolate(b).array()).sum();
}

double FemStateProvider::residual_inner(const Eigen::VectorXd& u, const DiscreteTarget& ud,
                                        const Eigen::VectorXd& v) const {
    const Eigen::VectorXd uq = quad_.interpolate(u);
    const Eigen::VectorXd vq = quad_.interpolate(v);
    return (quad_.weights().array() * (uq - ud.values).array() * vq.array()).sum();
}

double FemStateProvider::residual_norm2(const Eigen::VectorXd& u, const DiscreteTarget& ud) const {
    const Eigen::VectorXd uq = quad_.interpolate(u);
    return (quad_.weights().array() * (uq - ud.values).array().square()).sum() + ud.orthogonal_mass2;
}

// ---------------------------------------------------------------------------
// Snapshots

void write_snapshot(std::ostream& out, const CylinderMesh& mesh, double s, const Eigen::VectorXd& full) {
    if (full.size() != mesh.num_nodes()) {
        throw DomainError("write_snapshot: nodal vector does not match the mesh");
    }
    out << std::setprecision(17);
    out << "fracid-snapshot 1\n";
    out << "dim " << mesh.omega.dim() << '\n';
    out << "omega_cells " << mesh.omega.cells_per_axis() << '\n';
    out << "y_intervals " << mesh.y.M << '\n';
    out << "truncation " << mesh.y.Y << '\n';
    out << "gamma " << mesh.y.gamma << '\n';
    out << "order " << s << '\n';
    out << "y_nodes " << mesh.y.nodes.size() << '\n';
    for (Eigen::Index j = 0; j < mesh.y.nodes.size(); ++j) {
        out << mesh.y.nodes(j) << '\n';
    }
    out << "values " << full.size() << '\n';
    for (Eigen::Index i = 0; i < full.size(); ++i) {
        out << full(i) << '\n';
    }
}

} // namespace fracid
