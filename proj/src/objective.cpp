#include "fracid/objective.hpp"

#include "fracid/quadrature.hpp"
#include "fracid/state_map.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace fracid {

namespace {

void require_regularizer_domain(double s, const Regularizer& reg, const char* where) {
    if (!reg.in_domain(s) || !(s > 0.0 && s < 1.0)) {
        throw DomainError(std::string(where) + ": s = " + std::to_string(s) + " outside (" +
                          std::to_string(reg.a) + ", " + std::to_string(reg.b) + ")");
    }
}

// Tensor Gauss-Legendre estimate of ||fn||^2 on the unit box.
double squared_norm(const PointFunction& fn, int dim, int cells, int order) {
    const auto rule = gauss_legendre(order);
    const double h = 1.0 / cells;
    const Eigen::Index n = static_cast<Eigen::Index>(cells) * order;
    Eigen::VectorXd xs(n);
    Eigen::VectorXd ws(n);
    for (int c = 0; c < cells; ++c) {
        for (int q = 0; q < order; ++q) {
            xs(c * order + q) = (c + rule.nodes(q)) * h;
            ws(c * order + q) = rule.weights(q) * h;
        }
    }
    double total = 0.0;
    if (dim == 1) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = fn(make_point(xs(i)));
            total += ws(i) * v * v;
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                const double v = fn(make_point(xs(i), xs(j)));
                total += ws(i) * ws(j) * v * v;
            }
        }
    }
    return total;
}

} // namespace

SpectralStateProvider::SpectralStateProvider(SpectralCoeffs f) : f_(std::move(f)) {
    if (f_.basis.empty()) {
        throw EmptyBasisError("SpectralStateProvider: empty basis");
    }
}

Eigen::VectorXd SpectralStateProvider::state(double s) const {
    return solve_state(f_, s).u.coeffs;
}

DiscreteTarget SpectralStateProvider::represent(const Field& target) const {
    return spectral_target(target, f_.basis);
}

double SpectralStateProvider::inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return a.dot(b);
}

double SpectralStateProvider::residual_inner(const Eigen::VectorXd& u, const DiscreteTarget& ud,
                                             const Eigen::VectorXd& v) const {
    return (u - ud.values).dot(v);
}

double SpectralStateProvider::residual_norm2(const Eigen::VectorXd& u, const DiscreteTarget& ud) const {
    return (u - ud.values).squaredNorm() + ud.orthogonal_mass2;
}

DiscreteTarget spectral_target(const Field& target, const std::vector<EigenPair>& basis) {
    if (basis.empty()) {
        throw EmptyBasisError("spectral_target: empty basis");
    }
    DiscreteTarget out;
    if (const auto* coeffs = std::get_if<SpectralCoeffs>(&target)) {
        std::map<ModeIndex, double> lookup;
        for (std::size_t i = 0; i < coeffs->basis.size(); ++i) {
            lookup[coeffs->basis[i].mode] += coeffs->coeffs(static_cast<Eigen::Index>(i));
        }
        out.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));
        for (std::size_t i = 0; i < basis.size(); ++i) {
            auto it = lookup.find(basis[i].mode);
            if (it != lookup.end()) {
                out.values(static_cast<Eigen::Index>(i)) = it->second;
                lookup.erase(it);
            }
        }
        for (const auto& [mode, c] : lookup) {
            out.orthogonal_mass2 += c * c;
        }
        return out;
    }
    const auto& fn = std::get<PointFunction>(target);
    const SpectralCoeffs projected = project(fn, basis);
    out.values = projected.coeffs;
    int kmax = 1;
    for (const auto& pair : basis) {
        kmax = std::max({kmax, pair.mode.k[0], pair.mode.dim == 2 ? pair.mode.k[1] : 1});
    }
    const double total = squared_norm(fn, basis.front().mode.dim, 2 * kmax, 4);
    out.orthogonal_mass2 = std::max(0.0, total - out.values.squaredNorm());
    return out;
}

double cost(double s, const SpectralCoeffs& u, const SpectralCoeffs& u_d, const Regularizer& reg) {
    require_regularizer_domain(s, reg, "cost");
    const DiscreteTarget target = spectral_target(u_d, u.basis);
    const double tracking = (u.coeffs - target.values).squaredNorm() + target.orthogonal_mass2;
    return 0.5 * tracking + reg.value(s);
}

double reduced_value(double s, const StateProvider& provider, const DiscreteTarget& u_d, const Regularizer& reg) {
    require_regularizer_domain(s, reg, "reduced_value");
    const Eigen::VectorXd u = provider.state(s);
    return 0.5 * provider.residual_norm2(u, u_d) + reg.value(s);
}

double reduced_grad(double s, const SpectralCoeffs& f, const SpectralCoeffs& u_d, const Regularizer& reg) {
    require_regularizer_domain(s, reg, "reduced_grad");
    const DiscreteTarget target = spectral_target(u_d, f.basis);
    const Eigen::VectorXd u = solve_state(f, s).u.coeffs;
    const Eigen::VectorXd du = ds_state(f, s, 1).coeffs;
    return (u - target.values).dot(du) + reg.d1(s);
}

double reduced_hess(double s, const SpectralCoeffs& f, const SpectralCoeffs& u_d, const Regularizer& reg) {
    require_regularizer_domain(s, reg, "reduced_hess");
    const DiscreteTarget target = spectral_target(u_d, f.basis);
    const Eigen::VectorXd u = solve_state(f, s).u.coeffs;
    const Eigen::VectorXd du = ds_state(f, s, 1).coeffs;
    const Eigen::VectorXd d2u = ds_state(f, s, 2).coeffs;
    return du.squaredNorm() + (u - target.values).dot(d2u) + reg.d2(s);
}

Eigen::VectorXd centered_diff(const StateProvider& provider, double s, double sigma, Interval bounds) {
    if (!(sigma > 0.0)) {
        throw StepError("centered_diff: sigma must be positive");
    }
    const Interval own = provider.admissible();
    const double lo = std::max(bounds.lower, own.lower);
    const double hi = std::min(bounds.upper, own.upper);
    if (!(s - sigma > lo && s + sigma < hi)) {
        throw StepError("centered_diff: stencil [" + std::to_string(s - sigma) + ", " +
                        std::to_string(s + sigma) + "] leaves (" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "); shrink sigma");
    }
    return (provider.state(s + sigma) - provider.state(s - sigma)) / (2.0 * sigma);
}

double j_sigma(double s, const StateProvider& provider, const DiscreteTarget& u_d, const Regularizer& reg,
               double sigma) {
    require_regularizer_domain(s, reg, "j_sigma");
    const Eigen::VectorXd d = centered_diff(provider, s, sigma, Interval{reg.a, reg.b});
    const Eigen::VectorXd u = provider.state(s);
    return provider.residual_inner(u, u_d, d) + reg.d1(s);
}

} // namespace fracid
