#include "fracid/state_map.hpp"

#include <algorithm>

namespace fracid {

namespace {

void require_open_unit(double s, const char* where) {
    if (!(s > 0.0 && s < 1.0)) {
        throw DomainError(std::string(where) + ": s must lie in (0,1)");
    }
}

} // namespace

StateSolution solve_state(const SpectralCoeffs& f, double s) {
    require_open_unit(s, "solve_state");
    if (!f.coeffs.allFinite()) {
        throw EvaluationError("solve_state: non-finite data coefficients");
    }
    const Eigen::VectorXd lambda = f.lambdas();
    StateSolution out;
    out.s = s;
    out.u = f.with_coeffs((lambda.array().pow(-s) * f.coeffs.array()).matrix());
    // Every neglected mode has eigenvalue >= the largest retained one.
    const double lambda_max = lambda.size() > 0 ? lambda.maxCoeff() : 1.0;
    out.tail_bound = std::pow(lambda_max, -s) * f.coeffs.norm();
    return out;
}

SpectralCoeffs ds_state(const SpectralCoeffs& f, double s, int m) {
    require_open_unit(s, "ds_state");
    if (m < 1 || m > 3) {
        throw UnsupportedOrderError("ds_state: derivative order must be 1, 2 or 3");
    }
    Eigen::VectorXd c(f.size());
    for (Eigen::Index k = 0; k < f.size(); ++k) {
        c(k) = e_lambda_deriv(f.basis[static_cast<std::size_t>(k)].lambda, s, m) * f.coeffs(k);
    }
    return f.with_coeffs(std::move(c));
}

double l2_norm(const SpectralCoeffs& c) {
    return c.coeffs.norm();
}

double hs_norm(const SpectralCoeffs& c, double s) {
    if (!(s >= 0.0 && s <= 1.0)) {
        throw DomainError("hs_norm: s must lie in [0,1]");
    }
    return std::sqrt((c.lambdas().array().pow(s) * c.coeffs.array().square()).sum());
}

} // namespace fracid
