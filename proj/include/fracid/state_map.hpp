#pragma once

#include "fracid/eigen_core.hpp"

namespace fracid {

/// u(s) = sum_k lambda_k^{-s} f_k phi_k, together with a majorant of the
/// L2 mass carried by modes beyond the truncation.
struct StateSolution {
    double s = 0.0;
    SpectralCoeffs u;
    double tail_bound = 0.0;
};

/// Spectral solution of (-Laplace)^s u = f. Requires 0 < s < 1.
[[nodiscard]] StateSolution solve_state(const SpectralCoeffs& f, double s);

/// m-th derivative in s of the state, m in {1,2,3}.
[[nodiscard]] SpectralCoeffs ds_state(const SpectralCoeffs& f, double s, int m);

[[nodiscard]] double l2_norm(const SpectralCoeffs& c);

/// (sum_k lambda_k^s c_k^2)^{1/2}, 0 <= s <= 1.
[[nodiscard]] double hs_norm(const SpectralCoeffs& c, double s);

} // namespace fracid
