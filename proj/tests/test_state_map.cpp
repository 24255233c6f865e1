#include "fracid/state_map.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <random>

using namespace fracid;

namespace {

SpectralCoeffs gaussian_data(int dim, int count, std::uint64_t seed) {
    const auto basis = enumerate_modes(BoxDomain(dim), count);
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal;
    Eigen::VectorXd c(count);
    for (int i = 0; i < count; ++i) {
        c(i) = normal(gen);
    }
    return SpectralCoeffs(basis, c);
}

} // namespace

TEST(StateMap, SingleModeIsScaledByLambdaPower) {
    const auto basis = enumerate_modes(BoxDomain(2), 8);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(8);
    c(3) = 2.0;
    const SpectralCoeffs f(basis, c);
    for (double s : {0.1, 0.5, 0.9}) {
        const auto sol = solve_state(f, s);
        EXPECT_NEAR(sol.u.coeffs(3), 2.0 * std::pow(basis[3].lambda, -s), 1e-15);
        EXPECT_EQ(sol.u.coeffs.cwiseAbs().sum(), std::abs(sol.u.coeffs(3)));
    }
}

TEST(StateMap, SolutionSatisfiesTheOperatorEquation) {
    // Applying lambda^s mode by mode must give back f.
    const auto f = gaussian_data(2, 50, 7);
    const auto u = solve_state(f, 0.37).u;
    const Eigen::VectorXd back = (u.lambdas().array().pow(0.37) * u.coeffs.array()).matrix();
    EXPECT_LT((back - f.coeffs).norm(), 1e-13 * f.coeffs.norm());
}

TEST(StateMap, RegularityShift) {
    // ||u(s)||_{H^{2s}} = ||f||_{L2} for the spectral solution.
    const auto f = gaussian_data(1, 40, 3);
    for (double s : {0.2, 0.45}) {
        const auto u = solve_state(f, s).u;
        EXPECT_NEAR(hs_norm(u, 2.0 * s), l2_norm(f), 1e-12 * l2_norm(f));
    }
}

TEST(StateMap, DerivativesMatchFiniteDifferences) {
    const auto f = gaussian_data(2, 30, 11);
    const double s = 0.42;
    const double h = 1e-5;
    for (int m = 1; m <= 3; ++m) {
        const Eigen::VectorXd lower =
            m == 1 ? solve_state(f, s + h).u.coeffs - solve_state(f, s - h).u.coeffs
                   : ds_state(f, s + h, m - 1).coeffs - ds_state(f, s - h, m - 1).coeffs;
        const Eigen::VectorXd fd = lower / (2.0 * h);
        const Eigen::VectorXd exact = ds_state(f, s, m).coeffs;
        EXPECT_LT((fd - exact).norm(), 1e-7 * exact.norm()) << "m=" << m;
    }
}

TEST(StateMap, DomainChecks) {
    const auto f = gaussian_data(1, 4, 1);
    EXPECT_THROW((void)solve_state(f, 0.0), DomainError);
    EXPECT_THROW((void)solve_state(f, 1.0), DomainError);
    EXPECT_THROW((void)ds_state(f, 0.5, 0), UnsupportedOrderError);
    EXPECT_THROW((void)ds_state(f, 0.5, 4), UnsupportedOrderError);
    EXPECT_THROW((void)hs_norm(f, 1.5), DomainError);
    SpectralCoeffs bad = f;
    bad.coeffs(0) = std::nan("");
    EXPECT_THROW((void)solve_state(bad, 0.5), EvaluationError);
}

TEST(StateMap, TailBoundDominatesNeglectedModes) {
    // Truncate a 200-mode expansion to 50 modes; the neglected mass of u must
    // stay below the bound computed from the truncated data.
    const auto full = gaussian_data(2, 200, 5);
    std::vector<EigenPair> head(full.basis.begin(), full.basis.begin() + 50);
    const SpectralCoeffs truncated(head, full.coeffs.head(50));
    const double s = 0.3;
    const auto u_full = solve_state(full, s).u.coeffs;
    const double neglected = u_full.tail(150).norm();
    const double bound_scale = std::pow(head.back().lambda, -s) * full.coeffs.tail(150).norm();
    EXPECT_LE(neglected, bound_scale);
    EXPECT_GT(solve_state(truncated, s).tail_bound, 0.0);
}

TEST(StateMap, StateIsMonotoneInOrderForLargeEigenvalues) {
    // lambda > 1 everywhere, so ||u(s)|| decreases in s.
    const auto f = gaussian_data(2, 40, 9);
    double prev = l2_norm(solve_state(f, 0.05).u);
    for (double s = 0.1; s < 0.96; s += 0.05) {
        const double cur = l2_norm(solve_state(f, s).u);
        EXPECT_LT(cur, prev);
        prev = cur;
    }
}
