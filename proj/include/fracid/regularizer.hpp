#pragma once

#include <functional>
#include <string>
#include <vector>

namespace fracid {

/// Convex penalty phi on (a,b) that blows up at both endpoints, with its
/// first two derivatives in closed form.
struct Regularizer {
    std::string name;
    double a = 0.0;
    double b = 1.0;
    std::function<double(double)> value;
    std::function<double(double)> d1;
    std::function<double(double)> d2;
    /// Numerical strong-convexity constant min phi'' on [a+0.01, b-0.01];
    /// 0 when unknown.
    double convexity_constant = 0.0;

    [[nodiscard]] bool in_domain(double s) const { return s > a && s < b; }
};

/// 1 / ((s-a)(b-s))
[[nodiscard]] Regularizer rational_regularizer(double a, double b);

/// exp(1/(b-s)) / (s-a)
[[nodiscard]] Regularizer exponential_regularizer(double a, double b);

/// Selects a built-in by name: "rational_ab", "exp_ab" (on (a,b)),
/// "example1" = 1/(s(1-s)), "example2" = s^{-1} exp(1/(1-s)) (both on (0,1)).
[[nodiscard]] Regularizer make_regularizer(const std::string& name, double a = 0.0, double b = 1.0);

[[nodiscard]] std::vector<std::string> regularizer_names();

/// min phi'' on a uniform grid of [a+0.01, b-0.01].
[[nodiscard]] double estimate_convexity_constant(const Regularizer& reg, int samples = 1001);

} // namespace fracid
