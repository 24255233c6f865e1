#include "fracid/regularizer.hpp"

#include "fracid/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fracid {

Regularizer rational_regularizer(double a, double b) {
    if (!(a >= 0.0 && a < b && b <= 1.0)) {
        throw ConfigError("rational_regularizer: need 0 <= a < b <= 1");
    }
    Regularizer reg;
    reg.name = "rational_ab";
    reg.a = a;
    reg.b = b;
    // g = (s-a)(b-s), g' = a+b-2s, g'' = -2
    reg.value = [a, b](double s) { return 1.0 / ((s - a) * (b - s)); };
    reg.d1 = [a, b](double s) {
        const double g = (s - a) * (b - s);
        return -(a + b - 2.0 * s) / (g * g);
    };
    reg.d2 = [a, b](double s) {
        const double g = (s - a) * (b - s);
        const double dg = a + b - 2.0 * s;
        return 2.0 * (dg * dg + g) / (g * g * g);
    };
    reg.convexity_constant = estimate_convexity_constant(reg);
    return reg;
}

Regularizer exponential_regularizer(double a, double b) {
    if (!(a >= 0.0 && a < b && b <= 1.0)) {
        throw ConfigError("exponential_regularizer: need 0 <= a < b <= 1");
    }
    Regularizer reg;
    reg.name = "exp_ab";
    reg.a = a;
    reg.b = b;
    reg.value = [a, b](double s) { return std::exp(1.0 / (b - s)) / (s - a); };
    reg.d1 = [a, b](double s) {
        const double r = 1.0 / (b - s);
        const double q = 1.0 / (s - a);
        return std::exp(r) * (r * r * q - q * q);
    };
    reg.d2 = [a, b](double s) {
        const double r = 1.0 / (b - s);
        const double q = 1.0 / (s - a);
        // (E q)'' = E'' q + 2 E' q' + E q'' with E' = E r^2, E'' = E (r^4 + 2 r^3)
        return std::exp(r) * ((r * r * r * r + 2.0 * r * r * r) * q - 2.0 * r * r * q * q + 2.0 * q * q * q);
    };
    reg.convexity_constant = estimate_convexity_constant(reg);
    return reg;
}

Regularizer make_regularizer(const std::string& name, double a, double b) {
    if (name == "rational_ab") {
        return rational_regularizer(a, b);
    }
    if (name == "exp_ab") {
        return exponential_regularizer(a, b);
    }
    if (name == "example1") {
        auto reg = rational_regularizer(0.0, 1.0);
        reg.name = "example1";
        return reg;
    }
    if (name == "example2") {
        auto reg = exponential_regularizer(0.0, 1.0);
        reg.name = "example2";
        return reg;
    }
    throw ConfigError("unknown regularizer '" + name + "'");
}

std::vector<std::string> regularizer_names() {
    return {"rational_ab", "exp_ab", "example1", "example2"};
}

double estimate_convexity_constant(const Regularizer& reg, int samples) {
    const double lo = reg.a + 0.01;
    const double hi = reg.b - 0.01;
    if (!(lo < hi) || samples < 2) {
        return 0.0;
    }
    double xi = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        const double s = lo + (hi - lo) * i / (samples - 1);
        xi = std::min(xi, reg.d2(s));
    }
    return std::max(xi, 0.0);
}

} // namespace fracid
