#pragma once

#include <Eigen/Core>

#include <functional>
#include <stdexcept>
#include <string>

namespace fracid {

/// A point in (0,1)^dim, dim <= 2. Fixed capacity, no heap allocation.
using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 2, 1>;

/// Pointwise-evaluatable real function on the box domain.
using PointFunction = std::function<double(const Point&)>;

inline Point make_point(double x) {
    Point p(1);
    p << x;
    return p;
}

inline Point make_point(double x1, double x2) {
    Point p(2);
    p << x1, x2;
    return p;
}

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the admissible set (s outside (a,b), x outside the box, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

class EmptyBasisError : public Error {
public:
    using Error::Error;
};

class UnsupportedOrderError : public Error {
public:
    using Error::Error;
};

/// Non-finite value produced by user-supplied data.
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// Centered difference stencil s +/- sigma leaves the admissible interval.
class StepError : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

} // namespace fracid
