#pragma once

#include "fracid/common.hpp"
#include "fracid/eigen_core.hpp"
#include "fracid/regularizer.hpp"

#include <Eigen/Core>

#include <variant>

namespace fracid {

/// Desired state or data: either spectral coefficients or a point function.
using Field = std::variant<SpectralCoeffs, PointFunction>;

enum class ProviderKind { spectral, fem };

/// u_d in the representation a given provider needs (coefficients in its
/// basis, or samples at its quadrature nodes). `orthogonal_mass2` carries
/// the squared L2 mass of u_d that the representation cannot see.
struct DiscreteTarget {
    Eigen::VectorXd values;
    double orthogonal_mass2 = 0.0;
};

/// Open interval of admissible orders.
struct Interval {
    double lower = 0.0;
    double upper = 1.0;

    [[nodiscard]] bool contains(double s) const { return s > lower && s < upper; }
};

/// Control-to-state map s -> u(s), exact (spectral) or discrete (fem), with
/// the L2(Omega) geometry of its state vectors.
class StateProvider {
public:
    virtual ~StateProvider() = default;

    [[nodiscard]] virtual ProviderKind kind() const = 0;
    /// Orders for which state() is defined.
    [[nodiscard]] virtual Interval admissible() const { return {}; }
    [[nodiscard]] virtual Eigen::VectorXd state(double s) const = 0;
    [[nodiscard]] virtual DiscreteTarget represent(const Field& target) const = 0;
    [[nodiscard]] virtual double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const = 0;
    /// (u - u_d, v)
    [[nodiscard]] virtual double residual_inner(const Eigen::VectorXd& u, const DiscreteTarget& ud,
                                                const Eigen::VectorXd& v) const = 0;
    /// ||u - u_d||^2
    [[nodiscard]] virtual double residual_norm2(const Eigen::VectorXd& u, const DiscreteTarget& ud) const = 0;
};

/// The exact map S(s) on a truncated eigenbasis.
class SpectralStateProvider final : public StateProvider {
public:
    explicit SpectralStateProvider(SpectralCoeffs f);

    [[nodiscard]] ProviderKind kind() const override { return ProviderKind::spectral; }
    [[nodiscard]] Eigen::VectorXd state(double s) const override;
    [[nodiscard]] DiscreteTarget represent(const Field& target) const override;
    [[nodiscard]] double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const override;
    [[nodiscard]] double residual_inner(const Eigen::VectorXd& u, const DiscreteTarget& ud,
                                        const Eigen::VectorXd& v) const override;
    [[nodiscard]] double residual_norm2(const Eigen::VectorXd& u, const DiscreteTarget& ud) const override;

    [[nodiscard]] const SpectralCoeffs& data() const { return f_; }

private:
    SpectralCoeffs f_;
};

/// Coefficients of `target` in `basis`; point functions are projected,
/// coefficient sets are matched mode by mode.
[[nodiscard]] DiscreteTarget spectral_target(const Field& target, const std::vector<EigenPair>& basis);

/// J(s,u) = 1/2 ||u - u_d||^2 + phi(s).
[[nodiscard]] double cost(double s, const SpectralCoeffs& u, const SpectralCoeffs& u_d, const Regularizer& reg);

/// f(s) = J(s, S(s)).
[[nodiscard]] double reduced_value(double s, const StateProvider& provider, const DiscreteTarget& u_d,
                                   const Regularizer& reg);

/// f'(s) = (S(s) - u_d, D_s S(s)) + phi'(s), exact spectral derivative.
[[nodiscard]] double reduced_grad(double s, const SpectralCoeffs& f, const SpectralCoeffs& u_d,
                                  const Regularizer& reg);

/// f''(s) = ||D_s S(s)||^2 + (S(s) - u_d, D_s^2 S(s)) + phi''(s).
[[nodiscard]] double reduced_hess(double s, const SpectralCoeffs& f, const SpectralCoeffs& u_d,
                                  const Regularizer& reg);

/// (u(s+sigma) - u(s-sigma)) / (2 sigma). Throws StepError when the stencil
/// leaves `bounds` or the provider's admissible interval.
[[nodiscard]] Eigen::VectorXd centered_diff(const StateProvider& provider, double s, double sigma,
                                            Interval bounds = {});

/// j_sigma(s) = (u(s) - u_d, d_sigma u(s)) + phi'(s). With a fem provider
/// this is the fully discrete surrogate.
[[nodiscard]] double j_sigma(double s, const StateProvider& provider, const DiscreteTarget& u_d,
                             const Regularizer& reg, double sigma);

} // namespace fracid
