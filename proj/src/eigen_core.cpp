#include "fracid/eigen_core.hpp"

#include "fracid/quadrature.hpp"

#include <algorithm>
#include <numbers>
#include <string>
#include <utility>

namespace fracid {

namespace {

constexpr double kPi = std::numbers::pi;

} // namespace

BoxDomain::BoxDomain(int dim) : dim_(dim) {
    if (dim != 1 && dim != 2) {
        throw DomainError("BoxDomain: dim must be 1 or 2, got " + std::to_string(dim));
    }
}

bool BoxDomain::contains_closure(const Point& x) const {
    if (x.size() != dim_) {
        return false;
    }
    return (x.array() >= 0.0).all() && (x.array() <= 1.0).all();
}

int ModeIndex::sum_of_squares() const {
    int total = 0;
    for (int i = 0; i < dim; ++i) {
        total += k[i] * k[i];
    }
    return total;
}

bool operator<(const ModeIndex& a, const ModeIndex& b) {
    for (int i = 0; i < std::min(a.dim, b.dim); ++i) {
        if (a.k[i] != b.k[i]) {
            return a.k[i] < b.k[i];
        }
    }
    return a.dim < b.dim;
}

EigenPair make_eigenpair(const ModeIndex& mode) {
    if (mode.dim != 1 && mode.dim != 2) {
        throw DomainError("make_eigenpair: mode dimension must be 1 or 2");
    }
    for (int i = 0; i < mode.dim; ++i) {
        if (mode.k[i] < 1) {
            throw DomainError("make_eigenpair: mode indices must be >= 1");
        }
    }
    EigenPair pair;
    pair.mode = mode;
    pair.lambda = kPi * kPi * mode.sum_of_squares();
    pair.norm_factor = std::pow(2.0, 0.5 * mode.dim);
    return pair;
}

SpectralCoeffs::SpectralCoeffs(std::vector<EigenPair> b, Eigen::VectorXd c)
    : basis(std::move(b)), coeffs(std::move(c)) {
    if (static_cast<Eigen::Index>(basis.size()) != coeffs.size()) {
        throw DomainError("SpectralCoeffs: basis and coefficient lengths differ");
    }
}

Eigen::VectorXd SpectralCoeffs::lambdas() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(basis.size()));
    for (std::size_t i = 0; i < basis.size(); ++i) {
        out(static_cast<Eigen::Index>(i)) = basis[i].lambda;
    }
    return out;
}

SpectralCoeffs SpectralCoeffs::with_coeffs(Eigen::VectorXd c) const {
    return SpectralCoeffs(basis, std::move(c));
}

std::vector<EigenPair> enumerate_modes(const BoxDomain& domain, int count) {
    if (count < 1) {
        throw EmptyBasisError("enumerate_modes: need at least one mode");
    }
    const int dim = domain.dim();
    std::vector<ModeIndex> candidates;
    if (dim == 1) {
        for (int k = 1; k <= count; ++k) {
            candidates.push_back(ModeIndex{{k, 1}, 1});
        }
    } else {
        // A K x K block holds >= count modes, all with k^2 + l^2 <= 2K^2, so any
        // of the count smallest has each index <= sqrt(2) K.
        const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
        const int kmax = static_cast<int>(std::ceil(std::sqrt(2.0) * side)) + 1;
        candidates.reserve(static_cast<std::size_t>(kmax) * kmax);
        for (int k = 1; k <= kmax; ++k) {
            for (int l = 1; l <= kmax; ++l) {
                candidates.push_back(ModeIndex{{k, l}, 2});
            }
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const ModeIndex& a, const ModeIndex& b) {
        const int sa = a.sum_of_squares();
        const int sb = b.sum_of_squares();
        return sa != sb ? sa < sb : a < b;
    });
    candidates.resize(static_cast<std::size_t>(count));
    std::vector<EigenPair> out;
    out.reserve(candidates.size());
    for (const auto& mode : candidates) {
        out.push_back(make_eigenpair(mode));
    }
    return out;
}

int default_mode_count(int dim) {
    return dim == 1 ? 32 : 32 * 32;
}

double eigenfunction_eval(const EigenPair& pair, const Point& x) {
    const int dim = pair.mode.dim;
    if (!BoxDomain(dim).contains_closure(x)) {
        throw DomainError("eigenfunction_eval: point outside the closed unit box");
    }
    double value = pair.norm_factor;
    for (int i = 0; i < dim; ++i) {
        value *= std::sin(pair.mode.k[i] * kPi * x(i));
    }
    return value;
}

SpectralCoeffs project(const PointFunction& fn, const std::vector<EigenPair>& basis, int quad_order) {
    if (quad_order < 1) {
        throw DomainError("project: quad_order must be >= 1");
    }
    if (basis.empty()) {
        throw EmptyBasisError("project: empty basis");
    }
    const int dim = basis.front().mode.dim;
    int kmax = 1;
    for (const auto& pair : basis) {
        for (int i = 0; i < dim; ++i) {
            kmax = std::max(kmax, pair.mode.k[i]);
        }
    }
    const int cells = 2 * kmax;
    const auto rule = gauss_legendre(quad_order);
    const Eigen::Index nq = static_cast<Eigen::Index>(cells) * quad_order;

    // Composite nodes and weights along one axis.
    Eigen::VectorXd xs(nq);
    Eigen::VectorXd ws(nq);
    const double h = 1.0 / cells;
    for (int c = 0; c < cells; ++c) {
        for (int q = 0; q < quad_order; ++q) {
            xs(c * quad_order + q) = (c + rule.nodes(q)) * h;
            ws(c * quad_order + q) = rule.weights(q) * h;
        }
    }
    // sines(k-1, q) = w_q sin(k pi x_q)
    Eigen::MatrixXd sines(kmax, nq);
    for (int k = 1; k <= kmax; ++k) {
        sines.row(k - 1) = ((k * kPi) * xs.array()).sin().matrix().transpose().cwiseProduct(ws.transpose());
    }

    Eigen::VectorXd coeffs(static_cast<Eigen::Index>(basis.size()));
    if (dim == 1) {
        Eigen::VectorXd values(nq);
        for (Eigen::Index i = 0; i < nq; ++i) {
            values(i) = fn(make_point(xs(i)));
        }
        if (!values.allFinite()) {
            throw EvaluationError("project: function returned a non-finite value");
        }
        const Eigen::VectorXd moments = sines * values;
        for (std::size_t b = 0; b < basis.size(); ++b) {
            coeffs(static_cast<Eigen::Index>(b)) = basis[b].norm_factor * moments(basis[b].mode.k[0] - 1);
        }
    } else {
        Eigen::MatrixXd values(nq, nq);
        for (Eigen::Index i = 0; i < nq; ++i) {
            for (Eigen::Index j = 0; j < nq; ++j) {
                values(i, j) = fn(make_point(xs(i), xs(j)));
            }
        }
        if (!values.allFinite()) {
            throw EvaluationError("project: function returned a non-finite value");
        }
        const Eigen::MatrixXd moments = sines * values * sines.transpose();
        for (std::size_t b = 0; b < basis.size(); ++b) {
            const auto& mode = basis[b].mode;
            coeffs(static_cast<Eigen::Index>(b)) = basis[b].norm_factor * moments(mode.k[0] - 1, mode.k[1] - 1);
        }
    }
    return SpectralCoeffs(basis, std::move(coeffs));
}

double synthesize(const SpectralCoeffs& c, const Point& x) {
    double total = 0.0;
    for (std::size_t i = 0; i < c.basis.size(); ++i) {
        const double ci = c.coeffs(static_cast<Eigen::Index>(i));
        if (ci != 0.0) {
            total += ci * eigenfunction_eval(c.basis[i], x);
        } else if (!BoxDomain(c.basis[i].mode.dim).contains_closure(x)) {
            throw DomainError("synthesize: point outside the closed unit box");
        }
    }
    return total;
}

PointFunction as_point_function(SpectralCoeffs c) {
    return [c = std::move(c)](const Point& x) { return synthesize(c, x); };
}

} // namespace fracid
