#include "pointkan/basis.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace pointkan {

namespace {

constexpr double kDomainSlack = 1e-12;

void check_domain(const Tensor& gamma) {
    for (std::size_t i = 0; i < gamma.size(); ++i) {
        if (!(std::abs(gamma[i]) <= 1.0 + kDomainSlack)) {
            throw std::domain_error("basis: input " + std::to_string(gamma[i]) +
                                    " lies outside [-1, 1]");
        }
    }
}

}  // namespace

void BasisSpec::validate() const {
    if (degree < 0) throw std::invalid_argument("BasisSpec: degree must be >= 0");
    if (family == BasisFamily::Jacobi) {
        if (!(alpha > -1.0) || !(beta > -1.0)) {
            throw std::invalid_argument("BasisSpec: Jacobi requires alpha > -1 and beta > -1");
        }
    }
}

std::string BasisSpec::describe() const {
    if (family == BasisFamily::DiscreteChebyshev) {
        return "discrete-chebyshev(n=" + std::to_string(degree) + ")";
    }
    return "jacobi(n=" + std::to_string(degree) + ",alpha=" + std::to_string(alpha) +
           ",beta=" + std::to_string(beta) + ")";
}

JacobiCoeffs jacobi_coeffs(int n, double alpha, double beta) {
    if (n < 2) throw std::invalid_argument("jacobi_coeffs: defined for n >= 2");
    const double ab = alpha + beta;
    const double den1 = 2.0 * n * (n + ab);
    const double den2 = 2.0 * n + ab - 2.0;
    if (den1 == 0.0 || den2 == 0.0) {
        throw std::domain_error("jacobi_coeffs: recurrence denominator vanishes at n=" +
                                std::to_string(n));
    }
    JacobiCoeffs c;
    c.a = (2.0 * n + ab - 1.0) * (2.0 * n + ab) / den1;
    c.b = (2.0 * n + ab - 1.0) * (alpha * alpha - beta * beta) / (den1 * den2);
    c.c = -2.0 * (n + alpha - 1.0) * (n + beta - 1.0) * (2.0 * n + ab) / (den1 * den2);
    return c;
}

BasisTable eval_jacobi(const Tensor& gamma, const BasisSpec& spec) {
    spec.validate();
    check_domain(gamma);

    const std::size_t batch = gamma.size();
    const std::size_t cols = static_cast<std::size_t>(spec.degree) + 1;
    BasisTable table{Tensor({batch, cols}), Tensor({batch, cols})};

    std::vector<JacobiCoeffs> coeffs(cols);
    for (int k = 2; k <= spec.degree; ++k) {
        coeffs[static_cast<std::size_t>(k)] = jacobi_coeffs(k, spec.alpha, spec.beta);
    }
    const double f1_slope = 0.5 * (spec.alpha + spec.beta + 2.0);
    const double f1_const = 0.5 * (spec.alpha - spec.beta);

    double* vals = table.values.data();
    double* ders = table.derivs.data();
    for (std::size_t b = 0; b < batch; ++b) {
        const double x = gamma[b];
        double* v = vals + b * cols;
        double* d = ders + b * cols;
        v[0] = 1.0;
        d[0] = 0.0;
        if (spec.degree >= 1) {
            v[1] = f1_slope * x + f1_const;
            d[1] = f1_slope;
        }
        for (std::size_t k = 2; k < cols; ++k) {
            const JacobiCoeffs& c = coeffs[k];
            const double lin = c.a * x + c.b;
            v[k] = lin * v[k - 1] + c.c * v[k - 2];
            d[k] = c.a * v[k - 1] + lin * d[k - 1] + c.c * d[k - 2];
        }
    }
    return table;
}

BasisTable eval_discrete_chebyshev(const Tensor& gamma, int degree) {
    if (degree < 0) throw std::invalid_argument("eval_discrete_chebyshev: degree must be >= 0");
    check_domain(gamma);

    const std::size_t batch = gamma.size();
    const std::size_t cols = static_cast<std::size_t>(degree) + 1;
    BasisTable table{Tensor({batch, cols}), Tensor({batch, cols})};

    // Stability factor (2k-1)/(4k^2-1) in reduced form.
    std::vector<double> w(cols, 0.0);
    for (std::size_t k = 2; k < cols; ++k) w[k] = 1.0 / (2.0 * static_cast<double>(k) + 1.0);

    double* vals = table.values.data();
    double* ders = table.derivs.data();
    for (std::size_t b = 0; b < batch; ++b) {
        const double x = gamma[b];
        double* v = vals + b * cols;
        double* d = ders + b * cols;
        v[0] = 1.0;
        d[0] = 0.0;
        if (degree >= 1) {
            v[1] = x;
            d[1] = 1.0;
        }
        for (std::size_t k = 2; k < cols; ++k) {
            v[k] = 2.0 * x * v[k - 1] - w[k] * v[k - 2];
            d[k] = 2.0 * v[k - 1] + 2.0 * x * d[k - 1] - w[k] * d[k - 2];
        }
    }
    return table;
}

BasisTable eval_basis(const Tensor& gamma, const BasisSpec& spec) {
    spec.validate();
    if (spec.family == BasisFamily::DiscreteChebyshev) {
        return eval_discrete_chebyshev(gamma, spec.degree);
    }
    return eval_jacobi(gamma, spec);
}

}  // namespace pointkan
