#pragma once

#include <cstddef>
#include <string>

#include "pointkan/tensor.hpp"

namespace pointkan {

enum class BasisFamily { Jacobi, DiscreteChebyshev };

// Polynomial family selector. alpha/beta apply to the Jacobi family only and
// must stay above -1 so the three-term recurrence denominators cannot vanish
// at integer degree. alpha = beta = -0.5 is admitted; it is the most
// ill-conditioned corner of the domain but remains well defined.
struct BasisSpec {
    BasisFamily family = BasisFamily::Jacobi;
    int degree = 3;
    double alpha = 1.0;
    double beta = 1.0;

    void validate() const;
    std::string describe() const;
};

// Values and input-derivatives of every degree 0..n at once, one row per
// input element: values[b][k] = f_k(gamma_b). Column 0 is identically 1 in
// values and 0 in derivs.
struct BasisTable {
    Tensor values;  // (batch, n+1)
    Tensor derivs;  // (batch, n+1)
};

// Recurrence coefficients of the Jacobi family at degree n >= 2:
//   f_n = (a_n * x + b_n) * f_{n-1} + c_n * f_{n-2}
struct JacobiCoeffs {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
};

JacobiCoeffs jacobi_coeffs(int n, double alpha, double beta);

// Ascending-degree evaluation on inputs in [-1, 1] (violations beyond 1e-12
// raise std::domain_error; this module never rescales). Derivatives come from
// differentiating the same recurrence, so both families share one code path.
BasisTable eval_jacobi(const Tensor& gamma, const BasisSpec& spec);
BasisTable eval_discrete_chebyshev(const Tensor& gamma, int degree);
BasisTable eval_basis(const Tensor& gamma, const BasisSpec& spec);

}  // namespace pointkan
