#pragma once

#include <functional>

#include "pointkan/tensor.hpp"

namespace pointkan {

// Central-difference check of an analytic gradient against f.
//
// Per coordinate i the step is step * max(1, |x_i|); the reported value is
//   max_i |analytic_i - fd_i| / max(1e-8, |analytic_i| + |fd_i|).
// Throws if f evaluates to a non-finite value, identifying the coordinate.
double finite_diff_check(const std::function<double(const Tensor&)>& f,
                         const Tensor& x,
                         const Tensor& analytic_grad,
                         double step = 1e-5);

}  // namespace pointkan
