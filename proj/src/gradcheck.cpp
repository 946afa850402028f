#include "pointkan/gradcheck.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pointkan {

double finite_diff_check(const std::function<double(const Tensor&)>& f,
                         const Tensor& x,
                         const Tensor& analytic_grad,
                         double step) {
    if (!x.same_shape(analytic_grad)) {
        throw std::invalid_argument("finite_diff_check: gradient shape mismatch");
    }
    if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");

    Tensor probe = x;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        const double h = step * std::max(1.0, std::abs(xi));

        probe[i] = xi + h;
        const double f_plus = f(probe);
        probe[i] = xi - h;
        const double f_minus = f(probe);
        probe[i] = xi;

        if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
            throw std::runtime_error("finite_diff_check: non-finite function value at coordinate " +
                                     std::to_string(i));
        }

        const double fd = (f_plus - f_minus) / (2.0 * h);
        const double a = analytic_grad[i];
        const double err = std::abs(a - fd) / std::max(1e-8, std::abs(a) + std::abs(fd));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace pointkan
