#include "pointkan/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace pointkan {

void sgd_step(std::span<Parameter* const> params, double lr, double momentum) {
    // lr = 0 is admitted as the degenerate no-op update
    if (!(lr >= 0.0)) throw std::invalid_argument("sgd_step: lr must be non-negative");
    if (momentum < 0.0 || momentum >= 1.0) {
        throw std::invalid_argument("sgd_step: momentum must lie in [0, 1)");
    }

    // Validate everything first so a bad gradient leaves all values untouched.
    for (const Parameter* p : params) {
        for (std::size_t i = 0; i < p->grad.size(); ++i) {
            if (!std::isfinite(p->grad[i])) {
                throw std::runtime_error("sgd_step: non-finite gradient in parameter '" +
                                         p->name + "' at element " + std::to_string(i));
            }
        }
    }

    for (Parameter* p : params) {
        double* v = p->value.data();
        double* g = p->grad.data();
        double* m = p->momentum.data();
        const std::size_t n = p->value.size();
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = momentum * m[i] + g[i];
            v[i] -= lr * m[i];
            g[i] = 0.0;
        }
    }
}

}  // namespace pointkan
