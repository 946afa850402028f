#pragma once

#include <span>
#include <string>

#include "pointkan/tensor.hpp"

namespace pointkan {

// Trainable tensor with its gradient accumulator and SGD momentum buffer.
// Gradients accumulate (+=) across a batch; the optimizer zeroes them after
// each step.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor momentum;

    Parameter() = default;
    Parameter(std::string name_, Tensor init)
        : name(std::move(name_)),
          value(std::move(init)),
          grad(value.shape()),
          momentum(value.shape()) {}

    std::size_t size() const { return value.size(); }
    void zero_grad() { grad.zero(); }
};

// SGD with momentum:
//   buffer <- momentum * buffer + grad
//   value  <- value - lr * buffer
// then grads are zeroed. Any non-finite gradient element aborts the step
// before any parameter is touched; the exception names the offender.
void sgd_step(std::span<Parameter* const> params, double lr, double momentum);

}  // namespace pointkan
