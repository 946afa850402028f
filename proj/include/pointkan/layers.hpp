#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pointkan/basis.hpp"
#include "pointkan/optim.hpp"
#include "pointkan/rng.hpp"
#include "pointkan/tensor.hpp"

namespace pointkan {

inline std::size_t kan_param_count(std::size_t d_in, std::size_t d_out, int degree) {
    return (static_cast<std::size_t>(degree) + 2) * d_in * d_out + 2 * d_out;
}

inline std::size_t linear_param_count(std::size_t d_in, std::size_t d_out) {
    return d_in * d_out + d_out;
}

// One Kolmogorov-Arnold layer: every output is a sum over inputs of a
// learnable univariate polynomial expansion, evaluated at tanh(input) so the
// basis always sees (-1, 1). A base linear branch on silu(input) and an
// optional per-sample affine normalization over the output features complete
// the layer; trainable scalar count is (degree+2)*d_in*d_out + 2*d_out.
class KanLayer {
public:
    KanLayer(std::string name, BasisSpec spec, std::size_t d_in, std::size_t d_out,
             bool normalize, Rng& rng);

    // (batch, d_in) -> (batch, d_out); caches intermediates for backward.
    Tensor forward(const Tensor& input);

    // Accumulates parameter gradients, returns the gradient w.r.t. the input.
    Tensor backward(const Tensor& grad_output);

    std::vector<Parameter*> parameters();
    std::size_t param_count() const { return kan_param_count(d_in_, d_out_, spec_.degree); }

    const BasisSpec& spec() const { return spec_; }
    std::size_t d_in() const { return d_in_; }
    std::size_t d_out() const { return d_out_; }
    bool normalized() const { return normalize_; }

    Parameter poly_weights;  // (d_out, d_in, degree+1)
    Parameter base_weights;  // (d_out, d_in)
    Parameter norm_scale;    // (d_out)
    Parameter norm_shift;    // (d_out)

private:
    BasisSpec spec_;
    std::size_t d_in_ = 0;
    std::size_t d_out_ = 0;
    bool normalize_ = true;

    struct Cache {
        bool valid = false;
        Tensor input;       // (B, d_in)
        Tensor gamma;       // (B, d_in) = tanh(input)
        Tensor silu;        // (B, d_in)
        Tensor sigmoid;     // (B, d_in)
        BasisTable basis;   // rows indexed by b*d_in + j
        Tensor xhat;        // (B, d_out), normalized pre-affine
        Tensor inv_std;     // (B)
    } cache_;
};

// Plain affine layer, y = W x + b. Used by the MLP baseline and as the
// classifier head of that variant.
class LinearLayer {
public:
    LinearLayer(std::string name, std::size_t d_in, std::size_t d_out, Rng& rng);

    Tensor forward(const Tensor& input);
    Tensor backward(const Tensor& grad_output);

    std::vector<Parameter*> parameters();
    std::size_t param_count() const { return linear_param_count(d_in_, d_out_); }

    std::size_t d_in() const { return d_in_; }
    std::size_t d_out() const { return d_out_; }

    Parameter weights;  // (d_out, d_in)
    Parameter bias;     // (d_out)

private:
    std::size_t d_in_ = 0;
    std::size_t d_out_ = 0;

    struct Cache {
        bool valid = false;
        Tensor input;
    } cache_;
};

double silu(double x);
double silu_grad(double x);

}  // namespace pointkan
