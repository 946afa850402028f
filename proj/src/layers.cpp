#include "pointkan/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace pointkan {

namespace {
constexpr double kNormEps = 1e-5;
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

KanLayer::KanLayer(std::string name, BasisSpec spec, std::size_t d_in, std::size_t d_out,
                   bool normalize, Rng& rng)
    : spec_(spec), d_in_(d_in), d_out_(d_out), normalize_(normalize) {
    spec_.validate();
    if (d_in == 0 || d_out == 0) throw std::invalid_argument("KanLayer: zero dimension");

    const std::size_t cols = static_cast<std::size_t>(spec_.degree) + 1;
    Tensor poly({d_out, d_in, cols});
    const double poly_std = std::sqrt(1.0 / (static_cast<double>(cols) * static_cast<double>(d_in)));
    for (std::size_t i = 0; i < poly.size(); ++i) poly[i] = rng.normal(0.0, poly_std);

    Tensor base({d_out, d_in});
    const double base_bound = std::sqrt(1.0 / static_cast<double>(d_in));
    for (std::size_t i = 0; i < base.size(); ++i) base[i] = rng.uniform(-base_bound, base_bound);

    Tensor scale({d_out});
    scale.fill(1.0);
    Tensor shift({d_out});

    poly_weights = Parameter(name + ".poly_weights", std::move(poly));
    base_weights = Parameter(name + ".base_weights", std::move(base));
    norm_scale = Parameter(name + ".norm_scale", std::move(scale));
    norm_shift = Parameter(name + ".norm_shift", std::move(shift));
}

Tensor KanLayer::forward(const Tensor& input) {
    if (input.rank() != 2 || input.dim(1) != d_in_) {
        throw std::invalid_argument("KanLayer::forward: expected (batch, " +
                                    std::to_string(d_in_) + ") input");
    }
    const std::size_t batch = input.dim(0);
    const std::size_t cols = static_cast<std::size_t>(spec_.degree) + 1;

    cache_.input = input;
    cache_.gamma = Tensor({batch, d_in_});
    cache_.silu = Tensor({batch, d_in_});
    cache_.sigmoid = Tensor({batch, d_in_});
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double x = input[i];
        cache_.gamma[i] = std::tanh(x);
        const double s = 1.0 / (1.0 + std::exp(-x));
        cache_.sigmoid[i] = s;
        cache_.silu[i] = x * s;
    }
    cache_.basis = eval_basis(cache_.gamma, spec_);

    Tensor out({batch, d_out_});
    const double* wp = poly_weights.value.data();
    const double* wb = base_weights.value.data();
    const double* fv = cache_.basis.values.data();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* frow = fv + b * d_in_ * cols;
        const double* srow = cache_.silu.data() + b * d_in_;
        double* orow = out.data() + b * d_out_;
        for (std::size_t o = 0; o < d_out_; ++o) {
            const double* wprow = wp + o * d_in_ * cols;
            const double* wbrow = wb + o * d_in_;
            double acc = 0.0;
            for (std::size_t j = 0; j < d_in_; ++j) {
                const double* w = wprow + j * cols;
                const double* f = frow + j * cols;
                double dot = 0.0;
                for (std::size_t k = 0; k < cols; ++k) dot += w[k] * f[k];
                acc += dot + wbrow[j] * srow[j];
            }
            orow[o] = acc;
        }
    }

    if (normalize_) {
        cache_.xhat = Tensor({batch, d_out_});
        cache_.inv_std = Tensor({batch});
        const double* g = norm_scale.value.data();
        const double* s = norm_shift.value.data();
        for (std::size_t b = 0; b < batch; ++b) {
            double* row = out.data() + b * d_out_;
            double mean = 0.0;
            for (std::size_t o = 0; o < d_out_; ++o) mean += row[o];
            mean /= static_cast<double>(d_out_);
            double var = 0.0;
            for (std::size_t o = 0; o < d_out_; ++o) {
                const double c = row[o] - mean;
                var += c * c;
            }
            var /= static_cast<double>(d_out_);
            const double inv = 1.0 / std::sqrt(var + kNormEps);
            cache_.inv_std[b] = inv;
            double* xh = cache_.xhat.data() + b * d_out_;
            for (std::size_t o = 0; o < d_out_; ++o) {
                xh[o] = (row[o] - mean) * inv;
                row[o] = g[o] * xh[o] + s[o];
            }
        }
    }

    cache_.valid = true;
    return out;
}

Tensor KanLayer::backward(const Tensor& grad_output) {
    if (!cache_.valid) throw std::logic_error("KanLayer::backward called before forward");
    const std::size_t batch = cache_.input.dim(0);
    check_shape(grad_output, {batch, d_out_}, "KanLayer::backward");
    const std::size_t cols = static_cast<std::size_t>(spec_.degree) + 1;

    // Normalization backward first (or pass-through).
    Tensor grad_pre({batch, d_out_});
    if (normalize_) {
        const double* g = norm_scale.value.data();
        double* gscale = norm_scale.grad.data();
        double* gshift = norm_shift.grad.data();
        for (std::size_t b = 0; b < batch; ++b) {
            const double* go = grad_output.data() + b * d_out_;
            const double* xh = cache_.xhat.data() + b * d_out_;
            const double inv = cache_.inv_std[b];
            double m1 = 0.0;
            double m2 = 0.0;
            for (std::size_t o = 0; o < d_out_; ++o) {
                gscale[o] += go[o] * xh[o];
                gshift[o] += go[o];
                const double q = go[o] * g[o];
                m1 += q;
                m2 += q * xh[o];
            }
            m1 /= static_cast<double>(d_out_);
            m2 /= static_cast<double>(d_out_);
            double* gp = grad_pre.data() + b * d_out_;
            for (std::size_t o = 0; o < d_out_; ++o) {
                gp[o] = inv * (go[o] * g[o] - m1 - xh[o] * m2);
            }
        }
    } else {
        grad_pre = grad_output;
    }

    Tensor grad_input({batch, d_in_});
    const double* wp = poly_weights.value.data();
    const double* wb = base_weights.value.data();
    double* gwp = poly_weights.grad.data();
    double* gwb = base_weights.grad.data();
    const double* fv = cache_.basis.values.data();
    const double* fd = cache_.basis.derivs.data();

    std::vector<double> ggamma(d_in_);
    std::vector<double> gbase(d_in_);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* frow = fv + b * d_in_ * cols;
        const double* drow = fd + b * d_in_ * cols;
        const double* srow = cache_.silu.data() + b * d_in_;
        const double* gp = grad_pre.data() + b * d_out_;
        std::fill(ggamma.begin(), ggamma.end(), 0.0);
        std::fill(gbase.begin(), gbase.end(), 0.0);
        for (std::size_t o = 0; o < d_out_; ++o) {
            const double gu = gp[o];
            const double* wprow = wp + o * d_in_ * cols;
            double* gwprow = gwp + o * d_in_ * cols;
            const double* wbrow = wb + o * d_in_;
            double* gwbrow = gwb + o * d_in_;
            for (std::size_t j = 0; j < d_in_; ++j) {
                const double* w = wprow + j * cols;
                double* gw = gwprow + j * cols;
                const double* f = frow + j * cols;
                const double* d = drow + j * cols;
                double dot_d = 0.0;
                for (std::size_t k = 0; k < cols; ++k) {
                    gw[k] += gu * f[k];
                    dot_d += w[k] * d[k];
                }
                ggamma[j] += gu * dot_d;
                gwbrow[j] += gu * srow[j];
                gbase[j] += gu * wbrow[j];
            }
        }
        const double* xrow = cache_.input.data() + b * d_in_;
        const double* grow = cache_.gamma.data() + b * d_in_;
        const double* sigrow = cache_.sigmoid.data() + b * d_in_;
        double* gin = grad_input.data() + b * d_in_;
        for (std::size_t j = 0; j < d_in_; ++j) {
            const double dtanh = 1.0 - grow[j] * grow[j];
            const double dsilu = sigrow[j] * (1.0 + xrow[j] * (1.0 - sigrow[j]));
            gin[j] = ggamma[j] * dtanh + gbase[j] * dsilu;
        }
    }
    return grad_input;
}

std::vector<Parameter*> KanLayer::parameters() {
    return {&poly_weights, &base_weights, &norm_scale, &norm_shift};
}

LinearLayer::LinearLayer(std::string name, std::size_t d_in, std::size_t d_out, Rng& rng)
    : d_in_(d_in), d_out_(d_out) {
    if (d_in == 0 || d_out == 0) throw std::invalid_argument("LinearLayer: zero dimension");
    Tensor w({d_out, d_in});
    Tensor b({d_out});
    const double bound = std::sqrt(1.0 / static_cast<double>(d_in));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
    weights = Parameter(name + ".weights", std::move(w));
    bias = Parameter(name + ".bias", std::move(b));
}

Tensor LinearLayer::forward(const Tensor& input) {
    if (input.rank() != 2 || input.dim(1) != d_in_) {
        throw std::invalid_argument("LinearLayer::forward: expected (batch, " +
                                    std::to_string(d_in_) + ") input");
    }
    const std::size_t batch = input.dim(0);
    cache_.input = input;
    cache_.valid = true;

    Tensor out({batch, d_out_});
    const double* w = weights.value.data();
    const double* bv = bias.value.data();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* xrow = input.data() + b * d_in_;
        double* orow = out.data() + b * d_out_;
        for (std::size_t o = 0; o < d_out_; ++o) {
            const double* wrow = w + o * d_in_;
            double acc = bv[o];
            for (std::size_t j = 0; j < d_in_; ++j) acc += wrow[j] * xrow[j];
            orow[o] = acc;
        }
    }
    return out;
}

Tensor LinearLayer::backward(const Tensor& grad_output) {
    if (!cache_.valid) throw std::logic_error("LinearLayer::backward called before forward");
    const std::size_t batch = cache_.input.dim(0);
    check_shape(grad_output, {batch, d_out_}, "LinearLayer::backward");

    Tensor grad_input({batch, d_in_});
    const double* w = weights.value.data();
    double* gw = weights.grad.data();
    double* gb = bias.grad.data();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* xrow = cache_.input.data() + b * d_in_;
        const double* grow = grad_output.data() + b * d_out_;
        double* girow = grad_input.data() + b * d_in_;
        for (std::size_t o = 0; o < d_out_; ++o) {
            const double g = grow[o];
            gb[o] += g;
            const double* wrow = w + o * d_in_;
            double* gwrow = gw + o * d_in_;
            for (std::size_t j = 0; j < d_in_; ++j) {
                gwrow[j] += g * xrow[j];
                girow[j] += g * wrow[j];
            }
        }
    }
    return grad_input;
}

std::vector<Parameter*> LinearLayer::parameters() { return {&weights, &bias}; }

}  // namespace pointkan
