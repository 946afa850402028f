#include "pointkan/gradcheck_suite.hpp"

#include <cmath>

#include "pointkan/gradcheck.hpp"
#include "pointkan/graph.hpp"
#include "pointkan/layers.hpp"
#include "pointkan/model.hpp"
#include "pointkan/rng.hpp"
#include "pointkan/train.hpp"

namespace pointkan {

namespace {

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

void zero_grads(const std::vector<Parameter*>& params) {
    for (Parameter* p : params) p->zero_grad();
}

// Max over: gradient w.r.t. each parameter of `layer`, and w.r.t. the input.
// `forward` must run the layer on an explicit input tensor.
template <class Layer>
double check_layer(Layer& layer, const Tensor& input, Rng& rng) {
    Tensor y = layer.forward(input);
    Tensor proj = random_tensor(y.shape(), rng);

    // Analytic pass first; finite differences only re-run the forward path.
    zero_grads(layer.parameters());
    layer.forward(input);
    const Tensor grad_input = layer.backward(proj);

    double worst = 0.0;
    for (Parameter* p : layer.parameters()) {
        const Tensor analytic = p->grad;
        auto f = [&](const Tensor& candidate) {
            const Tensor saved = p->value;
            p->value = candidate;
            const double out = dot(layer.forward(input), proj);
            p->value = saved;
            return out;
        };
        worst = std::max(worst, finite_diff_check(f, p->value, analytic));
    }
    auto f_in = [&](const Tensor& candidate) { return dot(layer.forward(candidate), proj); };
    worst = std::max(worst, finite_diff_check(f_in, input, grad_input));
    zero_grads(layer.parameters());
    return worst;
}

double check_basis(const BasisSpec& spec, Rng& rng) {
    const std::size_t batch = 16;
    Tensor gamma = random_tensor({batch}, rng, -0.99, 0.99);
    const BasisTable table = eval_basis(gamma, spec);
    Tensor proj = random_tensor(table.values.shape(), rng);

    const std::size_t cols = static_cast<std::size_t>(spec.degree) + 1;
    Tensor analytic({batch});
    for (std::size_t b = 0; b < batch; ++b) {
        double g = 0.0;
        for (std::size_t k = 0; k < cols; ++k) {
            g += proj[b * cols + k] * table.derivs[b * cols + k];
        }
        analytic[b] = g;
    }
    auto f = [&](const Tensor& candidate) {
        return dot(eval_basis(candidate, spec).values, proj);
    };
    return finite_diff_check(f, gamma, analytic);
}

double check_edge_features(Rng& rng) {
    const std::size_t n = 7;
    Tensor x = random_tensor({n, 3}, rng);
    const KnnGraph g = knn_graph(x, 3);  // frozen during the check
    Tensor proj = random_tensor({n, 3, 6}, rng);

    const Tensor analytic = edge_backward(proj, g, 3);
    auto f = [&](const Tensor& candidate) { return dot(edge_features(candidate, g), proj); };
    return finite_diff_check(f, x, analytic);
}

double check_max_pool(Rng& rng) {
    const std::size_t rows = 6;
    const std::size_t k = 4;
    const std::size_t channels = 5;
    Tensor h = random_tensor({rows * k, channels}, rng);
    std::vector<std::uint32_t> argmax;
    Tensor y = max_over_k(h, rows, k, argmax);
    Tensor proj = random_tensor(y.shape(), rng);

    max_over_k(h, rows, k, argmax);
    const Tensor analytic = max_over_k_backward(proj, k, argmax);
    auto f = [&](const Tensor& candidate) {
        std::vector<std::uint32_t> am;
        return dot(max_over_k(candidate, rows, k, am), proj);
    };
    return finite_diff_check(f, h, analytic);
}

double check_global_pool(Rng& rng) {
    const std::size_t batch = 3;
    const std::size_t n = 5;
    const std::size_t channels = 4;
    Tensor h = random_tensor({batch * n, channels}, rng);
    std::vector<std::uint32_t> argmax;
    Tensor y = global_max_mean_pool(h, batch, n, argmax);
    Tensor proj = random_tensor(y.shape(), rng);

    const Tensor analytic = global_max_mean_pool_backward(proj, batch, n, argmax);
    auto f = [&](const Tensor& candidate) {
        std::vector<std::uint32_t> am;
        return dot(global_max_mean_pool(candidate, batch, n, am), proj);
    };
    return finite_diff_check(f, h, analytic);
}

double check_cross_entropy(Rng& rng) {
    const std::size_t batch = 5;
    const std::size_t classes = 7;
    Tensor logits = random_tensor({batch, classes}, rng, -2.0, 2.0);
    std::vector<int> labels(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        labels[b] = static_cast<int>(rng.below(classes));
    }
    const Tensor analytic = cross_entropy(logits, labels).second;
    auto f = [&](const Tensor& candidate) { return cross_entropy(candidate, labels).first; };
    return finite_diff_check(f, logits, analytic, 1e-6);
}

double check_full_model(const ModelConfig& cfg, Rng& rng) {
    const std::size_t batch = 2;
    const std::size_t n = 6;
    PointClassifier model(cfg, rng.next_u64());
    Tensor clouds = random_tensor({batch, n, cfg.input_dim}, rng);
    std::vector<int> labels(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        labels[b] = static_cast<int>(rng.below(cfg.num_classes));
    }

    const std::vector<Parameter*> params = model.parameters();
    zero_grads(params);
    const Tensor logits = model.forward(clouds);
    model.backward(cross_entropy(logits, labels).second);

    double worst = 0.0;
    for (Parameter* p : params) {
        const Tensor analytic = p->grad;
        auto f = [&](const Tensor& candidate) {
            const Tensor saved = p->value;
            p->value = candidate;
            const double out = cross_entropy(model.forward(clouds), labels).first;
            p->value = saved;
            return out;
        };
        worst = std::max(worst, finite_diff_check(f, p->value, analytic));
    }
    zero_grads(params);
    return worst;
}

ModelConfig tiny_config(LayerKind kind) {
    ModelConfig cfg;
    cfg.layer_kind = kind;
    cfg.basis = BasisSpec{BasisFamily::Jacobi, 3, 1.0, 1.0};
    cfg.k = 2;
    cfg.edge_hidden = 4;
    cfg.embedding = 8;
    cfg.num_classes = 3;
    cfg.input_dim = 3;
    return cfg;
}

}  // namespace

std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<GradCheckEntry> out;

    const std::vector<BasisSpec> bases = {
        {BasisFamily::Jacobi, 0, 1.0, 1.0},
        {BasisFamily::Jacobi, 0, 0.0, 0.0},
        {BasisFamily::Jacobi, 0, -0.5, -0.5},
        {BasisFamily::DiscreteChebyshev, 0, 0.0, 0.0},
    };

    for (const BasisSpec& base : bases) {
        for (int degree = 1; degree <= 4; ++degree) {
            BasisSpec spec = base;
            spec.degree = degree;
            out.push_back({"basis/" + spec.describe(), check_basis(spec, rng)});
        }
    }

    {
        Rng init(rng.next_u64());
        LinearLayer linear("gradcheck.linear", 4, 5, init);
        Tensor input = random_tensor({3, 4}, rng);
        out.push_back({"linear", check_layer(linear, input, rng)});
    }

    for (const BasisSpec& base : bases) {
        for (int degree = 1; degree <= 4; ++degree) {
            BasisSpec spec = base;
            spec.degree = degree;
            Rng init(rng.next_u64());
            KanLayer layer("gradcheck.kan", spec, 4, 5, /*normalize=*/true, init);
            Tensor input = random_tensor({3, 4}, rng, -2.0, 2.0);
            out.push_back({"kan/" + spec.describe(), check_layer(layer, input, rng)});
        }
    }

    out.push_back({"edge_features", check_edge_features(rng)});
    out.push_back({"max_pool", check_max_pool(rng)});
    out.push_back({"global_pool", check_global_pool(rng)});
    out.push_back({"cross_entropy", check_cross_entropy(rng)});
    out.push_back({"model/kan", check_full_model(tiny_config(LayerKind::Kan), rng)});
    out.push_back({"model/mlp", check_full_model(tiny_config(LayerKind::Mlp), rng)});
    return out;
}

}  // namespace pointkan
