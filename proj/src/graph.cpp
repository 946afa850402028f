#include "pointkan/graph.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace pointkan {

KnnGraph knn_graph(const Tensor& x, std::size_t k) {
    if (x.rank() != 2) throw std::invalid_argument("knn_graph: expected (N, F) input");
    const std::size_t n = x.dim(0);
    const std::size_t f = x.dim(1);
    if (k < 1 || k + 1 > n) {
        throw std::invalid_argument("knn_graph: need 1 <= k <= N-1, got k=" + std::to_string(k) +
                                    ", N=" + std::to_string(n));
    }

    KnnGraph g;
    g.num_points = n;
    g.k = k;
    g.neighbors.resize(n * k);

    std::vector<std::pair<double, std::uint32_t>> cand(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.data() + i * f;
        std::size_t c = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double* xj = x.data() + j * f;
            double d = 0.0;
            for (std::size_t a = 0; a < f; ++a) {
                const double diff = xj[a] - xi[a];
                d += diff * diff;
            }
            cand[c++] = {d, static_cast<std::uint32_t>(j)};
        }
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k),
                          cand.end());
        for (std::size_t m = 0; m < k; ++m) g.neighbors[i * k + m] = cand[m].second;
    }
    return g;
}

Tensor edge_features(const Tensor& x, const KnnGraph& g) {
    if (x.rank() != 2 || x.dim(0) != g.num_points) {
        throw std::invalid_argument("edge_features: point set does not match graph");
    }
    const std::size_t n = g.num_points;
    const std::size_t k = g.k;
    const std::size_t f = x.dim(1);

    Tensor out({n, k, 2 * f});
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.data() + i * f;
        for (std::size_t m = 0; m < k; ++m) {
            const std::uint32_t j = g.neighbor(i, m);
            if (j >= n) throw std::invalid_argument("edge_features: neighbor index out of range");
            const double* xj = x.data() + j * f;
            double* e = out.data() + (i * k + m) * 2 * f;
            for (std::size_t a = 0; a < f; ++a) {
                e[a] = xi[a];           // global part
                e[f + a] = xj[a] - xi[a];  // local part
            }
        }
    }
    return out;
}

Tensor edge_backward(const Tensor& grad_edge, const KnnGraph& g, std::size_t feature_dim) {
    const std::size_t n = g.num_points;
    const std::size_t k = g.k;
    const std::size_t f = feature_dim;
    check_shape(grad_edge, {n, k, 2 * f}, "edge_backward");

    Tensor grad_x({n, f});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t m = 0; m < k; ++m) {
            const std::uint32_t j = g.neighbor(i, m);
            const double* e = grad_edge.data() + (i * k + m) * 2 * f;
            double* gi = grad_x.data() + i * f;
            double* gj = grad_x.data() + static_cast<std::size_t>(j) * f;
            for (std::size_t a = 0; a < f; ++a) {
                gi[a] += e[a] - e[f + a];
                gj[a] += e[f + a];
            }
        }
    }
    return grad_x;
}

}  // namespace pointkan
