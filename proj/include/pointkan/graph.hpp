#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pointkan/tensor.hpp"

namespace pointkan {

// k-nearest-neighbor edge set over a point set in feature space. Rows list
// each point's k nearest others (self excluded) by squared Euclidean
// distance, ties broken toward the lower index, so the structure is fully
// deterministic.
struct KnnGraph {
    std::size_t num_points = 0;
    std::size_t k = 0;
    std::vector<std::uint32_t> neighbors;  // (num_points, k), row-major

    std::uint32_t neighbor(std::size_t i, std::size_t m) const {
        return neighbors[i * k + m];
    }
};

// Brute-force scan with partial selection. Requires 1 <= k <= N-1.
KnnGraph knn_graph(const Tensor& x, std::size_t k);

// Per directed edge (i -> m-th neighbor j): [x_i, x_j - x_i], shape (N, k, 2F).
Tensor edge_features(const Tensor& x, const KnnGraph& g);

// Scatter-add of edge-feature gradients back to the points; the neighbor
// indices themselves are treated as non-differentiable.
Tensor edge_backward(const Tensor& grad_edge, const KnnGraph& g, std::size_t feature_dim);

}  // namespace pointkan
