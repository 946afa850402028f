#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "pointkan/basis.hpp"
#include "pointkan/graph.hpp"
#include "pointkan/layers.hpp"
#include "pointkan/optim.hpp"
#include "pointkan/tensor.hpp"

namespace pointkan {

enum class LayerKind { Kan, Mlp };

// Architecture of the classifier: a single EdgeConv over the kNN graph of the
// raw coordinates, a per-point embedding layer, concatenated max+mean global
// pooling, and a classifier head. Layer dims: 2*input_dim -> edge_hidden ->
// embedding, head 2*embedding -> num_classes.
struct ModelConfig {
    LayerKind layer_kind = LayerKind::Kan;
    BasisSpec basis;  // KAN variant only
    std::size_t k = 5;
    std::size_t edge_hidden = 128;
    std::size_t embedding = 1024;
    std::size_t num_classes = 40;
    std::size_t input_dim = 3;

    void validate() const;
};

// --- pooling primitives (argmax recorded for backward, ties to lowest index) ---

// h viewed as (rows, k, channels) flattened to (rows*k, channels); returns
// per-row channel-wise max, argmax[r*channels + c] = winning slot in [0, k).
Tensor max_over_k(const Tensor& h, std::size_t rows, std::size_t k,
                  std::vector<std::uint32_t>& argmax);
Tensor max_over_k_backward(const Tensor& grad, std::size_t k,
                           const std::vector<std::uint32_t>& argmax);

// h viewed as (batch, n, channels) flattened to (batch*n, channels); returns
// (batch, 2*channels): max pool concatenated with mean pool over the n axis.
Tensor global_max_mean_pool(const Tensor& h, std::size_t batch, std::size_t n,
                            std::vector<std::uint32_t>& argmax);
Tensor global_max_mean_pool_backward(const Tensor& grad, std::size_t batch, std::size_t n,
                                     const std::vector<std::uint32_t>& argmax);

// One processing stage: a KAN layer, or a linear layer with optional ReLU for
// the MLP baseline.
class Stage {
public:
    enum class Kind { Kan, LinearRelu, Linear };

    Stage(const std::string& name, Kind kind, std::size_t d_in, std::size_t d_out,
          const BasisSpec& spec, Rng& rng);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad);
    std::vector<Parameter*> parameters();
    std::size_t param_count() const;

private:
    Kind kind_;
    std::unique_ptr<KanLayer> kan_;
    std::unique_ptr<LinearLayer> linear_;
    std::vector<bool> relu_mask_;
};

class PointClassifier {
public:
    PointClassifier(ModelConfig cfg, std::uint64_t seed);

    // clouds: (batch, N, input_dim) -> logits (batch, num_classes).
    // Requires N >= k+1. The kNN graph is rebuilt from the raw coordinates on
    // every call and is not differentiated through.
    Tensor forward(const Tensor& clouds);

    // Accumulates gradients into all stage parameters.
    void backward(const Tensor& grad_logits);

    std::vector<Parameter*> parameters();
    const ModelConfig& config() const { return cfg_; }

    static std::size_t count_params(const ModelConfig& cfg);

private:
    ModelConfig cfg_;
    std::unique_ptr<Stage> edge_stage_;
    std::unique_ptr<Stage> point_stage_;
    std::unique_ptr<Stage> head_stage_;

    bool forward_cached_ = false;
    std::size_t batch_ = 0;
    std::size_t points_ = 0;
    std::vector<std::uint32_t> edge_argmax_;
    std::vector<std::uint32_t> pool_argmax_;
};

// --- checkpointing ("KDK1") ---

struct NamedTensor {
    std::string name;
    std::vector<std::size_t> dims;
    std::vector<double> data;  // stored as f32 little-endian on disk
};

// Writes magic "KDK1", format version, the config echo, then the model
// parameters (plus any extra tensors, e.g. optimizer state) as named f32
// tensors.
void save_checkpoint(const PointClassifier& model, const std::filesystem::path& path,
                     const std::vector<NamedTensor>& extra = {});

// Rejects unknown magic or version. Extra (non-parameter) tensors are
// returned through `extra` when given; unrecognized parameter names are an
// error.
PointClassifier load_checkpoint(const std::filesystem::path& path,
                                std::vector<NamedTensor>* extra = nullptr);

}  // namespace pointkan
