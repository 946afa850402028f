#include "pointkan/model.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "pointkan/util.hpp"

namespace pointkan {

void ModelConfig::validate() const {
    if (k < 1) throw std::invalid_argument("ModelConfig: k must be >= 1");
    if (edge_hidden == 0 || embedding == 0 || num_classes == 0 || input_dim == 0) {
        throw std::invalid_argument("ModelConfig: all dimensions must be positive");
    }
    if (layer_kind == LayerKind::Kan) basis.validate();
}

Tensor max_over_k(const Tensor& h, std::size_t rows, std::size_t k,
                  std::vector<std::uint32_t>& argmax) {
    const std::size_t channels = h.dim(1);
    check_shape(h, {rows * k, channels}, "max_over_k");
    Tensor out({rows, channels});
    argmax.assign(rows * channels, 0);
    for (std::size_t r = 0; r < rows; ++r) {
        double* orow = out.data() + r * channels;
        std::uint32_t* arow = argmax.data() + r * channels;
        const double* first = h.data() + r * k * channels;
        for (std::size_t c = 0; c < channels; ++c) orow[c] = first[c];
        for (std::size_t m = 1; m < k; ++m) {
            const double* hrow = h.data() + (r * k + m) * channels;
            for (std::size_t c = 0; c < channels; ++c) {
                if (hrow[c] > orow[c]) {  // strict: ties keep the lowest slot
                    orow[c] = hrow[c];
                    arow[c] = static_cast<std::uint32_t>(m);
                }
            }
        }
    }
    return out;
}

Tensor max_over_k_backward(const Tensor& grad, std::size_t k,
                           const std::vector<std::uint32_t>& argmax) {
    const std::size_t rows = grad.dim(0);
    const std::size_t channels = grad.dim(1);
    if (argmax.size() != rows * channels) {
        throw std::invalid_argument("max_over_k_backward: argmax size mismatch");
    }
    Tensor out({rows * k, channels});
    for (std::size_t r = 0; r < rows; ++r) {
        const double* grow = grad.data() + r * channels;
        const std::uint32_t* arow = argmax.data() + r * channels;
        for (std::size_t c = 0; c < channels; ++c) {
            out[(r * k + arow[c]) * channels + c] = grow[c];
        }
    }
    return out;
}

Tensor global_max_mean_pool(const Tensor& h, std::size_t batch, std::size_t n,
                            std::vector<std::uint32_t>& argmax) {
    const std::size_t channels = h.dim(1);
    check_shape(h, {batch * n, channels}, "global_max_mean_pool");
    Tensor out({batch, 2 * channels});
    argmax.assign(batch * channels, 0);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t b = 0; b < batch; ++b) {
        double* orow = out.data() + b * 2 * channels;
        std::uint32_t* arow = argmax.data() + b * channels;
        const double* first = h.data() + b * n * channels;
        for (std::size_t c = 0; c < channels; ++c) {
            orow[c] = first[c];
            orow[channels + c] = first[c];
        }
        for (std::size_t i = 1; i < n; ++i) {
            const double* hrow = h.data() + (b * n + i) * channels;
            for (std::size_t c = 0; c < channels; ++c) {
                if (hrow[c] > orow[c]) {
                    orow[c] = hrow[c];
                    arow[c] = static_cast<std::uint32_t>(i);
                }
                orow[channels + c] += hrow[c];
            }
        }
        for (std::size_t c = 0; c < channels; ++c) orow[channels + c] *= inv_n;
    }
    return out;
}

Tensor global_max_mean_pool_backward(const Tensor& grad, std::size_t batch, std::size_t n,
                                     const std::vector<std::uint32_t>& argmax) {
    const std::size_t channels = grad.dim(1) / 2;
    check_shape(grad, {batch, 2 * channels}, "global_max_mean_pool_backward");
    if (argmax.size() != batch * channels) {
        throw std::invalid_argument("global_max_mean_pool_backward: argmax size mismatch");
    }
    Tensor out({batch * n, channels});
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* grow = grad.data() + b * 2 * channels;
        const std::uint32_t* arow = argmax.data() + b * channels;
        for (std::size_t c = 0; c < channels; ++c) {
            out[(b * n + arow[c]) * channels + c] += grow[c];
            const double gmean = grow[channels + c] * inv_n;
            for (std::size_t i = 0; i < n; ++i) {
                out[(b * n + i) * channels + c] += gmean;
            }
        }
    }
    return out;
}

Stage::Stage(const std::string& name, Kind kind, std::size_t d_in, std::size_t d_out,
             const BasisSpec& spec, Rng& rng)
    : kind_(kind) {
    if (kind == Kind::Kan) {
        kan_ = std::make_unique<KanLayer>(name, spec, d_in, d_out, /*normalize=*/true, rng);
    } else {
        linear_ = std::make_unique<LinearLayer>(name, d_in, d_out, rng);
    }
}

Tensor Stage::forward(const Tensor& x) {
    if (kind_ == Kind::Kan) return kan_->forward(x);
    Tensor y = linear_->forward(x);
    if (kind_ == Kind::LinearRelu) {
        relu_mask_.assign(y.size(), false);
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y[i] > 0.0) {
                relu_mask_[i] = true;
            } else {
                y[i] = 0.0;
            }
        }
    }
    return y;
}

Tensor Stage::backward(const Tensor& grad) {
    if (kind_ == Kind::Kan) return kan_->backward(grad);
    if (kind_ == Kind::LinearRelu) {
        if (relu_mask_.size() != grad.size()) {
            throw std::logic_error("Stage::backward called before forward");
        }
        Tensor masked = grad;
        for (std::size_t i = 0; i < masked.size(); ++i) {
            if (!relu_mask_[i]) masked[i] = 0.0;
        }
        return linear_->backward(masked);
    }
    return linear_->backward(grad);
}

std::vector<Parameter*> Stage::parameters() {
    if (kind_ == Kind::Kan) return kan_->parameters();
    return linear_->parameters();
}

std::size_t Stage::param_count() const {
    if (kind_ == Kind::Kan) return kan_->param_count();
    return linear_->param_count();
}

PointClassifier::PointClassifier(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const bool kan = cfg_.layer_kind == LayerKind::Kan;
    const Stage::Kind hidden = kan ? Stage::Kind::Kan : Stage::Kind::LinearRelu;
    const Stage::Kind head = kan ? Stage::Kind::Kan : Stage::Kind::Linear;
    edge_stage_ = std::make_unique<Stage>("edge", hidden, 2 * cfg_.input_dim, cfg_.edge_hidden,
                                          cfg_.basis, rng);
    point_stage_ = std::make_unique<Stage>("point", hidden, cfg_.edge_hidden, cfg_.embedding,
                                           cfg_.basis, rng);
    head_stage_ = std::make_unique<Stage>("head", head, 2 * cfg_.embedding, cfg_.num_classes,
                                          cfg_.basis, rng);
}

Tensor PointClassifier::forward(const Tensor& clouds) {
    if (clouds.rank() != 3 || clouds.dim(2) != cfg_.input_dim) {
        throw std::invalid_argument("PointClassifier::forward: expected (batch, N, " +
                                    std::to_string(cfg_.input_dim) + ") input");
    }
    const std::size_t batch = clouds.dim(0);
    const std::size_t n = clouds.dim(1);
    if (n < cfg_.k + 1) {
        throw std::invalid_argument("PointClassifier::forward: need N >= k+1, got N=" +
                                    std::to_string(n) + ", k=" + std::to_string(cfg_.k));
    }

    const std::size_t f = cfg_.input_dim;
    const std::size_t k = cfg_.k;
    Tensor edges({batch * n * k, 2 * f});
    parallel_for(batch, [&](std::size_t b) {
        Tensor cloud({n, f},
                     std::vector<double>(clouds.data() + b * n * f,
                                         clouds.data() + (b + 1) * n * f));
        const KnnGraph g = knn_graph(cloud, k);
        const Tensor e = edge_features(cloud, g);
        std::memcpy(edges.data() + b * n * k * 2 * f, e.data(),
                    e.size() * sizeof(double));
    });

    const Tensor h1 = edge_stage_->forward(edges);
    const Tensor per_point = max_over_k(h1, batch * n, k, edge_argmax_);
    const Tensor h2 = point_stage_->forward(per_point);
    const Tensor pooled = global_max_mean_pool(h2, batch, n, pool_argmax_);
    Tensor logits = head_stage_->forward(pooled);

    batch_ = batch;
    points_ = n;
    forward_cached_ = true;
    return logits;
}

void PointClassifier::backward(const Tensor& grad_logits) {
    if (!forward_cached_) {
        throw std::logic_error("PointClassifier::backward called before forward");
    }
    check_shape(grad_logits, {batch_, cfg_.num_classes}, "PointClassifier::backward");

    const Tensor g_pooled = head_stage_->backward(grad_logits);
    const Tensor g_h2 = global_max_mean_pool_backward(g_pooled, batch_, points_, pool_argmax_);
    const Tensor g_point = point_stage_->backward(g_h2);
    const Tensor g_h1 = max_over_k_backward(g_point, cfg_.k, edge_argmax_);
    edge_stage_->backward(g_h1);  // graph is non-differentiable; edge grads stop here
}

std::vector<Parameter*> PointClassifier::parameters() {
    std::vector<Parameter*> out;
    for (Stage* s : {edge_stage_.get(), point_stage_.get(), head_stage_.get()}) {
        for (Parameter* p : s->parameters()) out.push_back(p);
    }
    return out;
}

std::size_t PointClassifier::count_params(const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t dims[3][2] = {{2 * cfg.input_dim, cfg.edge_hidden},
                                    {cfg.edge_hidden, cfg.embedding},
                                    {2 * cfg.embedding, cfg.num_classes}};
    std::size_t total = 0;
    for (const auto& d : dims) {
        total += cfg.layer_kind == LayerKind::Kan
                     ? kan_param_count(d[0], d[1], cfg.basis.degree)
                     : linear_param_count(d[0], d[1]);
    }
    return total;
}

// --- checkpoint format ---

namespace {

constexpr char kMagic[4] = {'K', 'D', 'K', '1'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_str(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
public:
    explicit Reader(std::string bytes, std::string context)
        : bytes_(std::move(bytes)), context_(std::move(context)) {}

    std::uint16_t u16() { return static_cast<std::uint16_t>(u8() | (u8() << 8)); }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str() {
        const std::uint32_t len = u32();
        need(len);
        std::string s = bytes_.substr(pos_, len);
        pos_ += len;
        return s;
    }
    std::string raw(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }
    void need(std::size_t n) {
        if (pos_ + n > bytes_.size()) {
            throw std::runtime_error(context_ + ": truncated file");
        }
    }
    std::string bytes_;
    std::string context_;
    std::size_t pos_ = 0;
};

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::pair<std::string, std::string>> config_pairs(const ModelConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> p;
    p.emplace_back("layer_kind", cfg.layer_kind == LayerKind::Kan ? "kan" : "mlp");
    p.emplace_back("basis_family", cfg.basis.family == BasisFamily::Jacobi
                                       ? "jacobi"
                                       : "discrete-chebyshev");
    p.emplace_back("degree", std::to_string(cfg.basis.degree));
    p.emplace_back("alpha", fmt_double(cfg.basis.alpha));
    p.emplace_back("beta", fmt_double(cfg.basis.beta));
    p.emplace_back("k", std::to_string(cfg.k));
    p.emplace_back("edge_hidden", std::to_string(cfg.edge_hidden));
    p.emplace_back("embedding", std::to_string(cfg.embedding));
    p.emplace_back("num_classes", std::to_string(cfg.num_classes));
    p.emplace_back("input_dim", std::to_string(cfg.input_dim));
    return p;
}

ModelConfig config_from_pairs(const std::map<std::string, std::string>& kv,
                              const std::string& context) {
    auto get = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) {
            throw std::runtime_error(context + ": missing config field '" + key + "'");
        }
        return it->second;
    };
    ModelConfig cfg;
    const std::string& kind = get("layer_kind");
    if (kind == "kan") {
        cfg.layer_kind = LayerKind::Kan;
    } else if (kind == "mlp") {
        cfg.layer_kind = LayerKind::Mlp;
    } else {
        throw std::runtime_error(context + ": unknown layer_kind '" + kind + "'");
    }
    const std::string& family = get("basis_family");
    if (family == "jacobi") {
        cfg.basis.family = BasisFamily::Jacobi;
    } else if (family == "discrete-chebyshev") {
        cfg.basis.family = BasisFamily::DiscreteChebyshev;
    } else {
        throw std::runtime_error(context + ": unknown basis_family '" + family + "'");
    }
    cfg.basis.degree = std::stoi(get("degree"));
    cfg.basis.alpha = std::stod(get("alpha"));
    cfg.basis.beta = std::stod(get("beta"));
    cfg.k = std::stoul(get("k"));
    cfg.edge_hidden = std::stoul(get("edge_hidden"));
    cfg.embedding = std::stoul(get("embedding"));
    cfg.num_classes = std::stoul(get("num_classes"));
    cfg.input_dim = std::stoul(get("input_dim"));
    return cfg;
}

void put_named_tensor(std::string& out, const std::string& name,
                      const std::vector<std::size_t>& dims, const double* data,
                      std::size_t count) {
    put_str(out, name);
    out.push_back(static_cast<char>(dims.size()));
    for (std::size_t d : dims) put_u64(out, d);
    for (std::size_t i = 0; i < count; ++i) put_f32(out, static_cast<float>(data[i]));
}

}  // namespace

void save_checkpoint(const PointClassifier& model, const std::filesystem::path& path,
                     const std::vector<NamedTensor>& extra) {
    std::string out;
    out.append(kMagic, 4);
    put_u16(out, kVersion);

    const auto pairs = config_pairs(model.config());
    put_u32(out, static_cast<std::uint32_t>(pairs.size()));
    for (const auto& [key, value] : pairs) {
        put_str(out, key);
        put_str(out, value);
    }

    auto params = const_cast<PointClassifier&>(model).parameters();
    put_u32(out, static_cast<std::uint32_t>(params.size() + extra.size()));
    for (const Parameter* p : params) {
        put_named_tensor(out, p->name, p->value.shape(), p->value.data(), p->value.size());
    }
    for (const NamedTensor& t : extra) {
        put_named_tensor(out, t.name, t.dims, t.data.data(), t.data.size());
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

PointClassifier load_checkpoint(const std::filesystem::path& path,
                                std::vector<NamedTensor>* extra) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r(std::move(bytes), "load_checkpoint(" + path.string() + ")");

    if (r.raw(4) != std::string(kMagic, 4)) {
        throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
    }
    const std::uint16_t version = r.u16();
    if (version != kVersion) {
        throw std::runtime_error("load_checkpoint: unsupported version " +
                                 std::to_string(version) + " in " + path.string());
    }

    std::map<std::string, std::string> kv;
    const std::uint32_t npairs = r.u32();
    for (std::uint32_t i = 0; i < npairs; ++i) {
        std::string key = r.str();
        kv[key] = r.str();
    }
    PointClassifier model(config_from_pairs(kv, "load_checkpoint"), /*seed=*/0);

    std::map<std::string, Parameter*> by_name;
    for (Parameter* p : model.parameters()) by_name[p->name] = p;

    const std::uint32_t ntensors = r.u32();
    for (std::uint32_t t = 0; t < ntensors; ++t) {
        NamedTensor nt;
        nt.name = r.str();
        const std::uint8_t rank = static_cast<std::uint8_t>(r.raw(1)[0]);
        std::size_t count = 1;
        for (std::uint8_t d = 0; d < rank; ++d) {
            nt.dims.push_back(static_cast<std::size_t>(r.u64()));
            count *= nt.dims.back();
        }
        nt.data.resize(count);
        for (std::size_t i = 0; i < count; ++i) nt.data[i] = static_cast<double>(r.f32());

        auto it = by_name.find(nt.name);
        if (it != by_name.end()) {
            Parameter* p = it->second;
            if (p->value.shape() != nt.dims) {
                throw std::runtime_error("load_checkpoint: shape mismatch for tensor '" +
                                         nt.name + "'");
            }
            for (std::size_t i = 0; i < count; ++i) p->value[i] = nt.data[i];
            by_name.erase(it);
        } else if (nt.name.rfind("opt.", 0) == 0) {
            if (extra) extra->push_back(std::move(nt));
        } else {
            throw std::runtime_error("load_checkpoint: unknown tensor '" + nt.name + "'");
        }
    }
    if (!by_name.empty()) {
        throw std::runtime_error("load_checkpoint: parameter '" + by_name.begin()->first +
                                 "' missing from " + path.string());
    }
    if (!r.done()) {
        throw std::runtime_error("load_checkpoint: trailing bytes in " + path.string());
    }
    return model;
}

}  // namespace pointkan
