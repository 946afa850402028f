#include "pointkan/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "pointkan/optim.hpp"
#include "pointkan/rng.hpp"

namespace pointkan {

double effective_lr(const TrainConfig& cfg, int epoch) {
    if (!cfg.lr_schedule) return cfg.lr;
    if (epoch > (3 * cfg.epochs) / 4) return cfg.lr * 0.01;
    if (epoch > cfg.epochs / 2) return cfg.lr * 0.1;
    return cfg.lr;
}

std::pair<double, Tensor> cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) throw std::invalid_argument("cross_entropy: expected (B, C) logits");
    const std::size_t batch = logits.dim(0);
    const std::size_t classes = logits.dim(1);
    if (labels.size() != batch) throw std::invalid_argument("cross_entropy: label count mismatch");

    Tensor grad({batch, classes});
    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const int label = labels[b];
        if (label < 0 || static_cast<std::size_t>(label) >= classes) {
            throw std::invalid_argument("cross_entropy: label " + std::to_string(label) +
                                        " outside [0, " + std::to_string(classes) + ")");
        }
        const double* row = logits.data() + b * classes;
        double m = row[0];
        for (std::size_t c = 1; c < classes; ++c) m = std::max(m, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) sum += std::exp(row[c] - m);
        const double lse = m + std::log(sum);
        loss += lse - row[static_cast<std::size_t>(label)];

        double* grow = grad.data() + b * classes;
        for (std::size_t c = 0; c < classes; ++c) {
            grow[c] = std::exp(row[c] - lse) / static_cast<double>(batch);
        }
        grow[static_cast<std::size_t>(label)] -= 1.0 / static_cast<double>(batch);
    }
    return {loss / static_cast<double>(batch), std::move(grad)};
}

std::pair<double, double> metrics(const std::vector<int>& preds, const std::vector<int>& truth,
                                  int num_classes) {
    if (preds.empty() || preds.size() != truth.size()) {
        throw std::invalid_argument("metrics: empty or mismatched prediction/truth lists");
    }
    std::vector<std::size_t> per_class_total(static_cast<std::size_t>(num_classes), 0);
    std::vector<std::size_t> per_class_hit(static_cast<std::size_t>(num_classes), 0);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int t = truth[i];
        if (t < 0 || t >= num_classes) {
            throw std::invalid_argument("metrics: truth label out of range");
        }
        ++per_class_total[static_cast<std::size_t>(t)];
        if (preds[i] == t) {
            ++hits;
            ++per_class_hit[static_cast<std::size_t>(t)];
        }
    }
    const double oa = static_cast<double>(hits) / static_cast<double>(preds.size());
    double mca = 0.0;
    int present = 0;
    for (int c = 0; c < num_classes; ++c) {
        const std::size_t total = per_class_total[static_cast<std::size_t>(c)];
        if (total == 0) continue;
        mca += static_cast<double>(per_class_hit[static_cast<std::size_t>(c)]) /
               static_cast<double>(total);
        ++present;
    }
    return {oa, mca / static_cast<double>(present)};
}

std::vector<int> argmax_rows(const Tensor& logits) {
    const std::size_t batch = logits.dim(0);
    const std::size_t classes = logits.dim(1);
    std::vector<int> out(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = logits.data() + b * classes;
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c) {
            if (row[c] > row[best]) best = c;
        }
        out[b] = static_cast<int>(best);
    }
    return out;
}

namespace {

// Stacks the selected clouds into a (B, points, 3) batch, truncating each
// cloud to the first `points` rows.
Tensor make_batch(const Dataset& ds, const std::vector<std::size_t>& order, std::size_t first,
                  std::size_t count, std::size_t points, std::vector<int>& labels_out,
                  Rng* augment_rng) {
    Tensor batch({count, points, 3});
    labels_out.resize(count);
    for (std::size_t b = 0; b < count; ++b) {
        const PointCloud& cloud = ds.clouds[order[first + b]];
        if (cloud.points.dim(0) < points) {
            throw std::invalid_argument("batch assembly: cloud has " +
                                        std::to_string(cloud.points.dim(0)) +
                                        " points, need " + std::to_string(points));
        }
        Tensor pts({points, 3},
                   std::vector<double>(cloud.points.data(), cloud.points.data() + points * 3));
        if (augment_rng) augment(pts, *augment_rng);
        std::memcpy(batch.data() + b * points * 3, pts.data(), points * 3 * sizeof(double));
        labels_out[b] = cloud.label;
    }
    return batch;
}

std::string format_record(const EpochRecord& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "epoch=%d train_loss=%.17g train_oa=%.17g train_mca=%.17g "
                  "test_loss=%.17g test_oa=%.17g test_mca=%.17g wall_seconds=%.3f",
                  r.epoch, r.train_loss, r.train_oa, r.train_mca, r.test_loss, r.test_oa,
                  r.test_mca, r.wall_seconds);
    return buf;
}

std::vector<NamedTensor> momentum_tensors(PointClassifier& model) {
    std::vector<NamedTensor> out;
    for (Parameter* p : model.parameters()) {
        out.push_back({"opt.momentum." + p->name, p->momentum.shape(), p->momentum.vec()});
    }
    return out;
}

}  // namespace

EvalResult evaluate(PointClassifier& model, const Dataset& ds, const TrainConfig& cfg) {
    if (ds.clouds.empty()) throw std::invalid_argument("evaluate: empty dataset");
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);

    const int num_classes = static_cast<int>(model.config().num_classes);
    std::vector<int> preds;
    std::vector<int> truth;
    double loss_sum = 0.0;
    for (std::size_t first = 0; first < ds.size(); first += cfg.batch_size) {
        const std::size_t count = std::min(cfg.batch_size, ds.size() - first);
        std::vector<int> labels;
        const Tensor batch = make_batch(ds, order, first, count, cfg.points, labels, nullptr);
        const Tensor logits = model.forward(batch);
        auto [loss, grad] = cross_entropy(logits, labels);
        loss_sum += loss * static_cast<double>(count);
        const std::vector<int> batch_preds = argmax_rows(logits);
        preds.insert(preds.end(), batch_preds.begin(), batch_preds.end());
        truth.insert(truth.end(), labels.begin(), labels.end());
    }
    auto [oa, mca] = metrics(preds, truth, num_classes);
    return {loss_sum / static_cast<double>(ds.size()), oa, mca};
}

TrainResult train_loop(PointClassifier& model, const Dataset& train_ds, const Dataset& test_ds,
                       const TrainConfig& cfg, const std::filesystem::path& out_dir,
                       std::ostream* console,
                       const std::function<bool(const EpochRecord&)>& stop_early) {
    if (train_ds.clouds.empty()) throw std::invalid_argument("train_loop: empty train split");
    if (train_ds.size() < cfg.batch_size) {
        throw std::invalid_argument("train_loop: train split smaller than one batch");
    }
    std::filesystem::create_directories(out_dir);

    TrainResult result;
    result.log_path = out_dir / "epochs.log";
    result.best_checkpoint = out_dir / "best.kdk";
    result.final_checkpoint = out_dir / "final.kdk";

    std::ofstream log(result.log_path, std::ios::trunc);
    if (!log) throw std::runtime_error("train_loop: cannot open " + result.log_path.string());

    Rng rng(cfg.seed);
    const std::vector<Parameter*> params = model.parameters();
    const int num_classes = static_cast<int>(model.config().num_classes);
    const std::size_t num_batches = train_ds.size() / cfg.batch_size;  // partial batch dropped

    std::vector<std::size_t> order(train_ds.size());
    std::iota(order.begin(), order.end(), 0);

    double best_oa = -1.0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = effective_lr(cfg, epoch);

        rng.shuffle(order);
        double loss_sum = 0.0;
        std::vector<int> preds;
        std::vector<int> truth;
        for (std::size_t batch_idx = 0; batch_idx < num_batches; ++batch_idx) {
            try {
                std::vector<int> labels;
                const Tensor batch =
                    make_batch(train_ds, order, batch_idx * cfg.batch_size, cfg.batch_size,
                               cfg.points, labels, cfg.augment ? &rng : nullptr);
                const Tensor logits = model.forward(batch);
                auto [loss, grad_logits] = cross_entropy(logits, labels);
                if (!std::isfinite(loss)) throw std::runtime_error("non-finite loss");
                loss_sum += loss;
                const std::vector<int> batch_preds = argmax_rows(logits);
                preds.insert(preds.end(), batch_preds.begin(), batch_preds.end());
                truth.insert(truth.end(), labels.begin(), labels.end());

                model.backward(grad_logits);
                sgd_step(params, lr, cfg.momentum);
            } catch (const std::exception& e) {
                throw std::runtime_error("train_loop: epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batch_idx) + ": " +
                                         e.what());
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(num_batches);
        std::tie(rec.train_oa, rec.train_mca) = metrics(preds, truth, num_classes);
        if (!test_ds.clouds.empty()) {
            const EvalResult ev = evaluate(model, test_ds, cfg);
            rec.test_loss = ev.loss;
            rec.test_oa = ev.oa;
            rec.test_mca = ev.mca;
        }
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        log << format_record(rec) << "\n";
        log.flush();
        if (console) {
            char line[256];
            std::snprintf(line, sizeof(line),
                          "epoch %4d  train loss %.4f oa %.4f  test loss %.4f oa %.4f  (%.1fs)",
                          rec.epoch, rec.train_loss, rec.train_oa, rec.test_loss, rec.test_oa,
                          rec.wall_seconds);
            (*console) << line << "\n";
        }
        result.records.push_back(rec);

        if (rec.test_oa > best_oa) {
            best_oa = rec.test_oa;
            result.best_test_oa = best_oa;
            save_checkpoint(model, result.best_checkpoint, momentum_tensors(model));
        }
        if (stop_early && stop_early(rec)) break;
    }

    save_checkpoint(model, result.final_checkpoint, momentum_tensors(model));
    return result;
}

}  // namespace pointkan
