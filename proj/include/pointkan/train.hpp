#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <utility>
#include <vector>

#include "pointkan/data.hpp"
#include "pointkan/model.hpp"
#include "pointkan/tensor.hpp"

namespace pointkan {

struct TrainConfig {
    std::size_t batch_size = 16;
    int epochs = 250;
    double lr = 0.001;
    double momentum = 0.9;
    std::size_t points = 1024;
    std::uint64_t seed = 0;
    bool augment = true;
    // Off by default: when set, lr drops by 10x at 50% and again at 75% of
    // the epoch budget.
    bool lr_schedule = false;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_oa = 0.0;
    double train_mca = 0.0;
    double test_loss = 0.0;
    double test_oa = 0.0;
    double test_mca = 0.0;
    double wall_seconds = 0.0;
};

// Learning rate used at a given 1-based epoch. Constant unless lr_schedule
// is set.
double effective_lr(const TrainConfig& cfg, int epoch);

// Mean softmax cross-entropy over the batch (log-sum-exp stabilized) and its
// gradient (softmax - onehot) / batch.
std::pair<double, Tensor> cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// (overall accuracy, mean class accuracy); classes absent from truth are
// excluded from the MCA average.
std::pair<double, double> metrics(const std::vector<int>& preds, const std::vector<int>& truth,
                                  int num_classes);

std::vector<int> argmax_rows(const Tensor& logits);

struct EvalResult {
    double loss = 0.0;
    double oa = 0.0;
    double mca = 0.0;
};

// Augmentation-free evaluation over the whole dataset (partial final batch
// kept).
EvalResult evaluate(PointClassifier& model, const Dataset& ds, const TrainConfig& cfg);

struct TrainResult {
    std::vector<EpochRecord> records;
    std::filesystem::path log_path;
    std::filesystem::path best_checkpoint;
    std::filesystem::path final_checkpoint;
    double best_test_oa = 0.0;
};

// SGD-momentum training: seeded shuffle each epoch, train-split-only
// augmentation, partial batches dropped during training and kept during
// evaluation. Writes one epochs.log line per epoch plus best-by-test-OA and
// final checkpoints (optimizer momentum included) under out_dir. stop_early,
// when given, is consulted after each epoch.
TrainResult train_loop(PointClassifier& model, const Dataset& train_ds, const Dataset& test_ds,
                       const TrainConfig& cfg, const std::filesystem::path& out_dir,
                       std::ostream* console = nullptr,
                       const std::function<bool(const EpochRecord&)>& stop_early = {});

}  // namespace pointkan
