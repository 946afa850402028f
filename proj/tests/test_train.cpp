#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>
#include <vector>

#include "doctest.h"
#include "pointkan/data.hpp"
#include "pointkan/gradcheck.hpp"
#include "pointkan/model.hpp"
#include "pointkan/rng.hpp"
#include "pointkan/train.hpp"

using namespace pointkan;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_model_config() {
    ModelConfig cfg;
    cfg.layer_kind = LayerKind::Kan;
    cfg.basis = {BasisFamily::Jacobi, 2, 1.0, 1.0};
    cfg.k = 3;
    cfg.edge_hidden = 8;
    cfg.embedding = 16;
    cfg.num_classes = 4;
    return cfg;
}

TrainConfig tiny_train_config() {
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 2;
    cfg.points = 32;
    cfg.seed = 5;
    return cfg;
}

fs::path temp_dir(const char* leaf) {
    const fs::path dir = fs::temp_directory_path() / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_text(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::string strip_wall_seconds(std::string text) {
    return std::regex_replace(text, std::regex(" wall_seconds=[^\n]*"), "");
}

}  // namespace

TEST_CASE("cross entropy of uniform logits is ln C") {
    const Tensor logits({2, 4});
    auto [loss, grad] = cross_entropy(logits, {1, 3});
    CHECK(loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t c = 0; c < 4; ++c) {
            const double expect = (0.25 - ((b == 0 && c == 1) || (b == 1 && c == 3) ? 1.0 : 0.0)) / 2.0;
            CHECK(grad.at(b, c) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("cross entropy stays non-negative and tiny for confident logits") {
    const Tensor logits({1, 2}, {10.0, -10.0});
    auto [loss, grad] = cross_entropy(logits, {0});
    CHECK(loss >= 0.0);
    CHECK(loss == doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-9));
    CHECK(loss < 1e-8);
}

TEST_CASE("cross entropy gradient matches finite differences") {
    Rng rng(3);
    Tensor logits({4, 6});
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = rng.uniform(-2.0, 2.0);
    std::vector<int> labels = {0, 5, 2, 2};
    const Tensor analytic = cross_entropy(logits, labels).second;
    auto f = [&](const Tensor& candidate) { return cross_entropy(candidate, labels).first; };
    CHECK(finite_diff_check(f, logits, analytic, 1e-6) < 1e-6);
}

TEST_CASE("cross entropy gradient rows sum to zero") {
    Rng rng(7);
    Tensor logits({5, 9});
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = rng.uniform(-3.0, 3.0);
    std::vector<int> labels = {1, 0, 8, 4, 4};
    const Tensor grad = cross_entropy(logits, labels).second;
    for (std::size_t b = 0; b < 5; ++b) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 9; ++c) sum += grad.at(b, c);
        CHECK(std::abs(sum) < 1e-12);
    }
}

TEST_CASE("cross entropy rejects invalid labels") {
    const Tensor logits({1, 3});
    CHECK_THROWS_AS(cross_entropy(logits, {3}), std::invalid_argument);
    CHECK_THROWS_AS(cross_entropy(logits, {-1}), std::invalid_argument);
}

TEST_CASE("metrics frozen examples") {
    SUBCASE("perfect predictions") {
        auto [oa, mca] = metrics({2, 1, 0}, {2, 1, 0}, 3);
        CHECK(oa == 1.0);
        CHECK(mca == 1.0);
    }
    SUBCASE("one error across two classes") {
        auto [oa, mca] = metrics({1, 1, 0}, {1, 0, 0}, 2);
        CHECK(oa == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(mca == doctest::Approx(0.75).epsilon(1e-12));
    }
    SUBCASE("single present class, half correct") {
        auto [oa, mca] = metrics({0, 1}, {0, 0}, 5);
        CHECK(oa == 0.5);
        CHECK(mca == 0.5);  // absent classes excluded from the average
    }
    SUBCASE("empty input") {
        CHECK_THROWS_AS(metrics({}, {}, 3), std::invalid_argument);
    }
}

TEST_CASE("effective lr is constant without the schedule flag") {
    TrainConfig cfg;
    cfg.lr = 0.001;
    cfg.epochs = 250;
    for (int e = 1; e <= cfg.epochs; ++e) CHECK(effective_lr(cfg, e) == 0.001);
    cfg.lr_schedule = true;
    CHECK(effective_lr(cfg, 1) == 0.001);
    CHECK(effective_lr(cfg, 126) == doctest::Approx(0.0001));
    CHECK(effective_lr(cfg, 200) == doctest::Approx(0.00001));
}

TEST_CASE("train_loop with lr=0 leaves parameter values bit-identical") {
    const Dataset train = synth_dataset(4, 32, 77);
    const Dataset test = synth_dataset(1, 32, 78);
    PointClassifier model(tiny_model_config(), 5);
    std::vector<std::vector<double>> before;
    for (Parameter* p : model.parameters()) before.push_back(p->value.vec());

    TrainConfig cfg = tiny_train_config();
    cfg.lr = 0.0;
    cfg.epochs = 1;
    const fs::path out = temp_dir("pointkan_train_lr0");
    train_loop(model, train, test, cfg, out);

    auto params = model.parameters();
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t i = 0; i < params[p]->value.size(); ++i) {
            CHECK(params[p]->value[i] == before[p][i]);
        }
    }
}

TEST_CASE("train_loop identical seeds give identical records, logs and checkpoints") {
    const Dataset train = synth_dataset(4, 32, 11);
    const Dataset test = synth_dataset(2, 32, 12);
    const TrainConfig cfg = tiny_train_config();

    const fs::path out1 = temp_dir("pointkan_train_rep1");
    const fs::path out2 = temp_dir("pointkan_train_rep2");
    PointClassifier m1(tiny_model_config(), 42);
    PointClassifier m2(tiny_model_config(), 42);
    const TrainResult r1 = train_loop(m1, train, test, cfg, out1);
    const TrainResult r2 = train_loop(m2, train, test, cfg, out2);

    REQUIRE(r1.records.size() == r2.records.size());
    for (std::size_t e = 0; e < r1.records.size(); ++e) {
        CHECK(r1.records[e].train_loss == r2.records[e].train_loss);
        CHECK(r1.records[e].train_oa == r2.records[e].train_oa);
        CHECK(r1.records[e].train_mca == r2.records[e].train_mca);
        CHECK(r1.records[e].test_loss == r2.records[e].test_loss);
        CHECK(r1.records[e].test_oa == r2.records[e].test_oa);
        CHECK(r1.records[e].test_mca == r2.records[e].test_mca);
    }
    CHECK(strip_wall_seconds(read_text(r1.log_path)) ==
          strip_wall_seconds(read_text(r2.log_path)));
    CHECK(read_text(r1.best_checkpoint) == read_text(r2.best_checkpoint));
    CHECK(read_text(r1.final_checkpoint) == read_text(r2.final_checkpoint));
}

TEST_CASE("evaluation path is augmentation-free and deterministic") {
    const Dataset test = synth_dataset(3, 32, 13);
    PointClassifier model(tiny_model_config(), 21);
    TrainConfig cfg = tiny_train_config();
    const EvalResult a = evaluate(model, test, cfg);
    const EvalResult b = evaluate(model, test, cfg);
    CHECK(a.loss == b.loss);
    CHECK(a.oa == b.oa);
    CHECK(a.mca == b.mca);
}

TEST_CASE("training reduces loss on the synthetic dataset") {
    const Dataset train = synth_dataset(6, 48, 31);
    const Dataset test = synth_dataset(2, 48, 32);
    PointClassifier model(tiny_model_config(), 3);
    TrainConfig cfg = tiny_train_config();
    cfg.points = 48;
    cfg.epochs = 10;
    cfg.batch_size = 8;
    const fs::path out = temp_dir("pointkan_train_descent");
    const TrainResult r = train_loop(model, train, test, cfg, out);
    REQUIRE(r.records.size() == 10);
    CHECK(r.records.back().train_loss < r.records.front().train_loss);
    for (const EpochRecord& rec : r.records) {
        CHECK(rec.train_oa >= 0.0);
        CHECK(rec.train_oa <= 1.0);
        CHECK(rec.test_mca >= 0.0);
        CHECK(rec.test_mca <= 1.0);
    }
}

TEST_CASE("train_loop aborts on non-finite loss with context") {
    const Dataset train = synth_dataset(2, 32, 41);
    const Dataset test = synth_dataset(1, 32, 42);
    PointClassifier model(tiny_model_config(), 9);
    model.parameters()[0]->value[0] = std::nan("");
    TrainConfig cfg = tiny_train_config();
    const fs::path out = temp_dir("pointkan_train_nan");
    CHECK_THROWS_WITH_AS(train_loop(model, train, test, cfg, out),
                         doctest::Contains("epoch"), std::runtime_error);
}

TEST_CASE("train_loop stop_early hook ends the run after the epoch") {
    const Dataset train = synth_dataset(4, 32, 51);
    const Dataset test = synth_dataset(1, 32, 52);
    PointClassifier model(tiny_model_config(), 15);
    TrainConfig cfg = tiny_train_config();
    cfg.epochs = 50;
    const fs::path out = temp_dir("pointkan_train_stop");
    const TrainResult r = train_loop(model, train, test, cfg, out, nullptr,
                                     [](const EpochRecord& rec) { return rec.epoch == 3; });
    CHECK(r.records.size() == 3);
}
