// pointkan command-line tool: dataset conversion, synthetic data, training,
// evaluation, gradient checking, and parameter accounting.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "pointkan/data.hpp"
#include "pointkan/gradcheck_suite.hpp"
#include "pointkan/model.hpp"
#include "pointkan/train.hpp"
#include "pointkan/util.hpp"
#include "pointkan/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pointkan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModelFlags {
    std::string layer = "kan";
    std::string basis = "jacobi";
    int degree = 3;
    double alpha = 1.0;
    double beta = 1.0;
    std::size_t k = 5;
    std::size_t edge_hidden = 128;
    std::size_t embedding = 1024;
    std::size_t classes = 40;
};

void add_model_flags(CLI::App* cmd, ModelFlags& f, bool with_classes) {
    cmd->add_option("--layer", f.layer, "Layer kind")
        ->check(CLI::IsMember({"kan", "mlp"}))
        ->capture_default_str();
    cmd->add_option("--basis", f.basis, "Polynomial basis (KAN only)")
        ->check(CLI::IsMember({"jacobi", "discrete-chebyshev"}))
        ->capture_default_str();
    cmd->add_option("--degree", f.degree, "Polynomial degree (KAN only)")
        ->capture_default_str();
    cmd->add_option("--alpha", f.alpha, "Jacobi alpha (KAN only)")->capture_default_str();
    cmd->add_option("--beta", f.beta, "Jacobi beta (KAN only)")->capture_default_str();
    cmd->add_option("--k", f.k, "Neighbors per point")->capture_default_str();
    cmd->add_option("--edge-hidden", f.edge_hidden, "EdgeConv output width")
        ->capture_default_str();
    cmd->add_option("--embedding", f.embedding, "Per-point embedding width")
        ->capture_default_str();
    if (with_classes) {
        cmd->add_option("--classes", f.classes, "Number of classes")->capture_default_str();
    }
}

ModelConfig to_model_config(const CLI::App* cmd, const ModelFlags& f) {
    ModelConfig cfg;
    cfg.layer_kind = f.layer == "kan" ? LayerKind::Kan : LayerKind::Mlp;
    if (cfg.layer_kind == LayerKind::Mlp) {
        for (const char* opt : {"--basis", "--degree", "--alpha", "--beta"}) {
            if (cmd->count(opt) > 0) {
                throw UsageError(std::string(opt) + " requires --layer kan");
            }
        }
    }
    cfg.basis.family =
        f.basis == "jacobi" ? BasisFamily::Jacobi : BasisFamily::DiscreteChebyshev;
    cfg.basis.degree = f.degree;
    cfg.basis.alpha = f.alpha;
    cfg.basis.beta = f.beta;
    cfg.k = f.k;
    cfg.edge_hidden = f.edge_hidden;
    cfg.embedding = f.embedding;
    cfg.num_classes = f.classes;
    return cfg;
}

std::uint64_t resolve_seed(const CLI::App* cmd, std::uint64_t flag_value) {
    if (cmd->count("--seed") > 0) return flag_value;
    std::random_device rd;
    const std::uint64_t seed =
        (static_cast<std::uint64_t>(rd()) << 32) ^ static_cast<std::uint64_t>(rd());
    std::cout << "seed: " << seed << " (generated)\n";
    return seed;
}

std::string timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

json model_config_json(const ModelConfig& cfg) {
    return json{{"layer_kind", cfg.layer_kind == LayerKind::Kan ? "kan" : "mlp"},
                {"basis_family", cfg.basis.family == BasisFamily::Jacobi
                                     ? "jacobi"
                                     : "discrete-chebyshev"},
                {"degree", cfg.basis.degree},
                {"alpha", cfg.basis.alpha},
                {"beta", cfg.basis.beta},
                {"k", cfg.k},
                {"edge_hidden", cfg.edge_hidden},
                {"embedding", cfg.embedding},
                {"num_classes", cfg.num_classes},
                {"input_dim", cfg.input_dim}};
}

Dataset load_split(const fs::path& data_dir, const char* name) {
    const fs::path path = data_dir / name;
    if (!fs::exists(path)) {
        throw std::runtime_error("missing cache file " + path.string());
    }
    return read_cache(path);
}

int run_params(const CLI::App* cmd, const ModelFlags& flags) {
    const ModelConfig cfg = to_model_config(cmd, flags);
    std::cout << PointClassifier::count_params(cfg) << "\n";
    return kExitOk;
}

int run_gradcheck(std::uint64_t seed, double tolerance) {
    const auto entries = run_gradcheck_suite(seed);
    std::vector<std::string> offenders;
    for (const auto& e : entries) {
        std::printf("%-44s max_rel_err %.3e\n", e.component.c_str(), e.max_error);
        if (!(e.max_error < tolerance)) offenders.push_back(e.component);
    }
    if (offenders.empty()) {
        std::printf("all %zu components below tolerance %.1e\n", entries.size(), tolerance);
        return kExitOk;
    }
    std::printf("%zu component(s) exceeded tolerance %.1e:\n", offenders.size(), tolerance);
    for (const auto& name : offenders) std::printf("  %s\n", name.c_str());
    return kExitRuntime;
}

int run_synth(const fs::path& out_dir, std::size_t classes, std::size_t per_class,
              std::size_t test_per_class, std::size_t points, std::uint64_t seed) {
    fs::create_directories(out_dir);
    const Dataset train = synth_dataset(per_class, points, seed, classes);
    // independent substream for the held-out split
    const Dataset test = synth_dataset(test_per_class, points, Rng::mix(seed, 0x7e57), classes);
    write_cache(out_dir / "train.kdc", train);
    write_cache(out_dir / "test.kdc", test);
    std::ofstream cf(out_dir / "classes.txt", std::ios::trunc);
    for (std::size_t c = 0; c < classes; ++c) cf << kSynthClassNames[c] << "\n";
    std::cout << "wrote " << train.size() << " train / " << test.size() << " test clouds to "
              << out_dir.string() << "\n";
    return kExitOk;
}

int run_convert(const fs::path& root, const fs::path& out_dir, std::size_t points,
                std::uint64_t seed) {
    const ConvertStats stats = convert_tree(root, out_dir, points, seed);
    std::cout << "converted " << stats.train_meshes << " train / " << stats.test_meshes
              << " test meshes across " << stats.classes << " classes into "
              << out_dir.string() << "\n";
    return kExitOk;
}

int run_train(const CLI::App* cmd, const ModelFlags& flags, const fs::path& data_dir,
              const fs::path& out_dir, TrainConfig train_cfg, std::uint64_t seed_flag) {
    ModelConfig cfg = to_model_config(cmd, flags);
    train_cfg.seed = resolve_seed(cmd, seed_flag);

    const Dataset train_ds = load_split(data_dir, "train.kdc");
    const Dataset test_ds = load_split(data_dir, "test.kdc");
    const int classes = std::max(train_ds.num_classes(), test_ds.num_classes());
    if (classes < 2) throw std::runtime_error("train: need at least two classes in the data");
    cfg.num_classes = static_cast<std::size_t>(classes);

    fs::create_directories(out_dir);
    PointClassifier model(cfg, Rng::mix(train_cfg.seed, 1));

    json manifest;
    manifest["toolkit_version"] = kVersionString;
    manifest["started_at"] = timestamp_utc();
    manifest["command"] = "train";
    manifest["seed"] = train_cfg.seed;
    manifest["data_dir"] = fs::absolute(data_dir).string();
    manifest["out_dir"] = fs::absolute(out_dir).string();
    manifest["model"] = model_config_json(cfg);
    manifest["train"] = json{{"batch_size", train_cfg.batch_size},
                             {"epochs", train_cfg.epochs},
                             {"lr", train_cfg.lr},
                             {"momentum", train_cfg.momentum},
                             {"points", train_cfg.points},
                             {"augment", train_cfg.augment},
                             {"lr_schedule", train_cfg.lr_schedule},
                             {"threads", num_threads()}};
    std::ofstream mf(out_dir / "manifest.json", std::ios::trunc);
    if (!mf) throw std::runtime_error("train: cannot write manifest.json");
    mf << manifest.dump(2) << "\n";
    mf.close();

    std::cout << "training " << (cfg.layer_kind == LayerKind::Kan ? cfg.basis.describe() : "mlp")
              << ", " << PointClassifier::count_params(cfg) << " parameters, "
              << train_ds.size() << " train / " << test_ds.size() << " test clouds\n";
    const TrainResult result = train_loop(model, train_ds, test_ds, train_cfg, out_dir,
                                          &std::cout);
    std::cout << "best test OA " << result.best_test_oa << "; checkpoints in "
              << out_dir.string() << "\n";
    return kExitOk;
}

int run_eval(const fs::path& checkpoint, const fs::path& data, std::size_t batch,
             std::size_t points_flag) {
    PointClassifier model = load_checkpoint(checkpoint);
    const fs::path cache = fs::is_directory(data) ? data / "test.kdc" : data;
    const Dataset ds = read_cache(cache);
    if (ds.clouds.empty()) throw std::runtime_error("eval: empty dataset " + cache.string());

    TrainConfig cfg;
    cfg.batch_size = batch;
    cfg.points = points_flag > 0 ? points_flag : ds.clouds.front().points.dim(0);
    const EvalResult r = evaluate(model, ds, cfg);
    std::printf("loss=%.17g oa=%.17g mca=%.17g\n", r.loss, r.oa, r.mca);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pointkan: polynomial-KAN dynamic-graph point-cloud classification"};
    app.set_version_flag("--version", kVersionString);
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "Train a classifier on a cached dataset");
    ModelFlags train_model;
    fs::path train_data;
    fs::path train_out = "run";
    TrainConfig train_cfg;
    std::uint64_t train_seed = 0;
    int train_threads = 1;
    bool no_augment = false;
    add_model_flags(train, train_model, /*with_classes=*/false);
    train->add_option("--data", train_data, "Cache directory (train.kdc/test.kdc)")->required();
    train->add_option("--out", train_out, "Output directory")->capture_default_str();
    train->add_option("--batch", train_cfg.batch_size, "Batch size")->capture_default_str();
    train->add_option("--epochs", train_cfg.epochs, "Epochs")->capture_default_str();
    train->add_option("--lr", train_cfg.lr, "Learning rate")->capture_default_str();
    train->add_option("--momentum", train_cfg.momentum, "SGD momentum")->capture_default_str();
    train->add_option("--points", train_cfg.points, "Points per cloud")->capture_default_str();
    train->add_option("--seed", train_seed, "RNG seed (generated when omitted)");
    train->add_option("--threads", train_threads, "Worker threads")->capture_default_str();
    train->add_flag("--lr-schedule", train_cfg.lr_schedule,
                    "Step lr decay at 50%/75% of epochs (off: constant lr)");
    train->add_flag("--no-augment", no_augment, "Disable train-split augmentation");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    fs::path eval_checkpoint;
    fs::path eval_data;
    std::size_t eval_batch = 16;
    std::size_t eval_points = 0;
    int eval_threads = 1;
    eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
    eval->add_option("--data", eval_data, "Cache file or directory")->required();
    eval->add_option("--batch", eval_batch, "Batch size")->capture_default_str();
    eval->add_option("--points", eval_points, "Points per cloud (0: use cache size)");
    eval->add_option("--threads", eval_threads, "Worker threads")->capture_default_str();

    // params
    auto* params = app.add_subcommand("params", "Print the trainable parameter count");
    ModelFlags params_model;
    add_model_flags(params, params_model, /*with_classes=*/true);

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
    std::uint64_t gc_seed = 0;
    double gc_tolerance = 1e-4;
    gradcheck->add_option("--seed", gc_seed, "RNG seed")->capture_default_str();
    gradcheck->add_option("--tolerance", gc_tolerance, "Max relative error")
        ->capture_default_str();

    // synth
    auto* synth = app.add_subcommand("synth", "Generate the synthetic shape dataset");
    fs::path synth_out = "synth";
    std::size_t synth_classes = 4;
    std::size_t synth_per_class = 50;
    std::size_t synth_test_per_class = 10;
    std::size_t synth_points = 256;
    std::uint64_t synth_seed = 0;
    synth->add_option("--out", synth_out, "Output directory")->capture_default_str();
    synth->add_option("--classes", synth_classes, "Classes (1..4)")->capture_default_str();
    synth->add_option("--per-class", synth_per_class, "Train clouds per class")
        ->capture_default_str();
    synth->add_option("--test-per-class", synth_test_per_class, "Test clouds per class")
        ->capture_default_str();
    synth->add_option("--points", synth_points, "Points per cloud")->capture_default_str();
    synth->add_option("--seed", synth_seed, "RNG seed")->capture_default_str();

    // convert
    auto* convert = app.add_subcommand("convert", "Convert an OFF tree to caches");
    fs::path convert_root;
    fs::path convert_out = "cache";
    std::size_t convert_points = 1024;
    std::uint64_t convert_seed = 0;
    int convert_threads = 1;
    convert->add_option("--modelnet", convert_root, "Dataset root (class/train|test/*.off)")
        ->required();
    convert->add_option("--out", convert_out, "Output directory")->capture_default_str();
    convert->add_option("--points", convert_points, "Points per cloud")->capture_default_str();
    convert->add_option("--seed", convert_seed, "RNG seed")->capture_default_str();
    convert->add_option("--threads", convert_threads, "Worker threads")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*params) return run_params(params, params_model);
        if (*gradcheck) return run_gradcheck(gc_seed, gc_tolerance);
        if (*synth) {
            return run_synth(synth_out, synth_classes, synth_per_class, synth_test_per_class,
                             synth_points, synth_seed);
        }
        if (*convert) {
            set_num_threads(convert_threads);
            return run_convert(convert_root, convert_out, convert_points, convert_seed);
        }
        if (*train) {
            set_num_threads(train_threads);
            train_cfg.augment = !no_augment;
            return run_train(train, train_model, train_data, train_out, train_cfg, train_seed);
        }
        if (*eval) {
            set_num_threads(eval_threads);
            return run_eval(eval_checkpoint, eval_data, eval_batch, eval_points);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
