#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "plae/artifacts.hpp"
#include "plae/config.hpp"
#include "plae/grid.hpp"

namespace fs = std::filesystem;
using namespace plae;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

std::map<std::string, std::string> hash_inputs(const ExperimentConfig& cfg) {
    std::map<std::string, std::string> shas;
    for (const auto& path : cfg.input_files()) shas[path] = sha256_file(path);
    return shas;
}

void write_run_manifest(const ExperimentConfig& cfg, const fs::path& dir) {
    const std::string resolved = cfg.resolved_text();
    write_text_file((dir / "resolved.cfg").string(), resolved);
    const std::string config_sha = sha256_hex(
        {reinterpret_cast<const std::uint8_t*>(resolved.data()), resolved.size()});
    write_text_file((dir / "manifest.json").string(),
                    manifest_json(config_sha, hash_inputs(cfg)));
}

int cmd_train(const CommonArgs& args) {
    ExperimentConfig cfg = ExperimentConfig::from_file(args.config_path, args.overrides);
    TrainConfig tc = cfg.train_config();
    validate_config(tc);
    DataBundle data = cfg.load_data();

    const fs::path dir = cfg.out_dir();
    fs::create_directories(dir);
    write_run_manifest(cfg, dir);

    const int ckpt_every = cfg.checkpoint_every();
    if (ckpt_every > 0) {
        tc.epoch_hook = [&dir, ckpt_every](int epoch, const TrainedModels& models,
                                           const Adam& opt) {
            if ((epoch + 1) % ckpt_every != 0) return;
            save_checkpoint((dir / ("checkpoint_epoch_" + std::to_string(epoch) + ".plae")).string(),
                            models.parameters(), &opt);
        };
    }

    TrainResult result = train(tc, data);

    write_text_file((dir / "metrics.csv").string(),
                    metrics_csv(result.metrics, data.train.name(), tc.embedding_dim));
    write_text_file((dir / "timings.csv").string(), timings_csv(result.metrics));

    int accuracy_points = 0;
    for (const auto& m : result.metrics) accuracy_points += m.accuracy ? 1 : 0;
    if (accuracy_points >= 2) {
        write_text_file((dir / "bestfit.json").string(),
                        bestfit_json(best_fit_line(result.metrics)));
    }

    save_checkpoint((dir / "checkpoint.plae").string(), result.models.parameters(),
                    result.optimizer ? &*result.optimizer : nullptr);

    const auto& last = result.metrics.back();
    std::cout << "trained " << regime_name(tc.regime) << " on " << data.train.name() << " for "
              << tc.epochs << " epochs; final loss " << format_double(last.mean_loss);
    if (last.accuracy) std::cout << ", accuracy " << format_double(*last.accuracy);
    std::cout << "\nartifacts in " << dir.string() << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_path, bool export_encodings) {
    ExperimentConfig cfg = ExperimentConfig::from_file(args.config_path, args.overrides);
    TrainConfig tc = cfg.train_config();
    DataBundle data = cfg.load_data();

    Encoder encoder(tc.arch, tc.embedding_dim, tc.seed_init);
    load_checkpoint(checkpoint_path, encoder.parameters());

    const double accuracy = evaluate_probe(encoder, data.train, data.test, tc.probe);

    std::string json = "{\"accuracy\": " + format_double(accuracy) +
                       ", \"probe\": {\"solver\": \"" + probe_solver_name(tc.probe.solver) +
                       "\", \"lambda\": " + format_double(tc.probe.lambda) +
                       ", \"iters\": " + std::to_string(tc.probe.max_iters) +
                       ", \"lr\": " + format_double(tc.probe.learning_rate) +
                       ", \"seed\": " + std::to_string(tc.probe.seed) + "}}\n";
    std::cout << json;

    const fs::path dir = cfg.out_dir();
    fs::create_directories(dir);
    write_run_manifest(cfg, dir);
    write_text_file((dir / "eval.json").string(), json);

    if (export_encodings) {
        auto [train_enc, train_labels] = encode_split(encoder, data.train);
        auto [test_enc, test_labels] = encode_split(encoder, data.test);
        save_records((dir / "encodings.plae").string(),
                     {{"train.encodings", train_enc}, {"test.encodings", test_enc}});
        std::ostringstream labels;
        labels << "split,index,label\n";
        for (std::size_t i = 0; i < train_labels.size(); ++i) {
            labels << "train," << i << "," << train_labels[i] << "\n";
        }
        for (std::size_t i = 0; i < test_labels.size(); ++i) {
            labels << "test," << i << "," << test_labels[i] << "\n";
        }
        write_text_file((dir / "labels.csv").string(), labels.str());
    }
    return 0;
}

int cmd_grid(const CommonArgs& args, const std::string& transforms, int epochs, int jobs) {
    ExperimentConfig cfg = ExperimentConfig::from_file(args.config_path, args.overrides);
    TrainConfig tc = cfg.train_config();
    if (!tc.extractor) throw ConfigError("grid search needs a perceptual extractor");
    DataBundle data = cfg.load_data();

    std::vector<TransformKind> singles;
    if (transforms.empty()) {
        singles = table1_transforms(cfg.dataset_name());
    } else {
        std::stringstream ss(transforms);
        std::string item;
        while (std::getline(ss, item, ',')) {
            singles.push_back(TransformSpec::parse(item).first.kind);
        }
    }

    GridResult grid = grid_search(singles, tc, data, epochs, jobs);

    const fs::path dir = cfg.out_dir();
    fs::create_directories(dir);
    write_run_manifest(cfg, dir);
    write_text_file((dir / "grid.csv").string(), grid.to_csv());
    write_text_file((dir / "ranked.csv").string(), grid.ranked_csv());
    write_text_file((dir / "top10.csv").string(), grid.top10_csv());
    std::cout << "grid over " << singles.size() << " transforms done; artifacts in "
              << dir.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pseudo-labelling autoencoder experiments"};
    app.require_subcommand(1);

    CommonArgs train_args, eval_args, grid_args;
    std::string checkpoint_path, transforms;
    int grid_epochs = 30;
    int jobs = 1;

    auto* train_cmd = app.add_subcommand("train", "train one regime from a config file");
    train_cmd->add_option("--config", train_args.config_path, "config file")->required();
    train_cmd->add_option("--set", train_args.overrides, "override: key=value");

    auto* eval_cmd = app.add_subcommand("eval", "linear-probe accuracy of a checkpoint");
    eval_cmd->add_option("--config", eval_args.config_path, "config file")->required();
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint path")->required();
    eval_cmd->add_option("--set", eval_args.overrides, "override: key=value");
    bool export_encodings = false;
    eval_cmd->add_flag("--export-encodings", export_encodings,
                       "write encodings.plae and a labels.csv sidecar");

    auto* grid_cmd = app.add_subcommand("grid", "augmentation grid search");
    grid_cmd->add_option("--config", grid_args.config_path, "config file")->required();
    grid_cmd->add_option("--transforms", transforms, "comma list (default: dataset table)");
    grid_cmd->add_option("--epochs", grid_epochs, "epochs per grid run");
    grid_cmd->add_option("--jobs", jobs, "parallel runs");
    grid_cmd->add_option("--set", grid_args.overrides, "override: key=value");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_args);
        if (eval_cmd->parsed()) return cmd_eval(eval_args, checkpoint_path, export_encodings);
        if (grid_cmd->parsed()) return cmd_grid(grid_args, transforms, grid_epochs, jobs);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
