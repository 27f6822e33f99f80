#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "plae/artifacts.hpp"
#include "plae/checkpoint.hpp"

using namespace plae;
namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* env = std::getenv("PLAE_BIN");
    return env ? env : "";
}

int run_cli(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
    const int ret = std::system(cmd.c_str());
    return ret < 0 ? ret : (ret >> 8) & 0xff;
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_config(const fs::path& path, const std::string& extra) {
    std::ofstream os(path);
    os << "dataset = synthetic\n"
          "synthetic_per_class = 10\n"
          "synthetic_test_per_class = 5\n"
          "epochs = 2\n"
          "batch_size = 10\n"
          "embedding_dim = 8\n"
          "arch = desk64\n"
       << extra;
}

} // namespace

TEST_CASE("cli trains and writes the run artifacts") {
    if (cli_path().empty()) {
        FAIL("PLAE_BIN not set");
        return;
    }
    const fs::path dir = fresh_dir("plae_cli_train");
    write_config(dir / "run.cfg", "regime = bae\nout_dir = " + (dir / "out").string() + "\n");
    REQUIRE(run_cli("train --config " + (dir / "run.cfg").string()) == 0);
    for (const char* artifact :
         {"metrics.csv", "timings.csv", "bestfit.json", "checkpoint.plae", "resolved.cfg",
          "manifest.json"}) {
        INFO(artifact);
        CHECK(fs::exists(dir / "out" / artifact));
    }
    // one metrics row per epoch
    const std::string metrics = read_text_file((dir / "out" / "metrics.csv").string());
    CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 3); // header + 2 epochs
    fs::remove_all(dir);
}

TEST_CASE("cli exits 2 on config errors and missing files") {
    if (cli_path().empty()) {
        FAIL("PLAE_BIN not set");
        return;
    }
    const fs::path dir = fresh_dir("plae_cli_errors");
    CHECK(run_cli("train --config " + (dir / "nope.cfg").string()) == 2);

    write_config(dir / "bad.cfg", "regime = levitation\n");
    CHECK(run_cli("train --config " + (dir / "bad.cfg").string()) == 2);

    std::ofstream(dir / "missing_data.cfg")
        << "dataset = mnist\n"
           "mnist_train_images = /nonexistent/a\n"
           "mnist_train_labels = /nonexistent/b\n"
           "mnist_test_images = /nonexistent/c\n"
           "mnist_test_labels = /nonexistent/d\n";
    CHECK(run_cli("train --config " + (dir / "missing_data.cfg").string()) == 2);

    CHECK(run_cli("train") == 2);            // missing required option
    CHECK(run_cli("transmogrify") == 2);     // unknown subcommand
    fs::remove_all(dir);
}

TEST_CASE("plae with identity policy and pae write byte-identical metrics") {
    if (cli_path().empty()) {
        FAIL("PLAE_BIN not set");
        return;
    }
    const fs::path dir = fresh_dir("plae_cli_equiv");
    write_config(dir / "run.cfg", "perceptual = seeded-desk\n");
    const std::string base = "train --config " + (dir / "run.cfg").string();
    REQUIRE(run_cli(base + " --set regime=pae --set out_dir=" + (dir / "pae").string()) == 0);
    REQUIRE(run_cli(base + " --set regime=plae --set policy=identity --set out_dir=" +
                    (dir / "plae").string()) == 0);
    const std::string a = read_text_file((dir / "pae" / "metrics.csv").string());
    const std::string b = read_text_file((dir / "plae" / "metrics.csv").string());
    CHECK(a == b);
    CHECK(!a.empty());
    fs::remove_all(dir);
}

TEST_CASE("cli metrics are byte-stable across identical runs") {
    if (cli_path().empty()) {
        FAIL("PLAE_BIN not set");
        return;
    }
    const fs::path dir = fresh_dir("plae_cli_repro");
    write_config(dir / "run.cfg", "regime = plae\npolicy = mnist\nperceptual = seeded-desk\n");
    const std::string base = "train --config " + (dir / "run.cfg").string();
    REQUIRE(run_cli(base + " --set out_dir=" + (dir / "r1").string()) == 0);
    REQUIRE(run_cli(base + " --set out_dir=" + (dir / "r2").string()) == 0);
    CHECK(read_text_file((dir / "r1" / "metrics.csv").string()) ==
          read_text_file((dir / "r2" / "metrics.csv").string()));
    CHECK(read_text_file((dir / "r1" / "bestfit.json").string()) ==
          read_text_file((dir / "r2" / "bestfit.json").string()));
    fs::remove_all(dir);
}

TEST_CASE("cli eval agrees with the final training metric and is stable") {
    if (cli_path().empty()) {
        FAIL("PLAE_BIN not set");
        return;
    }
    const fs::path dir = fresh_dir("plae_cli_eval");
    write_config(dir / "run.cfg",
                 "regime = plae\npolicy = mnist\nperceptual = seeded-desk\nout_dir = " +
                     (dir / "out").string() + "\n");
    REQUIRE(run_cli("train --config " + (dir / "run.cfg").string()) == 0);

    const std::string metrics = read_text_file((dir / "out" / "metrics.csv").string());
    const auto last_comma = metrics.find_last_of(',');
    const double final_acc = std::stod(metrics.substr(last_comma + 1));

    const std::string eval_base = "eval --config " + (dir / "run.cfg").string() +
                                  " --checkpoint " + (dir / "out" / "checkpoint.plae").string();
    REQUIRE(run_cli(eval_base + " --set out_dir=" + (dir / "e1").string()) == 0);
    REQUIRE(run_cli(eval_base + " --set out_dir=" + (dir / "e2").string()) == 0);
    const std::string e1 = read_text_file((dir / "e1" / "eval.json").string());
    const std::string e2 = read_text_file((dir / "e2" / "eval.json").string());
    CHECK(e1 == e2);

    const auto acc_pos = e1.find("\"accuracy\": ");
    const double eval_acc = std::stod(e1.substr(acc_pos + 12));
    CHECK(eval_acc == doctest::Approx(final_acc).epsilon(1e-9));

    // changing only the probe seed barely moves the desk accuracy
    REQUIRE(run_cli(eval_base + " --set probe_seed=99 --set out_dir=" + (dir / "e3").string()) ==
            0);
    const std::string e3 = read_text_file((dir / "e3" / "eval.json").string());
    const double seeded_acc = std::stod(e3.substr(e3.find("\"accuracy\": ") + 12));
    CHECK(std::fabs(seeded_acc - eval_acc) < 0.01);

    // architecture mismatch is a usage error
    CHECK(run_cli("eval --config " + (dir / "run.cfg").string() + " --checkpoint " +
                  (dir / "out" / "checkpoint.plae").string() + " --set arch=desk16") == 2);
    fs::remove_all(dir);
}

TEST_CASE("cli writes interval checkpoints when asked") {
    if (cli_path().empty()) {
        FAIL("PLAE_BIN not set");
        return;
    }
    const fs::path dir = fresh_dir("plae_cli_ckpt");
    write_config(dir / "run.cfg",
                 "regime = bae\ncheckpoint_every = 1\nepochs = 3\nout_dir = " +
                     (dir / "out").string() + "\n");
    REQUIRE(run_cli("train --config " + (dir / "run.cfg").string() + " --set epochs=3") == 0);
    CHECK(fs::exists(dir / "out" / "checkpoint_epoch_0.plae"));
    CHECK(fs::exists(dir / "out" / "checkpoint_epoch_1.plae"));
    CHECK(fs::exists(dir / "out" / "checkpoint_epoch_2.plae"));
    CHECK(fs::exists(dir / "out" / "checkpoint.plae"));
    fs::remove_all(dir);
}

TEST_CASE("cli eval exports encodings with a labels sidecar") {
    if (cli_path().empty()) {
        FAIL("PLAE_BIN not set");
        return;
    }
    const fs::path dir = fresh_dir("plae_cli_export");
    write_config(dir / "run.cfg", "regime = bae\nout_dir = " + (dir / "out").string() + "\n");
    REQUIRE(run_cli("train --config " + (dir / "run.cfg").string()) == 0);
    REQUIRE(run_cli("eval --config " + (dir / "run.cfg").string() + " --checkpoint " +
                    (dir / "out" / "checkpoint.plae").string() + " --export-encodings --set out_dir=" +
                    (dir / "e").string()) == 0);
    CHECK(fs::exists(dir / "e" / "encodings.plae"));
    const std::string labels = read_text_file((dir / "e" / "labels.csv").string());
    // header + 20 train + 10 test rows
    CHECK(std::count(labels.begin(), labels.end(), '\n') == 31);
    CHECK(labels.find("split,index,label\n") == 0);

    auto records = load_records((dir / "e" / "encodings.plae").string());
    REQUIRE(records.size() == 2);
    CHECK(records[0].name == "train.encodings");
    CHECK(records[0].tensor.shape() == Shape{20, 8});
    CHECK(records[1].tensor.shape() == Shape{10, 8});
    fs::remove_all(dir);
}

TEST_CASE("cli grid writes a reproducible matrix and ranked lists") {
    if (cli_path().empty()) {
        FAIL("PLAE_BIN not set");
        return;
    }
    const fs::path dir = fresh_dir("plae_cli_grid");
    write_config(dir / "run.cfg",
                 "regime = plae\npolicy = mnist\nperceptual = seeded-desk\n"
                 "synthetic_per_class = 8\nbatch_size = 8\n");
    const std::string base = "grid --config " + (dir / "run.cfg").string() +
                             " --transforms rotation,cutout,gaussian_noise --epochs 1";
    REQUIRE(run_cli(base + " --set out_dir=" + (dir / "g1").string()) == 0);
    REQUIRE(run_cli(base + " --jobs 2 --set out_dir=" + (dir / "g2").string()) == 0);

    const std::string g1 = read_text_file((dir / "g1" / "grid.csv").string());
    const std::string g2 = read_text_file((dir / "g2" / "grid.csv").string());
    CHECK(g1 == g2);

    // 3x3 header + 3 rows; 6 populated cells -> ranked list of 6
    CHECK(std::count(g1.begin(), g1.end(), '\n') == 4);
    const std::string ranked = read_text_file((dir / "g1" / "ranked.csv").string());
    CHECK(std::count(ranked.begin(), ranked.end(), '\n') == 7);
    CHECK(fs::exists(dir / "g1" / "top10.csv"));
    fs::remove_all(dir);
}
