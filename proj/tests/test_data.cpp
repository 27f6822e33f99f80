#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "plae/data.hpp"
#include "plae/probe.hpp"

using namespace plae;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream os(path, std::ios::binary);
    os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

void push_be_u32(std::vector<unsigned char>& v, std::uint32_t x) {
    v.push_back((unsigned char)(x >> 24));
    v.push_back((unsigned char)(x >> 16));
    v.push_back((unsigned char)(x >> 8));
    v.push_back((unsigned char)(x));
}

// one-image IDX pair with a 2x2 "image"
std::pair<std::filesystem::path, std::filesystem::path> tiny_idx(
    std::vector<unsigned char> pixels, std::uint32_t img_magic = 0x00000803u) {
    std::vector<unsigned char> img;
    push_be_u32(img, img_magic);
    push_be_u32(img, 1);
    push_be_u32(img, 2);
    push_be_u32(img, 2);
    img.insert(img.end(), pixels.begin(), pixels.end());
    auto ipath = temp_path("plae_idx_img.bin");
    write_bytes(ipath, img);

    std::vector<unsigned char> lab;
    push_be_u32(lab, 0x00000801u);
    push_be_u32(lab, 1);
    lab.push_back(5);
    auto lpath = temp_path("plae_idx_lab.bin");
    write_bytes(lpath, lab);
    return {ipath, lpath};
}

const char* mnist_dir() { return std::getenv("PLAE_MNIST_DIR"); }
const char* cifar_dir() { return std::getenv("PLAE_CIFAR_DIR"); }

} // namespace

TEST_CASE("load_idx scales bytes to [0,1]") {
    auto [ipath, lpath] = tiny_idx({0, 255, 128, 64});
    auto [raw, labels] = load_idx(ipath.string(), lpath.string());
    REQUIRE(raw.count == 1);
    REQUIRE(raw.height == 2);
    REQUIRE(raw.width == 2);
    CHECK(raw.pixels[0] == 0.0f);
    CHECK(raw.pixels[1] == 1.0f);
    CHECK(raw.pixels[2] == doctest::Approx(0.50196f).epsilon(1e-4));
    CHECK(raw.pixels[3] == doctest::Approx(0.25098f).epsilon(1e-4));
    CHECK(labels == std::vector<int>{5});
    std::filesystem::remove(ipath);
    std::filesystem::remove(lpath);
}

TEST_CASE("load_idx names an offending magic number") {
    auto [ipath, lpath] = tiny_idx({0, 0, 0, 0}, 0x00000804u);
    try {
        load_idx(ipath.string(), lpath.string());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("0x00000804") != std::string::npos);
    }
    std::filesystem::remove(ipath);
    std::filesystem::remove(lpath);
}

TEST_CASE("load_idx rejects truncation and count mismatch") {
    // truncated image payload
    std::vector<unsigned char> img;
    push_be_u32(img, 0x00000803u);
    push_be_u32(img, 2);
    push_be_u32(img, 2);
    push_be_u32(img, 2);
    img.insert(img.end(), {1, 2, 3}); // needs 8 bytes
    auto ipath = temp_path("plae_idx_trunc.bin");
    write_bytes(ipath, img);
    std::vector<unsigned char> lab;
    push_be_u32(lab, 0x00000801u);
    push_be_u32(lab, 2);
    lab.insert(lab.end(), {0, 1});
    auto lpath = temp_path("plae_idx_lab2.bin");
    write_bytes(lpath, lab);
    CHECK_THROWS_AS(load_idx(ipath.string(), lpath.string()), ParseError);

    // count mismatch between the pair
    auto [ipath2, lpath2] = tiny_idx({1, 2, 3, 4});
    std::vector<unsigned char> lab3;
    push_be_u32(lab3, 0x00000801u);
    push_be_u32(lab3, 2);
    lab3.insert(lab3.end(), {0, 1});
    write_bytes(lpath2, lab3);
    CHECK_THROWS_AS(load_idx(ipath2.string(), lpath2.string()), ParseError);

    std::filesystem::remove(ipath);
    std::filesystem::remove(lpath);
    std::filesystem::remove(ipath2);
    std::filesystem::remove(lpath2);
}

TEST_CASE("official MNIST training file has 60000 images") {
    if (!mnist_dir()) {
        MESSAGE("PLAE_MNIST_DIR not set; skipping the official-file check");
        return;
    }
    const std::string dir = mnist_dir();
    auto [raw, labels] = load_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
    CHECK(raw.count == 60000);
    CHECK(labels.size() == 60000);
}

TEST_CASE("load_cifar_bin decodes a synthetic record") {
    std::vector<unsigned char> rec(3073, 255);
    rec[0] = 7;
    auto path = temp_path("plae_cifar_one.bin");
    write_bytes(path, rec);
    auto [raw, labels] = load_cifar_bin({path.string()});
    REQUIRE(raw.count == 1);
    CHECK(labels == std::vector<int>{7});
    for (float v : raw.pixels) CHECK(v == 1.0f);
    std::filesystem::remove(path);
}

TEST_CASE("load_cifar_bin accepts empty files and rejects ragged ones") {
    auto empty = temp_path("plae_cifar_empty.bin");
    write_bytes(empty, {});
    auto [raw, labels] = load_cifar_bin({empty.string()});
    CHECK(raw.count == 0);
    CHECK(labels.empty());
    std::filesystem::remove(empty);

    auto ragged = temp_path("plae_cifar_ragged.bin");
    write_bytes(ragged, std::vector<unsigned char>(3072, 0));
    CHECK_THROWS_AS(load_cifar_bin({ragged.string()}), ParseError);
    std::filesystem::remove(ragged);
}

TEST_CASE("official CIFAR-10 training batches have 50000 images") {
    if (!cifar_dir()) {
        MESSAGE("PLAE_CIFAR_DIR not set; skipping the official-file check");
        return;
    }
    const std::string dir = cifar_dir();
    std::vector<std::string> files;
    for (int i = 1; i <= 5; ++i) files.push_back(dir + "/data_batch_" + std::to_string(i) + ".bin");
    auto [raw, labels] = load_cifar_bin(files);
    CHECK(raw.count == 50000);
}

TEST_CASE("preprocess keeps constants and tiles quadrants") {
    RawImages raw;
    raw.count = 1;
    raw.channels = 1;
    raw.height = 28;
    raw.width = 28;
    raw.pixels.assign(28 * 28, 0.5f);
    Dataset ds = preprocess(raw, DatasetKind::Mnist, {3});
    REQUIRE(ds.size() == 1);
    REQUIRE(ds.side() == 64);
    for (float v : ds.images().data()) CHECK(v == doctest::Approx(0.5f));
}

TEST_CASE("preprocessed images have four identical quadrants and equal channels") {
    RawImages raw;
    raw.count = 2;
    raw.channels = 1;
    raw.height = 28;
    raw.width = 28;
    raw.pixels.resize(2 * 28 * 28);
    for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
        raw.pixels[i] = float((i * 37) % 256) / 255.0f;
    }
    Dataset ds = preprocess(raw, DatasetKind::Mnist, {0, 1});
    auto img = ds.images().data();
    for (int n = 0; n < 2; ++n) {
        for (int c = 0; c < 3; ++c) {
            const float* plane = img.data() + (std::size_t(n) * 3 + c) * 64 * 64;
            for (int y = 0; y < 32; ++y) {
                for (int x = 0; x < 32; ++x) {
                    const float q = plane[y * 64 + x];
                    CHECK(plane[y * 64 + (x + 32)] == q);
                    CHECK(plane[(y + 32) * 64 + x] == q);
                    CHECK(plane[(y + 32) * 64 + (x + 32)] == q);
                }
            }
        }
        // MNIST channel triplication is bytewise equal
        const float* c0 = img.data() + std::size_t(n) * 3 * 64 * 64;
        for (int i = 0; i < 64 * 64; ++i) {
            CHECK(c0[i] == c0[64 * 64 + i]);
            CHECK(c0[i] == c0[2 * 64 * 64 + i]);
        }
    }
}

TEST_CASE("preprocess rejects unexpected and already-preprocessed shapes") {
    RawImages raw;
    raw.count = 1;
    raw.channels = 3;
    raw.height = 64;
    raw.width = 64;
    raw.pixels.assign(std::size_t(3) * 64 * 64, 0.0f);
    CHECK_THROWS_AS(preprocess(raw, DatasetKind::Cifar10, {0}), ShapeError);
    CHECK_THROWS_AS(preprocess(raw, DatasetKind::Mnist, {0}), ShapeError);
}

TEST_CASE("synthetic dataset is deterministic and balanced") {
    Dataset a = synthetic_dataset(2, 10, 1);
    Dataset b = synthetic_dataset(2, 10, 1);
    REQUIRE(a.size() == b.size());
    auto ad = a.images().data();
    auto bd = b.images().data();
    for (std::size_t i = 0; i < ad.size(); ++i) REQUIRE(ad[i] == bd[i]);

    Dataset c = synthetic_dataset(4, 50, 7);
    CHECK(c.size() == 200);
    std::vector<int> counts(4, 0);
    for (int i = 0; i < c.size(); ++i) ++counts[size_t(c.label(i))];
    for (int k : counts) CHECK(k == 50);
}

TEST_CASE("synthetic dataset tiles quadrants like real preprocessing") {
    Dataset ds = synthetic_dataset(2, 3, 9);
    auto img = ds.images().data();
    const float* plane = img.data();
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            CHECK(plane[y * 64 + x] == plane[(y + 32) * 64 + (x + 32)]);
        }
    }
}

TEST_CASE("raw pixels of the synthetic corpus probe almost perfectly") {
    Dataset train = synthetic_dataset(2, 100, 3);
    Dataset test = synthetic_dataset(2, 50, 4);
    const int n = train.size();
    const int d = int(train.images().numel() / n);
    Tensor train_enc = Tensor::from_data({n, d}, {train.images().data().begin(),
                                                  train.images().data().end()});
    Tensor test_enc = Tensor::from_data({test.size(), d}, {test.images().data().begin(),
                                                           test.images().data().end()});
    std::vector<int> train_labels, test_labels;
    for (int i = 0; i < train.size(); ++i) train_labels.push_back(train.label(i));
    for (int i = 0; i < test.size(); ++i) test_labels.push_back(test.label(i));
    ProbeSettings settings;
    LinearProbe probe = fit_probe(train_enc, train_labels, settings);
    CHECK(probe_accuracy(probe, test_enc, test_labels) >= 0.99);
}

TEST_CASE("dataset label reads are counted and gather preserves rows") {
    Dataset ds = synthetic_dataset(2, 5, 11);
    CHECK(ds.label_reads() == 0);
    (void)ds.label(0);
    (void)ds.label(3);
    CHECK(ds.label_reads() == 2);

    std::vector<int> idx = {1, 3, 7};
    Tensor batch = ds.gather(idx);
    REQUIRE(batch.shape() == Shape{3, 3, 64, 64});
    auto bd = batch.data();
    auto sd = ds.images().data();
    const std::size_t frame = std::size_t(3) * 64 * 64;
    for (std::size_t i = 0; i < frame; ++i) {
        CHECK(bd[frame + i] == sd[3 * frame + i]); // row 1 of batch is image 3
    }
}

TEST_CASE("subset filters classes, remaps labels, and honours limits") {
    RawImages raw;
    raw.count = 6;
    raw.channels = 1;
    raw.height = 2;
    raw.width = 2;
    raw.pixels.resize(6 * 4);
    for (std::size_t i = 0; i < raw.pixels.size(); ++i) raw.pixels[i] = float(i);
    std::vector<int> labels = {0, 7, 3, 7, 3, 0};
    subset(raw, labels, {7, 3}, 3);
    CHECK(raw.count == 3);
    CHECK(labels == std::vector<int>{0, 1, 0}); // 7 -> 0, 3 -> 1
    CHECK(raw.pixels[0] == 4.0f);               // first kept image was index 1
}
