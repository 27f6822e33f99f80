#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "plae/data.hpp"
#include "plae/perceptual.hpp"
#include "testutil.hpp"

using namespace plae;
using namespace plae::testutil;

TEST_CASE("pad_input centers with the documented border") {
    Rng rng(1);
    Tensor img = random_tensor({2, 3, 64, 64}, rng, 0.0f, 1.0f);
    Tensor padded = pad_input(img, 224);
    REQUIRE(padded.shape() == Shape{2, 3, 224, 224});
    auto pd = padded.data();
    // (224-64)/2 = 80 zero pixels on every side
    for (int x = 0; x < 224; ++x) CHECK(pd[size_t(79) * 224 + x] == 0.0f);
    CHECK(pd[size_t(80) * 224 + 80] == img.data()[0]);
}

TEST_CASE("desk extractor maps 64x64 input to 32x16x16 features") {
    auto p = PerceptualExtractor::seeded(11, ExtractorScale::Desk);
    CHECK(p.expected_side() == 64);
    CHECK(p.provenance() == "seeded-random");
    Rng rng(2);
    Tensor img = random_tensor({2, 3, 64, 64}, rng, 0.0f, 1.0f);
    Tensor features = p.extract(img);
    CHECK(features.shape() == Shape{2, 32, 16, 16});
}

TEST_CASE("alexnet-shaped extractor maps padded 224 input to spatial side 27") {
    auto p = PerceptualExtractor::seeded(3, ExtractorScale::Full);
    CHECK(p.expected_side() == 224);
    Rng rng(3);
    Tensor img = random_tensor({1, 3, 64, 64}, rng, 0.0f, 1.0f);
    Tensor features = p.extract(img); // pads internally to 224
    REQUIRE(features.shape().size() == 4);
    CHECK(features.shape()[1] == 64);
    CHECK(features.shape()[2] == 27);
    CHECK(features.shape()[3] == 27);
}

TEST_CASE("extraction is deterministic and seed-stable") {
    auto p1 = PerceptualExtractor::seeded(42, ExtractorScale::Desk);
    auto p2 = PerceptualExtractor::seeded(42, ExtractorScale::Desk);
    CHECK(p1.weight_checksum() == p2.weight_checksum());
    Rng rng(4);
    Tensor img = random_tensor({1, 3, 64, 64}, rng, 0.0f, 1.0f);
    Tensor f1 = p1.extract(img);
    Tensor f2 = p2.extract(img);
    auto a = f1.data();
    auto b = f2.data();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

    auto p3 = PerceptualExtractor::seeded(43, ExtractorScale::Desk);
    CHECK(p3.weight_checksum() != p1.weight_checksum());
}

TEST_CASE("perceptual distance of an image to itself is zero") {
    auto p = PerceptualExtractor::seeded(5, ExtractorScale::Desk);
    Rng rng(6);
    Tensor img = random_tensor({1, 3, 64, 64}, rng, 0.0f, 1.0f);
    CHECK(mse(p.extract(img), p.extract(img).clone()).item() == 0.0f);
}

TEST_CASE("features of distinct synthetic classes differ") {
    auto p = PerceptualExtractor::seeded(7, ExtractorScale::Desk);
    Dataset ds = synthetic_dataset(2, 1, 21);
    std::vector<int> idx0 = {0}, idx1 = {1};
    Tensor f0 = p.extract(ds.gather(idx0));
    Tensor f1 = p.extract(ds.gather(idx1));
    double l2 = 0.0;
    auto a = f0.data();
    auto b = f1.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        l2 += double(a[i] - b[i]) * double(a[i] - b[i]);
    }
    CHECK(l2 > 0.0);
}

TEST_CASE("gradients flow to the image, never to the frozen weights") {
    auto p = PerceptualExtractor::seeded(8, ExtractorScale::Desk);
    const std::uint64_t checksum_before = p.weight_checksum();
    Rng rng(9);
    Tensor a = random_tensor({1, 3, 64, 64}, rng, 0.05f, 0.95f, true);
    Tensor b = random_tensor({1, 3, 64, 64}, rng, 0.05f, 0.95f);
    Graph tape;
    Tensor loss = mse(p.extract(a, &tape), p.extract(b, &tape), &tape);
    backward(loss, tape);
    REQUIRE(a.has_grad());

    auto res = chain_gradient_check(tape, loss, {a}, 1e-3, 24);
    INFO(res.fd.worst);
    CHECK(res.fd.max_rel_err < 1e-3);
    CHECK(res.max_float_dev < 1e-2);
    CHECK(p.weight_checksum() == checksum_before);
}

TEST_CASE("extractor round-trips through its file format") {
    auto p = PerceptualExtractor::seeded(33, ExtractorScale::Desk);
    const auto path = (std::filesystem::temp_directory_path() / "plae_extractor.bin").string();
    p.save(path);
    auto loaded = PerceptualExtractor::load(path);
    CHECK(loaded.provenance() == "file-loaded");
    CHECK(loaded.expected_side() == 64);
    CHECK(loaded.weight_checksum() == p.weight_checksum());

    Rng rng(10);
    Tensor img = random_tensor({1, 3, 64, 64}, rng, 0.0f, 1.0f);
    Tensor f1 = p.extract(img);
    Tensor f2 = loaded.extract(img);
    auto a = f1.data();
    auto b = f2.data();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    std::filesystem::remove(path);
}

TEST_CASE("extractor loader reports truncation and bad magic") {
    auto p = PerceptualExtractor::seeded(34, ExtractorScale::Desk);
    const auto path = (std::filesystem::temp_directory_path() / "plae_extractor_bad.bin").string();
    p.save(path);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 64);
    CHECK_THROWS_AS(PerceptualExtractor::load(path), ParseError);
    {
        std::ofstream os(path, std::ios::binary);
        os << "WRONG";
    }
    CHECK_THROWS_AS(PerceptualExtractor::load(path), ParseError);
    std::filesystem::remove(path);
}

TEST_CASE("extractor rejects oversized input and wrong channel count") {
    auto p = PerceptualExtractor::seeded(35, ExtractorScale::Desk);
    CHECK_THROWS_AS(p.extract(Tensor::zeros({1, 3, 128, 128})), ShapeError);
    CHECK_THROWS_AS(p.extract(Tensor::zeros({1, 1, 64, 64})), ShapeError);
}
