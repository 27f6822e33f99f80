#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "plae/adam.hpp"
#include "plae/checkpoint.hpp"
#include "plae/ops.hpp"
#include "plae/rng.hpp"
#include "testutil.hpp"

using namespace plae;
using namespace plae::testutil;

TEST_CASE("backward of mse(w, 0) at w=3 yields gradient 6") {
    Tensor w = Tensor::scalar(3.0f, true);
    Tensor zero = Tensor::scalar(0.0f);
    Graph tape;
    Tensor loss = mse(w, zero, &tape);
    backward(loss, tape);
    CHECK(w.grad()[0] == doctest::Approx(6.0f));
}

TEST_CASE("zero loss leaves all gradients zero") {
    Tensor w = Tensor::from_data({3}, {1.0f, -2.0f, 0.5f}, true);
    Graph tape;
    Tensor loss = mse(w, w.clone(), &tape);
    REQUIRE(loss.item() == 0.0f);
    backward(loss, tape);
    for (float g : w.grad()) CHECK(g == 0.0f);
}

TEST_CASE("backward rejects a second call on the same graph") {
    Tensor w = Tensor::scalar(1.0f, true);
    Graph tape;
    Tensor loss = mse(w, Tensor::scalar(0.0f), &tape);
    backward(loss, tape);
    CHECK_THROWS_AS(backward(loss, tape), AutodiffError);
}

TEST_CASE("backward rejects a loss the graph did not produce") {
    Tensor w = Tensor::scalar(1.0f, true);
    Graph tape;
    mse(w, Tensor::scalar(0.0f), &tape);
    Tensor foreign = Tensor::scalar(0.5f);
    CHECK_THROWS_AS(backward(foreign, tape), AutodiffError);
    Graph other;
    Tensor nonscalar = Tensor::zeros({2});
    CHECK_THROWS_AS(backward(nonscalar, other), AutodiffError);
}

TEST_CASE("mse rejects a target on a gradient path") {
    Tensor w = Tensor::scalar(1.0f, true);
    Graph tape;
    CHECK_THROWS_AS(mse(Tensor::scalar(2.0f), w, &tape), AutodiffError);
}

TEST_CASE("gradient accumulates across two paths to the same leaf") {
    Rng rng(61);
    Tensor x = random_tensor({1, 1, 2, 2}, rng, 0.1f, 0.9f, true);
    Graph tape;
    Tensor as_kernel = reshape(x, {1, 1, 2, 2}, &tape);
    Tensor y = conv2d(x, as_kernel, Tensor::zeros({1}), 1, 0, &tape);
    Tensor loss = mse(y, Tensor::zeros({1, 1, 1, 1}), &tape);
    backward(loss, tape);
    auto res = finite_difference_check(tape, loss, {x});
    INFO(res.worst);
    CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("composite encoder-decoder chain matches finite differences end to end") {
    Rng rng(67);
    Tensor x = random_tensor({2, 1, 6, 6}, rng, 0.05f, 0.95f);
    Tensor ck = random_tensor({4, 1, 3, 3}, rng, -0.3f, 0.3f, true);
    Tensor cb = random_tensor({4}, rng, -0.1f, 0.1f, true);
    Tensor w1 = random_tensor({144, 8}, rng, -0.2f, 0.2f, true);
    Tensor b1 = random_tensor({8}, rng, -0.1f, 0.1f, true);
    Tensor w2 = random_tensor({8, 144}, rng, -0.2f, 0.2f, true);
    Tensor b2 = random_tensor({144}, rng, -0.1f, 0.1f, true);
    Tensor dk = random_tensor({4, 1, 3, 3}, rng, -0.3f, 0.3f, true);
    Tensor db = random_tensor({1}, rng, -0.1f, 0.1f, true);

    Graph tape;
    Tensor h = relu(conv2d(x, ck, cb, 1, 1, &tape), &tape);
    Tensor z = dense(reshape(h, {2, 144}, &tape), w1, b1, &tape);
    Tensor u = relu(dense(relu(z, &tape), w2, b2, &tape), &tape);
    Tensor recon = sigmoid(conv2d_transpose(reshape(u, {2, 4, 6, 6}, &tape), dk, db, 1, 1, &tape), &tape);
    Tensor loss = mse(recon, x, &tape);
    backward(loss, tape);

    auto res = chain_gradient_check(tape, loss, {ck, cb, w1, b1, w2, b2, dk, db}, 1e-3, 24);
    INFO(res.fd.worst);
    CHECK(res.fd.max_rel_err < 1e-3);
    CHECK(res.fd.checked > 5 * res.fd.skipped); // the kink filter must stay exceptional
    INFO(res.worst_float);
    CHECK(res.max_float_dev < 1e-2); // float engine tracks the shadow gradients
}

TEST_CASE("forward and backward are bit-identical across repeated runs") {
    auto run = [](std::vector<float>& grads_out) {
        Rng rng(71);
        Tensor x = random_tensor({2, 1, 4, 4}, rng, 0.0f, 1.0f);
        Tensor k = random_tensor({2, 1, 3, 3}, rng, -0.5f, 0.5f, true);
        Tensor b = random_tensor({2}, rng, -0.1f, 0.1f, true);
        Graph tape;
        Tensor y = sigmoid(conv2d(x, k, b, 1, 1, &tape), &tape);
        Tensor loss = mse(y, Tensor::zeros(y.shape()), &tape);
        backward(loss, tape);
        grads_out.assign(k.grad().begin(), k.grad().end());
        grads_out.push_back(loss.item());
    };
    std::vector<float> a, b;
    run(a);
    run(b);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("intermediate gradients are released after backward") {
    Tensor w = Tensor::scalar(2.0f, true);
    Graph tape;
    Tensor y = sigmoid(w, &tape);
    Tensor loss = mse(y, Tensor::scalar(0.0f), &tape);
    backward(loss, tape);
    CHECK(w.has_grad());
    CHECK_FALSE(y.has_grad());
    CHECK_FALSE(loss.has_grad());
}

TEST_CASE("adam leaves parameters untouched when gradient and moments are zero") {
    Tensor w = Tensor::from_data({3}, {1.0f, 2.0f, 3.0f}, true);
    w.grad(); // allocate zeros
    Adam opt({w});
    opt.step();
    CHECK(w.data()[0] == 1.0f);
    CHECK(w.data()[1] == 2.0f);
    CHECK(w.data()[2] == 3.0f);
}

TEST_CASE("adam first step moves by approximately the learning rate") {
    Tensor w = Tensor::scalar(0.0f, true);
    w.grad()[0] = 0.3f;
    AdamConfig cfg;
    cfg.lr = 0.01f;
    Adam opt({w}, cfg);
    opt.step();
    CHECK(std::fabs(std::fabs(w.item()) - cfg.lr) < 1e-6f);
    CHECK(w.item() < 0.0f); // moved against the gradient
}

TEST_CASE("adam rejects a missing gradient") {
    Tensor w = Tensor::scalar(1.0f, true);
    Adam opt({w});
    CHECK_THROWS_AS(opt.step(), AutodiffError);
}

TEST_CASE("50 adam steps descend (w-2)^2 and track a scalar oracle") {
    Tensor w = Tensor::scalar(0.0f, true);
    AdamConfig cfg;
    cfg.lr = 0.1f;
    Adam opt({w}, cfg);

    // independent double-precision rollout of the same recurrence
    double ow = 0.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 50; ++t) {
        Graph tape;
        Tensor loss = mse(w, Tensor::scalar(2.0f), &tape);
        backward(loss, tape);
        opt.step();
        opt.zero_grad();

        const double g = 2.0 * (ow - 2.0);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mhat = m / (1.0 - std::pow(0.9, t));
        const double vhat = v / (1.0 - std::pow(0.999, t));
        ow -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
    }
    CHECK(std::fabs(w.item() - 2.0f) < 0.5f);
    CHECK(std::fabs(double(w.item()) - ow) < 1e-3);
}

TEST_CASE("checkpoint records round-trip bitwise") {
    Rng rng(73);
    std::vector<NamedParam> records;
    records.push_back({"encoder.conv0.weight", random_tensor({4, 3, 3, 3}, rng)});
    records.push_back({"encoder.conv0.bias", random_tensor({4}, rng)});
    records.push_back({"fc", random_tensor({6, 2}, rng, -10.0f, 10.0f)});

    const std::string path = std::filesystem::temp_directory_path() / "plae_ckpt_test.bin";
    save_records(path, records);
    auto loaded = load_records(path);
    REQUIRE(loaded.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(loaded[i].name == records[i].name);
        REQUIRE(loaded[i].tensor.shape() == records[i].tensor.shape());
        auto a = loaded[i].tensor.data();
        auto b = records[i].tensor.data();
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == b[j]);
    }
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader reports truncation and bad magic") {
    Rng rng(79);
    const std::string path = std::filesystem::temp_directory_path() / "plae_ckpt_trunc.bin";
    save_records(path, {{"w", random_tensor({8, 8}, rng)}});

    auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 17);
    CHECK_THROWS_AS(load_records(path), ParseError);

    {
        std::ofstream os(path, std::ios::binary);
        os << "NOPE1";
    }
    CHECK_THROWS_AS(load_records(path), ParseError);
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint with optimizer stores moments and restores parameters") {
    Rng rng(83);
    Tensor w = random_tensor({3, 3}, rng, -1.0f, 1.0f, true);
    for (auto& g : w.grad()) g = 0.25f;
    Adam opt({w});
    opt.step();

    const std::string path = std::filesystem::temp_directory_path() / "plae_ckpt_opt.bin";
    std::vector<NamedParam> params = {{"w", w}};
    save_checkpoint(path, params, &opt);

    auto names = load_records(path);
    bool has_step = false, has_m = false, has_v = false;
    for (const auto& r : names) {
        if (r.name == "adam.step") has_step = true;
        if (r.name == "adam.m.w") has_m = true;
        if (r.name == "adam.v.w") has_v = true;
    }
    CHECK(has_step);
    CHECK(has_m);
    CHECK(has_v);

    Tensor w2 = Tensor::zeros({3, 3}, true);
    auto leftover = load_checkpoint(path, {{"w", w2}});
    for (std::int64_t i = 0; i < w.numel(); ++i) CHECK(w2.data()[size_t(i)] == w.data()[size_t(i)]);
    CHECK(leftover.size() == 3);

    Tensor bad = Tensor::zeros({2, 2}, true);
    CHECK_THROWS_AS(load_checkpoint(path, {{"w", bad}}), ParseError);
    CHECK_THROWS_AS(load_checkpoint(path, {{"missing", w2}}), ParseError);
    std::filesystem::remove(path);
}
