#include "plae/train.hpp"

#include <chrono>
#include <cmath>

#include "plae/ops.hpp"

namespace plae {

std::string regime_name(Regime regime) {
    switch (regime) {
    case Regime::BAE: return "bae";
    case Regime::PAE: return "pae";
    case Regime::SDAAE: return "sdaae";
    case Regime::PLAE: return "plae";
    case Regime::CNN: return "cnn";
    }
    return "?";
}

Regime parse_regime(const std::string& text) {
    if (text == "bae") return Regime::BAE;
    if (text == "pae") return Regime::PAE;
    if (text == "sdaae") return Regime::SDAAE;
    if (text == "plae") return Regime::PLAE;
    if (text == "cnn") return Regime::CNN;
    throw ConfigError("unknown regime '" + text + "' (want bae|pae|sdaae|plae|cnn)");
}

void validate_config(const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.eval_every < 1) throw ConfigError("eval_every must be >= 1");
    const bool has_policy = cfg.policy.has_value();
    const bool has_extractor = cfg.extractor != nullptr;
    switch (cfg.regime) {
    case Regime::BAE:
        if (has_policy || has_extractor) {
            throw ConfigError("bae takes neither an augmentation policy nor an extractor");
        }
        break;
    case Regime::PAE:
        if (!has_extractor) throw ConfigError("pae requires a perceptual extractor");
        if (has_policy) throw ConfigError("pae does not take an augmentation policy");
        break;
    case Regime::SDAAE:
    case Regime::PLAE:
        if (!has_extractor || !has_policy) {
            throw ConfigError(regime_name(cfg.regime) +
                              " requires both an extractor and an augmentation policy");
        }
        break;
    case Regime::CNN:
        if (!has_policy) throw ConfigError("cnn requires an augmentation policy");
        if (has_extractor) throw ConfigError("cnn does not take a perceptual extractor");
        break;
    }
}

std::vector<NamedParam> TrainedModels::parameters() const {
    std::vector<NamedParam> out = encoder.parameters();
    if (decoder) {
        for (auto& p : decoder->parameters()) out.push_back(std::move(p));
    }
    if (head) {
        for (auto& p : head->parameters()) out.push_back(std::move(p));
    }
    return out;
}

Tensor regime_loss(const TrainConfig& cfg, const TrainedModels& models, const Tensor& clean,
                   const std::vector<int>& labels, std::span<const int> dataset_indices,
                   int epoch, Graph& tape, LossInfo* info) {
    validate_config(cfg);
    const auto perceptual = [&](const Tensor& t) {
        return cfg.extractor->extract(t, &tape);
    };
    const auto reconstruct = [&](const Tensor& input) {
        return models.decoder->forward(models.encoder.forward(input, &tape), &tape);
    };

    Tensor loss;
    const detail::TensorImpl* target_id = nullptr;
    switch (cfg.regime) {
    case Regime::BAE: {
        loss = mse(reconstruct(clean), clean, &tape);
        target_id = clean.id();
        break;
    }
    case Regime::PAE: {
        Tensor recon = reconstruct(clean);
        loss = mse(perceptual(recon), perceptual(clean), &tape);
        target_id = clean.id();
        break;
    }
    case Regime::SDAAE: {
        Tensor aug = augment_batch(clean, *cfg.policy, cfg.seed_augment, epoch, dataset_indices);
        Tensor recon = reconstruct(aug);
        loss = mse(perceptual(recon), perceptual(aug), &tape);
        target_id = aug.id();
        break;
    }
    case Regime::PLAE: {
        Tensor aug = augment_batch(clean, *cfg.policy, cfg.seed_augment, epoch, dataset_indices);
        Tensor recon = reconstruct(aug);
        // the pseudo-label: features of the clean image, not of the augmented one
        loss = mse(perceptual(recon), perceptual(clean), &tape);
        target_id = clean.id();
        break;
    }
    case Regime::CNN: {
        Tensor aug = augment_batch(clean, *cfg.policy, cfg.seed_augment, epoch, dataset_indices);
        Tensor logits = models.head->forward(models.encoder.forward(aug, &tape), &tape);
        loss = softmax_cross_entropy(logits, labels, &tape);
        break;
    }
    }
    if (info) {
        info->value = loss.item();
        info->target_image_id = target_id;
    }
    return loss;
}

namespace {

double cnn_test_accuracy(const TrainedModels& models, const Dataset& test, int batch_size) {
    const int n = test.size();
    int correct = 0;
    std::vector<int> idx;
    for (int start = 0; start < n; start += batch_size) {
        const int count = std::min(batch_size, n - start);
        idx.resize(size_t(count));
        for (int i = 0; i < count; ++i) idx[size_t(i)] = start + i;
        Tensor logits = models.head->forward(encode(models.encoder, test.gather(idx)), nullptr);
        auto d = logits.data();
        const int classes = logits.shape()[1];
        for (int i = 0; i < count; ++i) {
            int best = 0;
            float bv = d[std::size_t(i) * classes];
            for (int c = 1; c < classes; ++c) {
                if (d[std::size_t(i) * classes + c] > bv) {
                    bv = d[std::size_t(i) * classes + c];
                    best = c;
                }
            }
            if (best == test.label(start + i)) ++correct;
        }
    }
    return double(correct) / double(n);
}

} // namespace

TrainResult train(const TrainConfig& cfg, const DataBundle& data) {
    validate_config(cfg);
    const int n = data.train.size();
    if (n == 0) throw ConfigError("training dataset is empty");
    if (cfg.batch_size > n) {
        throw ConfigError("batch_size " + std::to_string(cfg.batch_size) +
                          " exceeds dataset size " + std::to_string(n));
    }
    if (data.train.side() != cfg.arch.input_side) {
        throw ConfigError("dataset side " + std::to_string(data.train.side()) +
                          " does not match architecture input side " +
                          std::to_string(cfg.arch.input_side));
    }

    TrainResult result;
    if (cfg.regime == Regime::CNN) {
        CnnClassifier cnn = build_cnn(cfg.arch, cfg.embedding_dim, data.train.class_count(),
                                      cfg.seed_init);
        result.models.encoder = std::move(cnn.encoder);
        result.models.head = std::move(cnn.head);
    } else {
        auto [enc, dec] = build_autoencoder(cfg.arch, cfg.embedding_dim, cfg.seed_init);
        result.models.encoder = std::move(enc);
        result.models.decoder = std::move(dec);
    }

    std::vector<Tensor> params;
    for (auto& p : result.models.parameters()) params.push_back(p.tensor);
    Adam optimizer(std::move(params), cfg.adam);

    const bool supervised = cfg.regime == Regime::CNN;
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[size_t(i)] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();

        Rng shuffle_rng = Rng::derive(cfg.seed_shuffle, {std::uint64_t(epoch)});
        for (int i = n - 1; i > 0; --i) {
            std::swap(order[size_t(i)], order[size_t(shuffle_rng.uniform_int(i + 1))]);
        }

        const std::uint64_t reads_before = data.train.label_reads() + data.test.label_reads();
        double loss_sum = 0.0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int count = std::min(cfg.batch_size, n - start);
            std::span<const int> indices(order.data() + start, size_t(count));
            Tensor clean = data.train.gather(indices);
            std::vector<int> labels;
            if (supervised) {
                labels.reserve(size_t(count));
                for (int i : indices) labels.push_back(data.train.label(i));
            }
            Graph tape;
            Tensor loss = regime_loss(cfg, result.models, clean, labels, indices, epoch, tape);
            backward(loss, tape);
            optimizer.step();
            optimizer.zero_grad();
            loss_sum += double(loss.item()) * count;
            ++result.steps;
        }
        const std::uint64_t reads_during =
            data.train.label_reads() + data.test.label_reads() - reads_before;
        if (!supervised) {
            result.label_reads_during_updates += reads_during;
            if (reads_during != 0) {
                throw std::logic_error("label access during an unsupervised update phase");
            }
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.mean_loss = loss_sum / double(n);
        if ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs) {
            em.accuracy = supervised
                              ? cnn_test_accuracy(result.models, data.test, cfg.batch_size)
                              : evaluate_probe(result.models.encoder, data.train, data.test,
                                               cfg.probe);
        }
        em.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.metrics.push_back(em);
        if (cfg.epoch_hook) cfg.epoch_hook(epoch, result.models, optimizer);
    }

    result.optimizer = std::move(optimizer);
    return result;
}

LineFit best_fit_line(std::span<const std::pair<double, double>> points) {
    if (points.size() < 2) {
        throw ConfigError("best_fit_line needs at least two points");
    }
    double sx = 0.0, sy = 0.0;
    for (const auto& [x, y] : points) {
        sx += x;
        sy += y;
    }
    const double mx = sx / double(points.size());
    const double my = sy / double(points.size());
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if (sxx == 0.0) throw ConfigError("best_fit_line needs two distinct x values");
    LineFit fit;
    fit.m = sxy / sxx;
    fit.k = my - fit.m * mx;
    return fit;
}

LineFit best_fit_line(const std::vector<EpochMetrics>& metrics) {
    std::vector<std::pair<double, double>> points;
    for (const auto& m : metrics) {
        if (m.accuracy) points.emplace_back(double(m.epoch), *m.accuracy * 100.0);
    }
    return best_fit_line(points);
}

} // namespace plae
