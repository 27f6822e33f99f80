#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "plae/adam.hpp"
#include "plae/augment.hpp"
#include "plae/data.hpp"
#include "plae/models.hpp"
#include "plae/perceptual.hpp"
#include "plae/probe.hpp"

namespace plae {

// B-AE reconstructs the clean image pixel-wise. P-AE compares extractor
// features instead. SDA-AE feeds an augmented image and reconstructs that
// same augmented image. PL-AE feeds an augmented image but always targets the
// clean original. CNN is the supervised reference (same augmentation policy,
// cross-entropy on labels).
enum class Regime { BAE, PAE, SDAAE, PLAE, CNN };

std::string regime_name(Regime regime);
Regime parse_regime(const std::string& text);

struct TrainedModels;

struct TrainConfig {
    Regime regime = Regime::BAE;
    int epochs = 90;
    int batch_size = 100;
    AdamConfig adam; // lr 1e-3, betas 0.9/0.999
    int embedding_dim = 300;
    ArchConfig arch = ArchConfig::preset("paper64");
    std::optional<Policy> policy;
    std::shared_ptr<const PerceptualExtractor> extractor;
    std::uint64_t seed_init = 1;
    std::uint64_t seed_shuffle = 2;
    std::uint64_t seed_augment = 3;
    int eval_every = 1;
    ProbeSettings probe;

    // Called after each epoch's metrics are final; the CLI uses it for
    // interval checkpointing. Must not mutate the models.
    std::function<void(int epoch, const TrainedModels&, const Adam&)> epoch_hook;
};

// Regime/ingredient pairing: B-AE takes neither extractor nor policy, P-AE
// the extractor only, SDA-AE and PL-AE both, CNN the policy only.
void validate_config(const TrainConfig& cfg);

struct EpochMetrics {
    int epoch = 0;
    double mean_loss = 0.0;
    std::optional<double> accuracy; // probe accuracy; CNN: its own test accuracy
    double seconds = 0.0;           // wall time; excluded from determinism contracts
};

struct TrainedModels {
    Encoder encoder;
    std::optional<Decoder> decoder; // autoencoder regimes
    std::optional<CnnHead> head;    // CNN regime

    std::vector<NamedParam> parameters() const;
};

struct LossInfo {
    float value = 0.0f;
    // The image-level reconstruction target: the clean batch for B-AE/P-AE/
    // PL-AE, the augmented batch for SDA-AE, null for CNN.
    const detail::TensorImpl* target_image_id = nullptr;
};

// Builds the regime loss for one batch and records it on the tape.
// Augmentation draws come from per-image streams (seed_augment, epoch,
// dataset index), so regimes sharing a seed see identical transforms.
Tensor regime_loss(const TrainConfig& cfg, const TrainedModels& models, const Tensor& clean,
                   const std::vector<int>& labels, std::span<const int> dataset_indices,
                   int epoch, Graph& tape, LossInfo* info = nullptr);

struct TrainResult {
    TrainedModels models;
    std::vector<EpochMetrics> metrics;
    std::int64_t steps = 0;
    std::uint64_t label_reads_during_updates = 0; // must stay 0 outside CNN
    std::optional<Adam> optimizer;                // final state, for resumable checkpoints
};

// Full training loop: epochs x ceil(N/batch) Adam steps, reshuffling from
// (seed_shuffle, epoch), fresh per-image transforms each epoch, probe
// evaluation every eval_every epochs and on the final epoch. Unsupervised
// regimes are guarded by a label-access counter: a single label read during
// the update phase aborts the run.
TrainResult train(const TrainConfig& cfg, const DataBundle& data);

struct LineFit {
    double m = 0.0;
    double k = 0.0;
};

// Ordinary least squares of y against x; needs at least two points.
LineFit best_fit_line(std::span<const std::pair<double, double>> points);

// The stability metric: accuracy (in percent) against epoch index, taken over
// the epochs that have an accuracy sample.
LineFit best_fit_line(const std::vector<EpochMetrics>& metrics);

} // namespace plae
