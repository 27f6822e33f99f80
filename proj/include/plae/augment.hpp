#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plae/rng.hpp"
#include "plae/tensor.hpp"

namespace plae {

enum class TransformKind {
    Identity,
    Rotation,
    Affine,
    Crop,
    Cutout,
    GaussianNoise,
    ColourJitter,
    Grayscale,
    HFlip,
    VFlip,
};

std::string transform_kind_name(TransformKind kind);

// One transform instance with its parameter ranges. Defaults follow the
// catalogue: rotations up to 45 degrees, affine scale in [0.5, 1.5], crop
// window 20x20, cutout 10x10, jitter brightness/contrast/saturation 0.8 and
// hue 0.2. Noise sigma (0.1 on the [0,1] scale) is our recorded choice.
struct Transform {
    TransformKind kind = TransformKind::Identity;
    float max_rotation_deg = 45.0f;
    float min_scale = 0.5f;
    float max_scale = 1.5f;
    int crop_size = 20;
    int cutout_size = 10;
    float noise_sigma = 0.1f;
    float brightness = 0.8f;
    float contrast = 0.8f;
    float saturation = 0.8f;
    float hue = 0.2f;
};

// A single transform or an ordered pair (first, then second).
struct TransformSpec {
    Transform first;
    std::optional<Transform> second;

    // Canonical text form, e.g. "rotation" or "rotation+cutout".
    std::string name() const;
    static TransformSpec parse(const std::string& text);

    static TransformSpec single(TransformKind kind);
    static TransformSpec pair(TransformKind a, TransformKind b);
};

// image [3,S,S] with pixels in [0,1] -> same shape, pixels clamped to [0,1].
// Geometric transforms fill exposed regions with zero. All stochastic
// parameters come from `rng`; the per-kind draw counts are fixed (rotation 1,
// affine 2, crop 2, cutout 2, colour jitter 4, gaussian noise one normal per
// element, others 0).
Tensor apply(const TransformSpec& spec, const Tensor& image, Rng& rng);

struct Policy {
    enum class Mode { UniformAll, TopTen, Single };
    std::string name;
    Mode mode = Mode::UniformAll;
    std::vector<TransformSpec> allowed;
};

// Uniform draw over the policy's allowed specs. Consumes exactly one rng draw.
TransformSpec sample(const Policy& policy, Rng& rng);

// Per-dataset transform sets. MNIST omits the flips and the colour
// transforms; SVHN omits the flips.
std::vector<TransformKind> table1_transforms(const std::string& dataset);

// All singles (in table order) followed by all unordered pairs (i<j), the
// grid-search enumeration. 15 specs for mnist, 45 for cifar10, 28 for svhn.
std::vector<TransformSpec> grid_specs(const std::string& dataset);
std::vector<TransformSpec> grid_specs_from(const std::vector<TransformKind>& singles);

// Sampling policy used during training: MNIST draws uniformly over all its
// explored specs, CIFAR-10 and SVHN over their fixed top-10 lists.
Policy policy_for_dataset(const std::string& dataset);
Policy identity_policy();
Policy single_spec_policy(const TransformSpec& spec);

// "none" is not accepted here; callers map it to an absent policy.
// Accepts "identity", "mnist", "cifar10", "svhn", or "only:<spec-name>".
Policy parse_policy(const std::string& text);

// Regime input assembly: clean batch [B,3,S,S] -> augmented batch, one
// fresh spec per image drawn from the stream (augment_seed, epoch, dataset
// index of the image).
Tensor augment_batch(const Tensor& clean, const Policy& policy, std::uint64_t augment_seed,
                     int epoch, std::span<const int> dataset_indices);

} // namespace plae
