#pragma once

#include <string>
#include <vector>

#include "plae/graph.hpp"
#include "plae/ops.hpp"

namespace plae {

// Centered zero padding used to feed small images to a larger-input extractor.
Tensor pad_input(const Tensor& images, int target_side, Graph* tape = nullptr);

enum class ExtractorScale { Desk, Full };

struct PerceptualLayer {
    enum class Kind { Conv, Relu, MaxPool };
    Kind kind = Kind::Relu;
    int out_channels = 0; // conv
    int kernel = 0;       // conv or pool
    int stride = 1;
    int padding = 0;      // conv only
};

// The fixed feature map of the perceptual loss: a frozen convolutional stack.
// Weights never require gradients and never change after construction;
// gradients still flow through extract() to the image.
class PerceptualExtractor {
public:
    // He-initialized frozen stack. Desk scale runs directly on 64x64 inputs;
    // Full is the AlexNet-shaped front block (conv 64x3x11x11 stride 4 pad 2,
    // relu, maxpool 3x3 stride 2) expecting 224x224.
    static PerceptualExtractor seeded(std::uint64_t seed, ExtractorScale scale);

    static PerceptualExtractor load(const std::string& path);
    void save(const std::string& path) const;

    // images [N,3,S,S] with S <= expected side; smaller inputs are padded.
    Tensor extract(const Tensor& images, Graph* tape = nullptr) const;

    int expected_side() const { return expected_side_; }
    const std::vector<PerceptualLayer>& layers() const { return layers_; }
    const std::string& provenance() const { return provenance_; }

    // FNV-1a over the raw weight bytes; constant for the extractor's lifetime.
    std::uint64_t weight_checksum() const;

private:
    PerceptualExtractor() = default;

    std::vector<PerceptualLayer> layers_;
    std::vector<Tensor> conv_weights_; // one [K,C,k,k] per conv layer
    std::vector<Tensor> conv_biases_;  // one [K] per conv layer
    int in_channels_ = 3;
    int expected_side_ = 64;
    std::string provenance_ = "seeded-random";
};

} // namespace plae
