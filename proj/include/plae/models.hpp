#pragma once

#include <string>
#include <utility>
#include <vector>

#include "plae/checkpoint.hpp"
#include "plae/graph.hpp"

namespace plae {

struct ConvLayerSpec {
    int out_channels = 0;
    int kernel = 0;
    int stride = 1;
    int padding = 0;
};

// Backbone description: the conv ladder of the encoder. The decoder is always
// its exact mirror (transposed convs, final sigmoid), so one config describes
// both halves.
struct ArchConfig {
    std::string name = "paper64";
    int input_side = 64;
    std::vector<ConvLayerSpec> convs;

    // Presets: paper64 (conv 32/64/128, k4 s2 p1), desk64, desk32, desk16.
    // Custom ladders parse from "custom:<side>:<out>x<k>s<stride>p<pad>,...".
    static ArchConfig preset(const std::string& name);
    static ArchConfig parse(const std::string& text);
    std::string to_string() const;
};

class Encoder {
public:
    Encoder() = default;
    Encoder(ArchConfig arch, int embedding_dim, std::uint64_t seed);

    // [N,3,S,S] -> [N,d]
    Tensor forward(const Tensor& batch, Graph* tape = nullptr) const;

    const ArchConfig& arch() const { return arch_; }
    int embedding_dim() const { return embedding_dim_; }
    int final_channels() const { return final_channels_; }
    int final_side() const { return final_side_; }

    std::vector<NamedParam> parameters(const std::string& prefix = "encoder") const;
    std::int64_t parameter_count() const;

private:
    ArchConfig arch_;
    int embedding_dim_ = 0;
    int final_channels_ = 0;
    int final_side_ = 0;
    std::vector<Tensor> conv_w_, conv_b_;
    Tensor fc_w_, fc_b_;
};

class Decoder {
public:
    Decoder() = default;
    Decoder(ArchConfig arch, int embedding_dim, std::uint64_t seed);

    // [N,d] -> [N,3,S,S], pixels in (0,1)
    Tensor forward(const Tensor& z, Graph* tape = nullptr) const;

    std::vector<NamedParam> parameters(const std::string& prefix = "decoder") const;
    std::int64_t parameter_count() const;

private:
    ArchConfig arch_;
    int embedding_dim_ = 0;
    int flat_channels_ = 0;
    int flat_side_ = 0;
    Tensor fc_w_, fc_b_;
    std::vector<Tensor> deconv_w_, deconv_b_; // in application order (last conv inverted first)
};

// MLP head of the supervised reference: dense d->128, relu, dense 128->classes.
struct CnnHead {
    CnnHead() = default;
    CnnHead(int embedding_dim, int class_count, std::uint64_t seed);

    Tensor forward(const Tensor& z, Graph* tape = nullptr) const;
    std::vector<NamedParam> parameters(const std::string& prefix = "head") const;

    Tensor w1, b1, w2, b2;
};

struct CnnClassifier {
    Encoder encoder;
    CnnHead head;

    Tensor forward_logits(const Tensor& batch, Graph* tape = nullptr) const {
        return head.forward(encoder.forward(batch, tape), tape);
    }
};

// Shared-seed constructors keep "same seed => identical initial parameters"
// across regimes that share a backbone.
std::pair<Encoder, Decoder> build_autoencoder(const ArchConfig& arch, int embedding_dim,
                                              std::uint64_t seed);
CnnClassifier build_cnn(const ArchConfig& arch, int embedding_dim, int class_count,
                        std::uint64_t seed);

// Inference-mode forwards: nothing recorded, no gradients possible.
Tensor encode(const Encoder& encoder, const Tensor& batch);
Tensor decode(const Decoder& decoder, const Tensor& z);

} // namespace plae
