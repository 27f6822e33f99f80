#include "plae/perceptual.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "plae/checkpoint.hpp"
#include "plae/rng.hpp"

namespace plae {
namespace {

constexpr char kMagic[5] = {'P', 'L', 'A', 'E', 'X'};

Tensor he_conv(int out_ch, int in_ch, int k, Rng& rng) {
    Tensor w = Tensor::zeros({out_ch, in_ch, k, k});
    const float sigma = std::sqrt(2.0f / float(in_ch * k * k));
    for (auto& v : w.data()) v = rng.normal(0.0f, sigma);
    return w;
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& is, const std::string& path) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) {
        throw ParseError("truncated extractor header in " + path);
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

} // namespace

Tensor pad_input(const Tensor& images, int target_side, Graph* tape) {
    return pad_center(images, target_side, tape);
}

PerceptualExtractor PerceptualExtractor::seeded(std::uint64_t seed, ExtractorScale scale) {
    PerceptualExtractor p;
    p.provenance_ = "seeded-random";
    if (scale == ExtractorScale::Desk) {
        p.expected_side_ = 64;
        p.layers_ = {
            {PerceptualLayer::Kind::Conv, 16, 5, 2, 2},
            {PerceptualLayer::Kind::Relu},
            {PerceptualLayer::Kind::Conv, 32, 3, 2, 1},
            {PerceptualLayer::Kind::Relu},
        };
    } else {
        p.expected_side_ = 224;
        p.layers_ = {
            {PerceptualLayer::Kind::Conv, 64, 11, 4, 2},
            {PerceptualLayer::Kind::Relu},
            {PerceptualLayer::Kind::MaxPool, 0, 3, 2, 0},
        };
    }
    int in_ch = p.in_channels_;
    int conv_idx = 0;
    for (const auto& layer : p.layers_) {
        if (layer.kind != PerceptualLayer::Kind::Conv) continue;
        Rng rng = Rng::derive(seed, {std::uint64_t(conv_idx)});
        p.conv_weights_.push_back(he_conv(layer.out_channels, in_ch, layer.kernel, rng));
        p.conv_biases_.push_back(Tensor::zeros({layer.out_channels}));
        in_ch = layer.out_channels;
        ++conv_idx;
    }
    return p;
}

Tensor PerceptualExtractor::extract(const Tensor& images, Graph* tape) const {
    if (images.shape().size() != 4 || images.shape()[1] != in_channels_) {
        throw ShapeError("extractor expects [N," + std::to_string(in_channels_) +
                         ",S,S] images, got " + shape_str(images.shape()));
    }
    if (images.shape()[2] > expected_side_) {
        throw ShapeError("extractor input side " + std::to_string(images.shape()[2]) +
                         " exceeds expected " + std::to_string(expected_side_));
    }
    Tensor x = images;
    if (images.shape()[2] < expected_side_) {
        x = pad_input(x, expected_side_, tape);
    }
    std::size_t conv_idx = 0;
    for (const auto& layer : layers_) {
        switch (layer.kind) {
        case PerceptualLayer::Kind::Conv:
            x = conv2d(x, conv_weights_[conv_idx], conv_biases_[conv_idx], layer.stride,
                       layer.padding, tape);
            ++conv_idx;
            break;
        case PerceptualLayer::Kind::Relu:
            x = relu(x, tape);
            break;
        case PerceptualLayer::Kind::MaxPool:
            x = maxpool2d(x, layer.kernel, layer.stride, tape);
            break;
        }
    }
    return x;
}

std::uint64_t PerceptualExtractor::weight_checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const Tensor& t) {
        for (float v : t.data()) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            for (int i = 0; i < 4; ++i) {
                h ^= (bits >> (8 * i)) & 0xff;
                h *= 0x100000001b3ULL;
            }
        }
    };
    for (const auto& w : conv_weights_) mix(w);
    for (const auto& b : conv_biases_) mix(b);
    return h;
}

void PerceptualExtractor::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("cannot open " + path + " for writing");
    os.write(kMagic, sizeof(kMagic));
    put_u64(os, std::uint64_t(expected_side_));
    put_u64(os, std::uint64_t(in_channels_));
    put_u64(os, layers_.size());
    for (const auto& layer : layers_) {
        unsigned char kind = layer.kind == PerceptualLayer::Kind::Conv      ? 0
                             : layer.kind == PerceptualLayer::Kind::Relu    ? 1
                                                                            : 2;
        os.write(reinterpret_cast<const char*>(&kind), 1);
        if (layer.kind == PerceptualLayer::Kind::Conv) {
            put_u64(os, std::uint64_t(layer.out_channels));
            put_u64(os, std::uint64_t(layer.kernel));
            put_u64(os, std::uint64_t(layer.stride));
            put_u64(os, std::uint64_t(layer.padding));
        } else if (layer.kind == PerceptualLayer::Kind::MaxPool) {
            put_u64(os, std::uint64_t(layer.kernel));
            put_u64(os, std::uint64_t(layer.stride));
        }
    }
    os.close();

    // weights appended in the checkpoint container format
    std::vector<NamedParam> records;
    for (std::size_t i = 0; i < conv_weights_.size(); ++i) {
        records.push_back({"conv" + std::to_string(i) + ".weight", conv_weights_[i]});
        records.push_back({"conv" + std::to_string(i) + ".bias", conv_biases_[i]});
    }
    const std::string wpath = path + ".weights";
    save_records(wpath, records);

    // merge into a single file
    std::ifstream win(wpath, std::ios::binary);
    std::ofstream merged(path, std::ios::binary | std::ios::app);
    merged << win.rdbuf();
    win.close();
    merged.close();
    std::remove(wpath.c_str());
}

PerceptualExtractor PerceptualExtractor::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open " + path);
    char magic[5];
    if (!is.read(magic, 5) || std::memcmp(magic, kMagic, 5) != 0) {
        throw ParseError("bad extractor magic in " + path);
    }
    PerceptualExtractor p;
    p.provenance_ = "file-loaded";
    p.expected_side_ = int(get_u64(is, path));
    p.in_channels_ = int(get_u64(is, path));
    const std::uint64_t layer_count = get_u64(is, path);
    if (p.expected_side_ < 1 || p.expected_side_ > 4096 || layer_count > 64) {
        throw ParseError("malformed extractor header in " + path);
    }
    for (std::uint64_t i = 0; i < layer_count; ++i) {
        unsigned char kind;
        if (!is.read(reinterpret_cast<char*>(&kind), 1)) {
            throw ParseError("truncated extractor header in " + path);
        }
        PerceptualLayer layer;
        if (kind == 0) {
            layer.kind = PerceptualLayer::Kind::Conv;
            layer.out_channels = int(get_u64(is, path));
            layer.kernel = int(get_u64(is, path));
            layer.stride = int(get_u64(is, path));
            layer.padding = int(get_u64(is, path));
        } else if (kind == 1) {
            layer.kind = PerceptualLayer::Kind::Relu;
        } else if (kind == 2) {
            layer.kind = PerceptualLayer::Kind::MaxPool;
            layer.kernel = int(get_u64(is, path));
            layer.stride = int(get_u64(is, path));
        } else {
            throw ParseError("unknown extractor layer kind in " + path);
        }
        p.layers_.push_back(layer);
    }

    // the rest of the file is a checkpoint container holding the weights
    const auto offset = is.tellg();
    is.close();
    std::ifstream full(path, std::ios::binary);
    full.seekg(offset);
    const std::string tmp = path + ".extract.tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        out << full.rdbuf();
    }
    std::vector<NamedParam> records;
    try {
        records = load_records(tmp);
    } catch (...) {
        std::remove(tmp.c_str());
        throw;
    }
    std::remove(tmp.c_str());

    int in_ch = p.in_channels_;
    int conv_idx = 0;
    for (const auto& layer : p.layers_) {
        if (layer.kind != PerceptualLayer::Kind::Conv) continue;
        const std::string wname = "conv" + std::to_string(conv_idx) + ".weight";
        const std::string bname = "conv" + std::to_string(conv_idx) + ".bias";
        Tensor w, b;
        for (const auto& rec : records) {
            if (rec.name == wname) w = rec.tensor;
            if (rec.name == bname) b = rec.tensor;
        }
        if (!w.defined() || !b.defined()) {
            throw ParseError("extractor weights missing record " + wname + " in " + path);
        }
        const Shape expect = {layer.out_channels, in_ch, layer.kernel, layer.kernel};
        if (w.shape() != expect) {
            throw ParseError("extractor weight " + wname + " has shape " + shape_str(w.shape()) +
                             ", descriptor expects " + shape_str(expect));
        }
        if (b.shape() != Shape{layer.out_channels}) {
            throw ParseError("extractor bias " + bname + " does not match descriptor");
        }
        p.conv_weights_.push_back(w);
        p.conv_biases_.push_back(b);
        in_ch = layer.out_channels;
        ++conv_idx;
    }
    return p;
}

} // namespace plae
