#include "plae/models.hpp"

#include <cmath>
#include <sstream>

#include "plae/ops.hpp"
#include "plae/rng.hpp"

namespace plae {
namespace {

Tensor he_tensor(Shape shape, int fan_in, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    const float sigma = std::sqrt(2.0f / float(fan_in));
    for (auto& v : t.data()) v = rng.normal(0.0f, sigma);
    return t;
}

// Encoder output side after each conv must divide exactly so the mirrored
// transposed conv inverts the geometry.
int traced_side(const ArchConfig& arch, std::vector<int>* sides = nullptr) {
    int side = arch.input_side;
    if (sides) sides->push_back(side);
    for (std::size_t i = 0; i < arch.convs.size(); ++i) {
        const auto& c = arch.convs[i];
        const int numer = side + 2 * c.padding - c.kernel;
        if (numer < 0 || numer % c.stride != 0) {
            throw ShapeError("conv" + std::to_string(i) + " of " + arch.name + ": side " +
                             std::to_string(side) + " with kernel " + std::to_string(c.kernel) +
                             " stride " + std::to_string(c.stride) + " pad " +
                             std::to_string(c.padding) + " does not divide exactly");
        }
        side = numer / c.stride + 1;
        if (side < 1) {
            throw ShapeError("conv" + std::to_string(i) + " of " + arch.name +
                             " collapses the spatial size");
        }
        if (sides) sides->push_back(side);
    }
    return side;
}

} // namespace

ArchConfig ArchConfig::preset(const std::string& name) {
    ArchConfig a;
    a.name = name;
    if (name == "paper64") {
        a.input_side = 64;
        a.convs = {{32, 4, 2, 1}, {64, 4, 2, 1}, {128, 4, 2, 1}};
    } else if (name == "desk64") {
        a.input_side = 64;
        a.convs = {{12, 4, 4, 0}, {24, 4, 2, 1}};
    } else if (name == "desk32") {
        a.input_side = 32;
        a.convs = {{12, 4, 2, 1}, {24, 4, 2, 1}};
    } else if (name == "desk16") {
        a.input_side = 16;
        a.convs = {{8, 4, 2, 1}, {16, 4, 2, 1}};
    } else {
        throw ConfigError("unknown architecture preset '" + name + "'");
    }
    return a;
}

ArchConfig ArchConfig::parse(const std::string& text) {
    if (text.rfind("custom:", 0) != 0) return preset(text);
    ArchConfig a;
    a.name = text;
    std::string rest = text.substr(7);
    const auto colon = rest.find(':');
    if (colon == std::string::npos) throw ConfigError("custom arch needs 'custom:<side>:<layers>'");
    a.input_side = std::stoi(rest.substr(0, colon));
    std::stringstream layers(rest.substr(colon + 1));
    std::string item;
    while (std::getline(layers, item, ',')) {
        ConvLayerSpec c;
        if (std::sscanf(item.c_str(), "%dx%ds%dp%d", &c.out_channels, &c.kernel, &c.stride,
                        &c.padding) != 4) {
            throw ConfigError("cannot parse conv layer '" + item + "' (want <out>x<k>s<s>p<p>)");
        }
        a.convs.push_back(c);
    }
    if (a.convs.empty()) throw ConfigError("custom arch has no conv layers");
    return a;
}

std::string ArchConfig::to_string() const {
    std::ostringstream os;
    os << "custom:" << input_side << ":";
    for (std::size_t i = 0; i < convs.size(); ++i) {
        if (i) os << ",";
        os << convs[i].out_channels << "x" << convs[i].kernel << "s" << convs[i].stride << "p"
           << convs[i].padding;
    }
    return os.str();
}

Encoder::Encoder(ArchConfig arch, int embedding_dim, std::uint64_t seed)
    : arch_(std::move(arch)), embedding_dim_(embedding_dim) {
    if (embedding_dim_ < 1) throw ConfigError("embedding_dim must be >= 1");
    final_side_ = traced_side(arch_);
    int in_ch = 3;
    for (std::size_t i = 0; i < arch_.convs.size(); ++i) {
        const auto& c = arch_.convs[i];
        Rng rng = Rng::derive(seed, {0, std::uint64_t(i)});
        conv_w_.push_back(he_tensor({c.out_channels, in_ch, c.kernel, c.kernel},
                                    in_ch * c.kernel * c.kernel, rng));
        conv_b_.push_back(Tensor::zeros({c.out_channels}, true));
        in_ch = c.out_channels;
    }
    final_channels_ = in_ch;
    const int flat = final_channels_ * final_side_ * final_side_;
    Rng rng = Rng::derive(seed, {0, 1000});
    fc_w_ = he_tensor({flat, embedding_dim_}, flat, rng);
    fc_b_ = Tensor::zeros({embedding_dim_}, true);
}

Tensor Encoder::forward(const Tensor& batch, Graph* tape) const {
    if (batch.shape().size() != 4 || batch.shape()[1] != 3 ||
        batch.shape()[2] != arch_.input_side || batch.shape()[3] != arch_.input_side) {
        throw ShapeError("encoder expects [N,3," + std::to_string(arch_.input_side) + "," +
                         std::to_string(arch_.input_side) + "], got " + shape_str(batch.shape()));
    }
    Tensor x = batch;
    for (std::size_t i = 0; i < conv_w_.size(); ++i) {
        x = relu(conv2d(x, conv_w_[i], conv_b_[i], arch_.convs[i].stride, arch_.convs[i].padding,
                        tape),
                 tape);
    }
    const int n = batch.shape()[0];
    x = reshape(x, {n, final_channels_ * final_side_ * final_side_}, tape);
    return dense(x, fc_w_, fc_b_, tape);
}

std::vector<NamedParam> Encoder::parameters(const std::string& prefix) const {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < conv_w_.size(); ++i) {
        out.push_back({prefix + ".conv" + std::to_string(i) + ".weight", conv_w_[i]});
        out.push_back({prefix + ".conv" + std::to_string(i) + ".bias", conv_b_[i]});
    }
    out.push_back({prefix + ".fc.weight", fc_w_});
    out.push_back({prefix + ".fc.bias", fc_b_});
    return out;
}

std::int64_t Encoder::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& p : parameters()) n += p.tensor.numel();
    return n;
}

Decoder::Decoder(ArchConfig arch, int embedding_dim, std::uint64_t seed)
    : arch_(std::move(arch)), embedding_dim_(embedding_dim) {
    if (embedding_dim_ < 1) throw ConfigError("embedding_dim must be >= 1");
    flat_side_ = traced_side(arch_);
    flat_channels_ = arch_.convs.back().out_channels;
    const int flat = flat_channels_ * flat_side_ * flat_side_;
    Rng rng = Rng::derive(seed, {1, 1000});
    fc_w_ = he_tensor({embedding_dim_, flat}, embedding_dim_, rng);
    fc_b_ = Tensor::zeros({flat}, true);
    // deconv i inverts conv i; applied from the deepest conv outward
    for (int i = int(arch_.convs.size()) - 1; i >= 0; --i) {
        const auto& c = arch_.convs[size_t(i)];
        const int out_ch = i > 0 ? arch_.convs[size_t(i - 1)].out_channels : 3;
        Rng lrng = Rng::derive(seed, {1, std::uint64_t(i)});
        deconv_w_.push_back(he_tensor({c.out_channels, out_ch, c.kernel, c.kernel},
                                      c.out_channels * c.kernel * c.kernel, lrng));
        deconv_b_.push_back(Tensor::zeros({out_ch}, true));
    }
}

Tensor Decoder::forward(const Tensor& z, Graph* tape) const {
    if (z.shape().size() != 2 || z.shape()[1] != embedding_dim_) {
        throw ShapeError("decoder expects [N," + std::to_string(embedding_dim_) + "], got " +
                         shape_str(z.shape()));
    }
    const int n = z.shape()[0];
    Tensor x = relu(dense(z, fc_w_, fc_b_, tape), tape);
    x = reshape(x, {n, flat_channels_, flat_side_, flat_side_}, tape);
    const std::size_t last = deconv_w_.size() - 1;
    for (std::size_t i = 0; i < deconv_w_.size(); ++i) {
        const auto& c = arch_.convs[deconv_w_.size() - 1 - i];
        x = conv2d_transpose(x, deconv_w_[i], deconv_b_[i], c.stride, c.padding, tape);
        x = i == last ? sigmoid(x, tape) : relu(x, tape);
    }
    return x;
}

std::vector<NamedParam> Decoder::parameters(const std::string& prefix) const {
    std::vector<NamedParam> out;
    out.push_back({prefix + ".fc.weight", fc_w_});
    out.push_back({prefix + ".fc.bias", fc_b_});
    for (std::size_t i = 0; i < deconv_w_.size(); ++i) {
        const std::size_t conv_idx = deconv_w_.size() - 1 - i;
        out.push_back({prefix + ".deconv" + std::to_string(conv_idx) + ".weight", deconv_w_[i]});
        out.push_back({prefix + ".deconv" + std::to_string(conv_idx) + ".bias", deconv_b_[i]});
    }
    return out;
}

std::int64_t Decoder::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& p : parameters()) n += p.tensor.numel();
    return n;
}

CnnHead::CnnHead(int embedding_dim, int class_count, std::uint64_t seed) {
    Rng r1 = Rng::derive(seed, {2, 0});
    w1 = he_tensor({embedding_dim, 128}, embedding_dim, r1);
    b1 = Tensor::zeros({128}, true);
    Rng r2 = Rng::derive(seed, {2, 1});
    w2 = he_tensor({128, class_count}, 128, r2);
    b2 = Tensor::zeros({class_count}, true);
}

Tensor CnnHead::forward(const Tensor& z, Graph* tape) const {
    return dense(relu(dense(z, w1, b1, tape), tape), w2, b2, tape);
}

std::vector<NamedParam> CnnHead::parameters(const std::string& prefix) const {
    return {{prefix + ".fc0.weight", w1},
            {prefix + ".fc0.bias", b1},
            {prefix + ".fc1.weight", w2},
            {prefix + ".fc1.bias", b2}};
}

std::pair<Encoder, Decoder> build_autoencoder(const ArchConfig& arch, int embedding_dim,
                                              std::uint64_t seed) {
    return {Encoder(arch, embedding_dim, seed), Decoder(arch, embedding_dim, seed)};
}

CnnClassifier build_cnn(const ArchConfig& arch, int embedding_dim, int class_count,
                        std::uint64_t seed) {
    return {Encoder(arch, embedding_dim, seed), CnnHead(embedding_dim, class_count, seed)};
}

Tensor encode(const Encoder& encoder, const Tensor& batch) {
    return encoder.forward(batch, nullptr);
}

Tensor decode(const Decoder& decoder, const Tensor& z) {
    return decoder.forward(z, nullptr);
}

} // namespace plae
