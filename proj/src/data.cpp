#include "plae/data.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "plae/rng.hpp"

namespace plae {
namespace {

std::uint32_t read_be_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw ParseError("unexpected end of file in " + path);
    }
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

std::string hex_u32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0x%08x", v);
    return buf;
}

} // namespace

std::string dataset_kind_name(DatasetKind kind) {
    switch (kind) {
    case DatasetKind::Mnist: return "mnist";
    case DatasetKind::Cifar10: return "cifar10";
    case DatasetKind::Svhn: return "svhn";
    case DatasetKind::Synthetic: return "synthetic";
    }
    return "?";
}

std::pair<RawImages, std::vector<int>> load_idx(const std::string& images_path,
                                                const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw ParseError("cannot open " + images_path);
    const std::uint32_t img_magic = read_be_u32(imgs, images_path);
    if (img_magic != 0x00000803u) {
        throw ParseError("bad IDX image magic " + hex_u32(img_magic) + " in " + images_path +
                         " (expected 0x00000803)");
    }
    const std::uint32_t n = read_be_u32(imgs, images_path);
    const std::uint32_t rows = read_be_u32(imgs, images_path);
    const std::uint32_t cols = read_be_u32(imgs, images_path);

    RawImages raw;
    raw.count = int(n);
    raw.channels = 1;
    raw.height = int(rows);
    raw.width = int(cols);
    std::vector<unsigned char> bytes(std::size_t(n) * rows * cols);
    if (!imgs.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()))) {
        throw ParseError("truncated IDX image data in " + images_path);
    }
    raw.pixels.resize(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) raw.pixels[i] = float(bytes[i]) / 255.0f;

    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw ParseError("cannot open " + labels_path);
    const std::uint32_t lab_magic = read_be_u32(labs, labels_path);
    if (lab_magic != 0x00000801u) {
        throw ParseError("bad IDX label magic " + hex_u32(lab_magic) + " in " + labels_path +
                         " (expected 0x00000801)");
    }
    const std::uint32_t ln = read_be_u32(labs, labels_path);
    if (ln != n) {
        throw ParseError("IDX pair mismatch: " + std::to_string(n) + " images vs " +
                         std::to_string(ln) + " labels");
    }
    std::vector<unsigned char> lab_bytes(ln);
    if (!labs.read(reinterpret_cast<char*>(lab_bytes.data()), std::streamsize(ln))) {
        throw ParseError("truncated IDX label data in " + labels_path);
    }
    std::vector<int> labels(lab_bytes.begin(), lab_bytes.end());
    return {std::move(raw), std::move(labels)};
}

std::pair<RawImages, std::vector<int>> load_cifar_bin(const std::vector<std::string>& paths) {
    constexpr int kRecord = 3073;
    RawImages raw;
    raw.channels = 3;
    raw.height = 32;
    raw.width = 32;
    std::vector<int> labels;
    for (const auto& path : paths) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw ParseError("cannot open " + path);
        is.seekg(0, std::ios::end);
        const auto size = std::streamoff(is.tellg());
        is.seekg(0, std::ios::beg);
        if (size % kRecord != 0) {
            throw ParseError("file length " + std::to_string(size) + " of " + path +
                             " is not a multiple of " + std::to_string(kRecord));
        }
        const int records = int(size / kRecord);
        std::vector<unsigned char> buf(kRecord);
        for (int r = 0; r < records; ++r) {
            if (!is.read(reinterpret_cast<char*>(buf.data()), kRecord)) {
                throw ParseError("truncated record in " + path);
            }
            labels.push_back(int(buf[0]));
            for (int i = 1; i < kRecord; ++i) raw.pixels.push_back(float(buf[i]) / 255.0f);
            ++raw.count;
        }
    }
    return {std::move(raw), std::move(labels)};
}

void subset(RawImages& raw, std::vector<int>& labels,
            const std::vector<int>& keep_classes, int limit) {
    const std::size_t frame = std::size_t(raw.channels) * raw.height * raw.width;
    std::vector<float> pixels;
    std::vector<int> kept;
    for (int i = 0; i < raw.count; ++i) {
        int remapped = labels[size_t(i)];
        if (!keep_classes.empty()) {
            auto it = std::find(keep_classes.begin(), keep_classes.end(), labels[size_t(i)]);
            if (it == keep_classes.end()) continue;
            remapped = int(it - keep_classes.begin());
        }
        pixels.insert(pixels.end(), raw.pixels.begin() + std::ptrdiff_t(frame * i),
                      raw.pixels.begin() + std::ptrdiff_t(frame * (i + 1)));
        kept.push_back(remapped);
        if (limit > 0 && int(kept.size()) >= limit) break;
    }
    raw.pixels = std::move(pixels);
    raw.count = int(kept.size());
    labels = std::move(kept);
}

Dataset::Dataset(std::string name, int class_count, Tensor images, std::vector<int> labels)
    : name_(std::move(name)),
      class_count_(class_count),
      images_(std::move(images)),
      labels_(std::move(labels)),
      label_reads_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
    if (images_.shape().size() != 4 || images_.shape()[1] != 3) {
        throw ShapeError("dataset images must be [N,3,S,S], got " + shape_str(images_.shape()));
    }
    if (int(labels_.size()) != images_.shape()[0]) {
        throw ShapeError("dataset has " + std::to_string(images_.shape()[0]) + " images but " +
                         std::to_string(labels_.size()) + " labels");
    }
    for (int l : labels_) {
        if (l < 0 || l >= class_count_) {
            throw ShapeError("label " + std::to_string(l) + " outside [0," +
                             std::to_string(class_count_) + ")");
        }
    }
}

int Dataset::label(int i) const {
    label_reads_->fetch_add(1, std::memory_order_relaxed);
    return labels_[size_t(i)];
}

Dataset Dataset::detached() const {
    return Dataset(name_, class_count_, images_, labels_);
}

Tensor Dataset::gather(std::span<const int> indices) const {
    const int s = side();
    Tensor out = Tensor::zeros({int(indices.size()), 3, s, s});
    const std::size_t frame = std::size_t(3) * s * s;
    auto src = images_.data();
    auto dst = out.data();
    for (std::size_t b = 0; b < indices.size(); ++b) {
        std::memcpy(dst.data() + b * frame, src.data() + std::size_t(indices[b]) * frame,
                    frame * sizeof(float));
    }
    return out;
}

namespace {

// Bilinear with half-pixel centers; constants map to constants.
void resize_bilinear(const float* src, int in_side, float* dst, int out_side) {
    const float scale = float(in_side) / float(out_side);
    for (int y = 0; y < out_side; ++y) {
        float sy = (float(y) + 0.5f) * scale - 0.5f;
        sy = std::clamp(sy, 0.0f, float(in_side - 1));
        const int y0 = int(sy);
        const int y1 = std::min(y0 + 1, in_side - 1);
        const float fy = sy - float(y0);
        for (int x = 0; x < out_side; ++x) {
            float sx = (float(x) + 0.5f) * scale - 0.5f;
            sx = std::clamp(sx, 0.0f, float(in_side - 1));
            const int x0 = int(sx);
            const int x1 = std::min(x0 + 1, in_side - 1);
            const float fx = sx - float(x0);
            const float top = src[y0 * in_side + x0] * (1.0f - fx) + src[y0 * in_side + x1] * fx;
            const float bot = src[y1 * in_side + x0] * (1.0f - fx) + src[y1 * in_side + x1] * fx;
            dst[y * out_side + x] = top * (1.0f - fy) + bot * fy;
        }
    }
}

// 32x32 plane -> one channel of a 64x64 2x2 tiling.
void tile_plane(const float* src, float* dst) {
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            dst[y * 64 + x] = src[(y % 32) * 32 + (x % 32)];
        }
    }
}

} // namespace

Dataset preprocess(const RawImages& raw, DatasetKind kind, std::vector<int> labels) {
    const bool mnist_shape = raw.channels == 1 && raw.height == 28 && raw.width == 28;
    const bool colour_shape = raw.channels == 3 && raw.height == 32 && raw.width == 32;
    if (kind == DatasetKind::Mnist ? !mnist_shape : !colour_shape) {
        throw ShapeError("preprocess(" + dataset_kind_name(kind) + ") rejects raw input " +
                         std::to_string(raw.channels) + "x" + std::to_string(raw.height) + "x" +
                         std::to_string(raw.width));
    }

    const int n = raw.count;
    Tensor images = Tensor::zeros({n, 3, 64, 64});
    auto out = images.data();
    std::vector<float> plane(32 * 32);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            if (kind == DatasetKind::Mnist) {
                // one grey channel rescaled, then triplicated
                resize_bilinear(raw.pixels.data() + std::size_t(i) * 28 * 28, 28, plane.data(), 32);
            } else {
                const float* src = raw.pixels.data() + (std::size_t(i) * 3 + c) * 32 * 32;
                std::copy(src, src + 32 * 32, plane.begin());
            }
            tile_plane(plane.data(), out.data() + (std::size_t(i) * 3 + c) * 64 * 64);
        }
    }
    return Dataset(dataset_kind_name(kind), 10, std::move(images), std::move(labels));
}

Dataset synthetic_dataset(int class_count, int per_class, std::uint64_t seed) {
    if (class_count < 2) throw ConfigError("synthetic_dataset requires class_count >= 2");
    const int n = class_count * per_class;
    Tensor images = Tensor::zeros({n, 3, 64, 64});
    std::vector<int> labels(static_cast<std::size_t>(n));
    auto out = images.data();
    std::vector<float> plane(32 * 32);
    const float cx = 15.5f;
    for (int c = 0; c < class_count; ++c) {
        const float radius = 4.0f + 8.0f * float(c) / float(class_count - 1);
        for (int i = 0; i < per_class; ++i) {
            const int idx = c * per_class + i;
            labels[size_t(idx)] = c;
            Rng rng = Rng::derive(seed, {std::uint64_t(c), std::uint64_t(i)});
            for (int y = 0; y < 32; ++y) {
                for (int x = 0; x < 32; ++x) {
                    const float dy = float(y) - cx;
                    const float dx = float(x) - cx;
                    const float base = (dy * dy + dx * dx <= radius * radius) ? 0.9f : 0.1f;
                    plane[y * 32 + x] = std::clamp(base + rng.normal(0.0f, 0.05f), 0.0f, 1.0f);
                }
            }
            for (int ch = 0; ch < 3; ++ch) {
                tile_plane(plane.data(), out.data() + (std::size_t(idx) * 3 + ch) * 64 * 64);
            }
        }
    }
    return Dataset("synthetic", class_count, std::move(images), std::move(labels));
}

} // namespace plae
