#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "plae/tensor.hpp"

namespace plae {

// Decoded images before preprocessing, pixel values already scaled to [0,1].
struct RawImages {
    int count = 0;
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> pixels; // [count][channels][height][width]
};

enum class DatasetKind { Mnist, Cifar10, Svhn, Synthetic };

std::string dataset_kind_name(DatasetKind kind);

// Big-endian IDX pair (images magic 0x00000803, labels magic 0x00000801).
std::pair<RawImages, std::vector<int>> load_idx(const std::string& images_path,
                                                const std::string& labels_path);

// CIFAR-10 binary batches: records of 1 label byte + 3072 channel-major pixel
// bytes. The SVHN raw format uses the identical record layout.
std::pair<RawImages, std::vector<int>> load_cifar_bin(const std::vector<std::string>& paths);

// Keeps only the listed classes (labels remapped to their position in the
// list) and then at most `limit` images in file order; limit <= 0 keeps all.
void subset(RawImages& raw, std::vector<int>& labels,
            const std::vector<int>& keep_classes, int limit);

// Canonical training input: [N,3,64,64] images in [0,1] where every image is
// a 2x2 tiling of identical 32x32 quadrants. Label reads are counted so the
// training loop can prove the unsupervised regimes never touch them.
class Dataset {
public:
    Dataset(std::string name, int class_count, Tensor images, std::vector<int> labels);

    const std::string& name() const { return name_; }
    int class_count() const { return class_count_; }
    int size() const { return images_.shape()[0]; }
    int side() const { return images_.shape()[2]; }
    const Tensor& images() const { return images_; }

    int label(int i) const;
    std::uint64_t label_reads() const { return label_reads_->load(); }

    // Copy sharing the image storage but owning a fresh read counter; used
    // when independent runs (e.g. parallel grid search) consume one dataset.
    Dataset detached() const;

    // Copies the selected images into a fresh [B,3,S,S] batch tensor.
    Tensor gather(std::span<const int> indices) const;

private:
    std::string name_;
    int class_count_;
    Tensor images_;
    std::vector<int> labels_;
    std::shared_ptr<std::atomic<std::uint64_t>> label_reads_;
};

struct DataBundle {
    Dataset train;
    Dataset test;
};

// Rescale (MNIST: bilinear 28->32 and channel triplication), then tile each
// 32x32 image into a 2x2 grid, giving [N,3,64,64]. Rejects anything that is
// not in the expected raw layout, including already-preprocessed input.
Dataset preprocess(const RawImages& raw, DatasetKind kind, std::vector<int> labels);

// Deterministic linearly-separable corpus: class c draws a filled disc whose
// radius grows with c, plus seeded Gaussian noise (sigma = 0.05).
Dataset synthetic_dataset(int class_count, int per_class, std::uint64_t seed);

} // namespace plae
