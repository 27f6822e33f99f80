#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plae/data.hpp"
#include "plae/models.hpp"

namespace plae {

enum class ProbeSolver { Logistic, LinearSvm };

std::string probe_solver_name(ProbeSolver solver);

struct ProbeSettings {
    ProbeSolver solver = ProbeSolver::Logistic;
    double lambda = 1e-4; // L2 strength
    int max_iters = 500;
    double learning_rate = 0.25;
    std::uint64_t seed = 0;
};

// Linear classifier fitted on frozen training-split encodings. Encodings are
// standardized per dimension (mean/scale from the training split only) before
// fitting; the standardizer travels with the probe.
struct LinearProbe {
    int dim = 0;
    int classes = 0;
    std::vector<double> weight; // [dim][classes]
    std::vector<double> bias;   // [classes]
    std::vector<double> mean;   // [dim]
    std::vector<double> scale;  // [dim]
    ProbeSettings settings;

    // Argmax class per row; ties resolve to the lowest class index.
    std::vector<int> predict(const Tensor& encodings) const;
};

// Deterministic inference-mode encodings of a whole split, plus its labels.
std::pair<Tensor, std::vector<int>> encode_split(const Encoder& encoder, const Dataset& split,
                                                 int batch_size = 128);

// encodings [N,d]; requires at least two distinct labels.
LinearProbe fit_probe(const Tensor& encodings, const std::vector<int>& labels,
                      const ProbeSettings& settings);

// Fraction of argmax-correct predictions; rejects an empty test set.
double probe_accuracy(const LinearProbe& probe, const Tensor& encodings,
                      const std::vector<int>& labels);

// The full evaluation pipeline: encode both splits, fit on train, score on
// test. Asserts that fitting never reads test labels.
double evaluate_probe(const Encoder& encoder, const Dataset& train, const Dataset& test,
                      const ProbeSettings& settings);

} // namespace plae
