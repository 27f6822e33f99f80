#pragma once

#include <unordered_map>
#include <vector>

#include "plae/graph.hpp"

namespace plae {

// Re-evaluates a recorded graph in 64-bit precision. This exists solely for
// gradient checks: the finite-difference oracle perturbs one leaf coordinate
// and needs the forward value computed with enough headroom that the h=1e-3
// central difference is meaningful. Training never touches this path.
class ShadowReplay {
public:
    explicit ShadowReplay(const Graph& graph);

    // Value of the given scalar output under the recorded leaf values.
    double eval(const Tensor& output) const;

    // Same, with one leaf coordinate overridden.
    double eval(const Tensor& output, const Tensor& leaf, std::int64_t coord,
                double value) const;

private:
    const Graph& graph_;
    std::unordered_map<const detail::TensorImpl*, int> producer_;
};

// 64-bit reverse sweep over a recorded graph. Together with the replayed
// forward pass this gives gradient checks full double headroom, so the
// h=1e-3 finite-difference tolerance measures the backward formulas rather
// than float32 rounding. Gradients are computed for every leaf regardless of
// requires_grad.
class ShadowGradients {
public:
    ShadowGradients(const Graph& graph, const Tensor& loss);

    // d(loss)/d(leaf); zeros when the loss does not depend on the leaf.
    const std::vector<double>& grad(const Tensor& leaf) const;

private:
    std::unordered_map<const detail::TensorImpl*, std::vector<double>> grads_;
    mutable std::vector<double> zeros_;
};

} // namespace plae
