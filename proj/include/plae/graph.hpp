#pragma once

#include <variant>
#include <vector>

#include "plae/tensor.hpp"

namespace plae {

enum class OpKind {
    Conv2d,
    ConvTranspose2d,
    Dense,
    Relu,
    Sigmoid,
    Mse,
    SoftmaxCrossEntropy,
    MaxPool2d,
    PadCenter,
    Reshape,
};

struct NoAttrs {};
struct ConvAttrs { int stride = 1; int padding = 0; };
struct PoolAttrs { int kernel = 2; int stride = 2; };
struct PadAttrs { int target = 0; };
struct ReshapeAttrs { Shape to; };
struct LabelAttrs { std::vector<int> labels; };

using OpAttrs = std::variant<NoAttrs, ConvAttrs, PoolAttrs, PadAttrs, ReshapeAttrs, LabelAttrs>;

struct Node {
    OpKind kind;
    OpAttrs attrs;
    std::vector<Tensor> inputs;
    Tensor output;
    std::vector<int> saved; // op-specific forward state (maxpool argmax offsets)
};

// Tape of forward operations in execution order, which is a topological order
// of the data flow. One Graph per forward pass; backward() may run once on it.
class Graph {
public:
    void record(Node n) { nodes_.push_back(std::move(n)); }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<Node>& nodes() const { return nodes_; }

    bool backward_done() const { return backward_done_; }
    void mark_backward_done() { backward_done_ = true; }

private:
    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

// Reverse-mode sweep: seeds d(loss)/d(loss) = 1, visits every recorded node
// exactly once in reverse order, accumulates gradients into every tensor that
// needs them, and releases the gradient buffers of all intermediates so only
// requires_grad leaves keep theirs. Throws if called twice on the same graph,
// if the loss is not scalar, or if the loss was not produced by this graph.
void backward(const Tensor& loss, Graph& graph);

} // namespace plae
