#pragma once

#include <vector>

#include "plae/graph.hpp"

// Differentiable operators. Every function computes its result eagerly; when a
// Graph pointer is supplied the operation is also recorded so that backward()
// and the 64-bit shadow replay can revisit it. A null tape means inference:
// nothing is recorded and no gradient can flow.

namespace plae {

enum class ActivationKind { Relu, Sigmoid };

// input [N,C,H,W], kernel [K,C,kh,kw], bias [K]; cross-correlation, no kernel flip.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding, Graph* tape = nullptr);

// input [N,K,H,W], kernel [K,C,kh,kw], bias [C]; adjoint of conv2d for zero bias.
Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                        int stride, int padding, Graph* tape = nullptr);

// input [N,F], weight [F,G], bias [G].
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias,
             Graph* tape = nullptr);

Tensor relu(const Tensor& input, Graph* tape = nullptr);
Tensor sigmoid(const Tensor& input, Graph* tape = nullptr);
Tensor activation(ActivationKind kind, const Tensor& input, Graph* tape = nullptr);

// Mean of squared elementwise differences. The target must not be on a
// gradient path.
Tensor mse(const Tensor& prediction, const Tensor& target, Graph* tape = nullptr);

// logits [N,C]; labels in [0,C). Mean over the batch.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Graph* tape = nullptr);

// input [N,C,H,W]; no padding; ties resolve to the first maximum.
Tensor maxpool2d(const Tensor& input, int kernel, int stride, Graph* tape = nullptr);

// Zero-pad square images [N,C,S,S] to [N,C,T,T], image centered.
Tensor pad_center(const Tensor& input, int target_side, Graph* tape = nullptr);

Tensor reshape(const Tensor& input, Shape to, Graph* tape = nullptr);

} // namespace plae
