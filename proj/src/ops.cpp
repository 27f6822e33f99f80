#include "plae/ops.hpp"

#include <cmath>

#include "plae/kernels.hpp"

namespace plae {
namespace {

bool any_needs_grad(const std::vector<Tensor>& inputs) {
    for (const auto& t : inputs) {
        if (t.needs_grad()) return true;
    }
    return false;
}

Tensor finish(Graph* tape, OpKind kind, OpAttrs attrs, std::vector<Tensor> inputs,
              Tensor output, std::vector<int> saved = {}) {
    if (tape) {
        output.set_needs_grad(any_needs_grad(inputs));
        tape->record(Node{kind, std::move(attrs), std::move(inputs), output, std::move(saved)});
    }
    return output;
}

void require_rank(const Tensor& t, size_t rank, const char* what) {
    if (!t.defined() || t.shape().size() != rank) {
        throw ShapeError(std::string(what) + " must have rank " + std::to_string(rank) +
                         ", got " + (t.defined() ? shape_str(t.shape()) : std::string("undefined")));
    }
}

} // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding, Graph* tape) {
    require_rank(input, 4, "conv2d input");
    require_rank(kernel, 4, "conv2d kernel");
    require_rank(bias, 1, "conv2d bias");
    const auto& xs = input.shape();
    const auto& ks = kernel.shape();
    if (ks[1] != xs[1]) {
        throw ShapeError("conv2d kernel expects " + std::to_string(ks[1]) +
                         " input channels, input has " + std::to_string(xs[1]));
    }
    if (bias.shape()[0] != ks[0]) {
        throw ShapeError("conv2d bias length " + std::to_string(bias.shape()[0]) +
                         " does not match kernel count " + std::to_string(ks[0]));
    }
    if (stride < 1) throw ShapeError("conv2d stride must be >= 1");
    if (padding < 0) throw ShapeError("conv2d padding must be >= 0");
    if (xs[2] + 2 * padding < ks[2] || xs[3] + 2 * padding < ks[3]) {
        throw ShapeError("conv2d kernel " + shape_str(ks) + " larger than padded input " +
                         shape_str(xs));
    }
    const int oh = detail::conv_out_dim(xs[2], ks[2], stride, padding);
    const int ow = detail::conv_out_dim(xs[3], ks[3], stride, padding);
    Tensor out = Tensor::zeros({xs[0], ks[0], oh, ow});
    detail::conv2d_fwd<float>(input.data().data(), kernel.data().data(), bias.data().data(),
                              out.data().data(), xs[0], xs[1], xs[2], xs[3],
                              ks[0], ks[2], ks[3], stride, padding);
    return finish(tape, OpKind::Conv2d, ConvAttrs{stride, padding},
                  {input, kernel, bias}, std::move(out));
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                        int stride, int padding, Graph* tape) {
    require_rank(input, 4, "conv2d_transpose input");
    require_rank(kernel, 4, "conv2d_transpose kernel");
    require_rank(bias, 1, "conv2d_transpose bias");
    const auto& xs = input.shape();
    const auto& ks = kernel.shape();
    if (ks[0] != xs[1]) {
        throw ShapeError("conv2d_transpose kernel expects " + std::to_string(ks[0]) +
                         " input channels, input has " + std::to_string(xs[1]));
    }
    if (bias.shape()[0] != ks[1]) {
        throw ShapeError("conv2d_transpose bias length does not match output channels");
    }
    if (stride < 1) throw ShapeError("conv2d_transpose stride must be >= 1");
    if (padding < 0) throw ShapeError("conv2d_transpose padding must be >= 0");
    const int oh = detail::conv_transpose_out_dim(xs[2], ks[2], stride, padding);
    const int ow = detail::conv_transpose_out_dim(xs[3], ks[3], stride, padding);
    if (oh < 1 || ow < 1) {
        throw ShapeError("conv2d_transpose output size " + std::to_string(oh) + "x" +
                         std::to_string(ow) + " is not positive");
    }
    Tensor out = Tensor::zeros({xs[0], ks[1], oh, ow});
    detail::conv2d_transpose_fwd<float>(input.data().data(), kernel.data().data(),
                                        bias.data().data(), out.data().data(),
                                        xs[0], xs[1], xs[2], xs[3],
                                        ks[1], ks[2], ks[3], stride, padding);
    return finish(tape, OpKind::ConvTranspose2d, ConvAttrs{stride, padding},
                  {input, kernel, bias}, std::move(out));
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias, Graph* tape) {
    require_rank(input, 2, "dense input");
    require_rank(weight, 2, "dense weight");
    require_rank(bias, 1, "dense bias");
    if (input.shape()[1] != weight.shape()[0]) {
        throw ShapeError("dense inner dimensions disagree: input " + shape_str(input.shape()) +
                         " vs weight " + shape_str(weight.shape()));
    }
    if (bias.shape()[0] != weight.shape()[1]) {
        throw ShapeError("dense bias length does not match weight columns");
    }
    const int n = input.shape()[0], f = input.shape()[1], g = weight.shape()[1];
    Tensor out = Tensor::zeros({n, g});
    detail::dense_fwd<float>(input.data().data(), weight.data().data(), bias.data().data(),
                             out.data().data(), n, f, g);
    return finish(tape, OpKind::Dense, NoAttrs{}, {input, weight, bias}, std::move(out));
}

Tensor relu(const Tensor& input, Graph* tape) {
    Tensor out = Tensor::zeros(input.shape());
    detail::relu_fwd<float>(input.data().data(), out.data().data(), size_t(input.numel()));
    return finish(tape, OpKind::Relu, NoAttrs{}, {input}, std::move(out));
}

Tensor sigmoid(const Tensor& input, Graph* tape) {
    Tensor out = Tensor::zeros(input.shape());
    detail::sigmoid_fwd<float>(input.data().data(), out.data().data(), size_t(input.numel()));
    return finish(tape, OpKind::Sigmoid, NoAttrs{}, {input}, std::move(out));
}

Tensor activation(ActivationKind kind, const Tensor& input, Graph* tape) {
    return kind == ActivationKind::Relu ? relu(input, tape) : sigmoid(input, tape);
}

Tensor mse(const Tensor& prediction, const Tensor& target, Graph* tape) {
    if (!prediction.defined() || !target.defined() || prediction.shape() != target.shape()) {
        throw ShapeError("mse requires identical shapes, got " + shape_str(prediction.shape()) +
                         " vs " + shape_str(target.shape()));
    }
    if (target.needs_grad()) {
        throw AutodiffError("mse target must not require gradient");
    }
    Tensor out = Tensor::scalar(detail::mse_fwd<float>(
        prediction.data().data(), target.data().data(), size_t(prediction.numel())));
    return finish(tape, OpKind::Mse, NoAttrs{}, {prediction, target}, std::move(out));
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels, Graph* tape) {
    require_rank(logits, 2, "softmax_cross_entropy logits");
    const int n = logits.shape()[0], c = logits.shape()[1];
    if (int(labels.size()) != n) {
        throw ShapeError("softmax_cross_entropy got " + std::to_string(labels.size()) +
                         " labels for batch of " + std::to_string(n));
    }
    for (int l : labels) {
        if (l < 0 || l >= c) throw ShapeError("label " + std::to_string(l) + " out of range");
    }
    Tensor out = Tensor::scalar(detail::softmax_ce_fwd<float>(
        logits.data().data(), labels.data(), n, c));
    return finish(tape, OpKind::SoftmaxCrossEntropy, LabelAttrs{labels}, {logits}, std::move(out));
}

Tensor maxpool2d(const Tensor& input, int kernel, int stride, Graph* tape) {
    require_rank(input, 4, "maxpool2d input");
    const auto& xs = input.shape();
    if (kernel < 1 || stride < 1 || kernel > xs[2] || kernel > xs[3]) {
        throw ShapeError("maxpool2d kernel " + std::to_string(kernel) + " invalid for input " +
                         shape_str(xs));
    }
    const int oh = detail::conv_out_dim(xs[2], kernel, stride, 0);
    const int ow = detail::conv_out_dim(xs[3], kernel, stride, 0);
    Tensor out = Tensor::zeros({xs[0], xs[1], oh, ow});
    std::vector<int> argmax(size_t(out.numel()));
    detail::maxpool_fwd<float>(input.data().data(), out.data().data(), argmax.data(),
                               xs[0], xs[1], xs[2], xs[3], kernel, stride);
    return finish(tape, OpKind::MaxPool2d, PoolAttrs{kernel, stride}, {input}, std::move(out),
                  std::move(argmax));
}

Tensor pad_center(const Tensor& input, int target_side, Graph* tape) {
    require_rank(input, 4, "pad_center input");
    const auto& xs = input.shape();
    if (xs[2] != xs[3]) throw ShapeError("pad_center expects square images, got " + shape_str(xs));
    if (target_side < xs[2]) {
        throw ShapeError("pad_center target " + std::to_string(target_side) +
                         " smaller than input side " + std::to_string(xs[2]));
    }
    Tensor out = Tensor::zeros({xs[0], xs[1], target_side, target_side});
    detail::pad_center_fwd<float>(input.data().data(), out.data().data(),
                                  xs[0], xs[1], xs[2], target_side);
    return finish(tape, OpKind::PadCenter, PadAttrs{target_side}, {input}, std::move(out));
}

Tensor reshape(const Tensor& input, Shape to, Graph* tape) {
    if (numel_of(to) != input.numel()) {
        throw ShapeError("reshape from " + shape_str(input.shape()) + " to " + shape_str(to) +
                         " changes element count");
    }
    Tensor out = Tensor::from_data(to, {input.data().begin(), input.data().end()});
    return finish(tape, OpKind::Reshape, ReshapeAttrs{std::move(to)}, {input}, std::move(out));
}

// ---------------------------------------------------------------------------
// Reverse sweep
// ---------------------------------------------------------------------------

namespace {

void backward_node(const Node& node) {
    Tensor out = node.output;
    std::span<const float> gy = out.grad();

    switch (node.kind) {
    case OpKind::Conv2d: {
        Tensor x = node.inputs[0], k = node.inputs[1], b = node.inputs[2];
        const auto& a = std::get<ConvAttrs>(node.attrs);
        const auto& xs = x.shape();
        const auto& ks = k.shape();
        detail::conv2d_bwd<float>(x.data().data(), k.data().data(), gy.data(),
                                  x.needs_grad() ? x.grad().data() : nullptr,
                                  k.needs_grad() ? k.grad().data() : nullptr,
                                  b.needs_grad() ? b.grad().data() : nullptr,
                                  xs[0], xs[1], xs[2], xs[3], ks[0], ks[2], ks[3],
                                  a.stride, a.padding);
        break;
    }
    case OpKind::ConvTranspose2d: {
        Tensor x = node.inputs[0], k = node.inputs[1], b = node.inputs[2];
        const auto& a = std::get<ConvAttrs>(node.attrs);
        const auto& xs = x.shape();
        const auto& ks = k.shape();
        detail::conv2d_transpose_bwd<float>(x.data().data(), k.data().data(), gy.data(),
                                            x.needs_grad() ? x.grad().data() : nullptr,
                                            k.needs_grad() ? k.grad().data() : nullptr,
                                            b.needs_grad() ? b.grad().data() : nullptr,
                                            xs[0], xs[1], xs[2], xs[3], ks[1], ks[2], ks[3],
                                            a.stride, a.padding);
        break;
    }
    case OpKind::Dense: {
        Tensor x = node.inputs[0], w = node.inputs[1], b = node.inputs[2];
        const int n = x.shape()[0], f = x.shape()[1], g = w.shape()[1];
        if (x.needs_grad()) {
            detail::gemm_bt_acc<float>(gy.data(), w.data().data(), x.grad().data(), n, g, f);
        }
        if (w.needs_grad()) {
            detail::gemm_ta_acc<float>(x.data().data(), gy.data(), w.grad().data(), f, n, g);
        }
        if (b.needs_grad()) {
            auto gb = b.grad();
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < g; ++j) gb[j] += gy[size_t(i) * g + j];
            }
        }
        break;
    }
    case OpKind::Relu: {
        Tensor x = node.inputs[0];
        if (!x.needs_grad()) break;
        auto gx = x.grad();
        auto xd = x.data();
        // subgradient at 0 is 0
        for (std::int64_t i = 0; i < x.numel(); ++i) {
            if (xd[i] > 0.0f) gx[i] += gy[i];
        }
        break;
    }
    case OpKind::Sigmoid: {
        Tensor x = node.inputs[0];
        if (!x.needs_grad()) break;
        auto gx = x.grad();
        auto yd = out.data();
        for (std::int64_t i = 0; i < x.numel(); ++i) {
            gx[i] += gy[i] * yd[i] * (1.0f - yd[i]);
        }
        break;
    }
    case OpKind::Mse: {
        Tensor pred = node.inputs[0], target = node.inputs[1];
        if (!pred.needs_grad()) break;
        auto gp = pred.grad();
        auto pd = pred.data();
        auto td = target.data();
        const float scale = gy[0] * 2.0f / float(pred.numel());
        for (std::int64_t i = 0; i < pred.numel(); ++i) {
            gp[i] += scale * (pd[i] - td[i]);
        }
        break;
    }
    case OpKind::SoftmaxCrossEntropy: {
        Tensor logits = node.inputs[0];
        if (!logits.needs_grad()) break;
        const auto& labels = std::get<LabelAttrs>(node.attrs).labels;
        const int n = logits.shape()[0], c = logits.shape()[1];
        auto gl = logits.grad();
        auto ld = logits.data();
        const float scale = gy[0] / float(n);
        std::vector<float> prob(static_cast<std::size_t>(c));
        for (int i = 0; i < n; ++i) {
            const float* row = ld.data() + size_t(i) * c;
            float mx = row[0];
            for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
            float sum = 0.0f;
            for (int j = 0; j < c; ++j) {
                prob[j] = std::exp(row[j] - mx);
                sum += prob[j];
            }
            for (int j = 0; j < c; ++j) {
                const float p = prob[j] / sum;
                gl[size_t(i) * c + j] += scale * (p - (j == labels[i] ? 1.0f : 0.0f));
            }
        }
        break;
    }
    case OpKind::MaxPool2d: {
        Tensor x = node.inputs[0];
        if (!x.needs_grad()) break;
        auto gx = x.grad();
        const auto& xs = x.shape();
        const std::int64_t per_img_in = std::int64_t(xs[1]) * xs[2] * xs[3];
        const std::int64_t per_img_out = out.numel() / xs[0];
        for (int n = 0; n < xs[0]; ++n) {
            for (std::int64_t i = 0; i < per_img_out; ++i) {
                const std::int64_t oi = n * per_img_out + i;
                gx[n * per_img_in + node.saved[size_t(oi)]] += gy[size_t(oi)];
            }
        }
        break;
    }
    case OpKind::PadCenter: {
        Tensor x = node.inputs[0];
        if (!x.needs_grad()) break;
        auto gx = x.grad();
        const auto& xs = x.shape();
        const int s = xs[2], t = out.shape()[2], off = (t - s) / 2;
        for (int n = 0; n < xs[0]; ++n) {
            for (int c = 0; c < xs[1]; ++c) {
                const std::size_t src = (std::size_t(n) * xs[1] + c) * t * t;
                const std::size_t dst = (std::size_t(n) * xs[1] + c) * s * s;
                for (int i = 0; i < s; ++i) {
                    for (int j = 0; j < s; ++j) {
                        gx[dst + std::size_t(i) * s + j] += gy[src + std::size_t(i + off) * t + (j + off)];
                    }
                }
            }
        }
        break;
    }
    case OpKind::Reshape: {
        Tensor x = node.inputs[0];
        if (!x.needs_grad()) break;
        auto gx = x.grad();
        for (std::int64_t i = 0; i < x.numel(); ++i) gx[i] += gy[i];
        break;
    }
    }
}

} // namespace

void backward(const Tensor& loss, Graph& graph) {
    if (graph.backward_done()) {
        throw AutodiffError("backward already ran on this graph; re-run forward first");
    }
    if (!loss.defined() || loss.numel() != 1) {
        throw AutodiffError("backward requires a scalar loss");
    }
    const auto& nodes = graph.nodes();
    int loss_idx = -1;
    for (int i = int(nodes.size()) - 1; i >= 0; --i) {
        if (nodes[size_t(i)].output.id() == loss.id()) {
            loss_idx = i;
            break;
        }
    }
    if (loss_idx < 0) {
        throw AutodiffError("loss tensor was not produced by this graph");
    }

    Tensor seed = nodes[size_t(loss_idx)].output;
    seed.grad()[0] = 1.0f;

    for (int i = loss_idx; i >= 0; --i) {
        const Node& node = nodes[size_t(i)];
        Tensor out = node.output;
        if (!out.has_grad()) continue; // not on a path to the loss
        backward_node(node);
        if (!out.requires_grad()) out.drop_grad(); // only parameters keep gradients
    }
    graph.mark_backward_done();
}

} // namespace plae
