#include "plae/shadow.hpp"

#include "plae/kernels.hpp"

namespace plae {

ShadowReplay::ShadowReplay(const Graph& graph) : graph_(graph) {
    const auto& nodes = graph_.nodes();
    for (int i = 0; i < int(nodes.size()); ++i) {
        producer_[nodes[size_t(i)].output.id()] = i;
    }
}

double ShadowReplay::eval(const Tensor& output) const {
    return eval(output, Tensor(), -1, 0.0);
}

double ShadowReplay::eval(const Tensor& output, const Tensor& leaf, std::int64_t coord,
                          double value) const {
    auto it = producer_.find(output.id());
    if (it == producer_.end()) {
        throw AutodiffError("shadow replay: output tensor was not produced by this graph");
    }
    const int out_idx = it->second;
    const auto& nodes = graph_.nodes();

    std::unordered_map<const detail::TensorImpl*, std::vector<double>> values;
    auto fetch = [&](const Tensor& t) -> const std::vector<double>& {
        auto found = values.find(t.id());
        if (found != values.end()) return found->second;
        // leaf: widen the recorded float32 contents, with the optional override
        std::vector<double> buf(t.data().begin(), t.data().end());
        if (leaf.defined() && t.id() == leaf.id() && coord >= 0) {
            buf[size_t(coord)] = value;
        }
        return values.emplace(t.id(), std::move(buf)).first->second;
    };

    for (int i = 0; i <= out_idx; ++i) {
        const Node& node = nodes[size_t(i)];
        std::vector<double> out(size_t(node.output.numel()));
        switch (node.kind) {
        case OpKind::Conv2d: {
            const auto& a = std::get<ConvAttrs>(node.attrs);
            const auto& xs = node.inputs[0].shape();
            const auto& ks = node.inputs[1].shape();
            detail::conv2d_fwd<double>(fetch(node.inputs[0]).data(), fetch(node.inputs[1]).data(),
                                       fetch(node.inputs[2]).data(), out.data(),
                                       xs[0], xs[1], xs[2], xs[3], ks[0], ks[2], ks[3],
                                       a.stride, a.padding);
            break;
        }
        case OpKind::ConvTranspose2d: {
            const auto& a = std::get<ConvAttrs>(node.attrs);
            const auto& xs = node.inputs[0].shape();
            const auto& ks = node.inputs[1].shape();
            detail::conv2d_transpose_fwd<double>(fetch(node.inputs[0]).data(),
                                                 fetch(node.inputs[1]).data(),
                                                 fetch(node.inputs[2]).data(), out.data(),
                                                 xs[0], xs[1], xs[2], xs[3], ks[1], ks[2], ks[3],
                                                 a.stride, a.padding);
            break;
        }
        case OpKind::Dense: {
            const auto& xs = node.inputs[0].shape();
            detail::dense_fwd<double>(fetch(node.inputs[0]).data(), fetch(node.inputs[1]).data(),
                                      fetch(node.inputs[2]).data(), out.data(),
                                      xs[0], xs[1], node.inputs[1].shape()[1]);
            break;
        }
        case OpKind::Relu:
            detail::relu_fwd<double>(fetch(node.inputs[0]).data(), out.data(), out.size());
            break;
        case OpKind::Sigmoid:
            detail::sigmoid_fwd<double>(fetch(node.inputs[0]).data(), out.data(), out.size());
            break;
        case OpKind::Mse:
            out[0] = detail::mse_fwd<double>(fetch(node.inputs[0]).data(),
                                             fetch(node.inputs[1]).data(),
                                             size_t(node.inputs[0].numel()));
            break;
        case OpKind::SoftmaxCrossEntropy: {
            const auto& labels = std::get<LabelAttrs>(node.attrs).labels;
            out[0] = detail::softmax_ce_fwd<double>(fetch(node.inputs[0]).data(), labels.data(),
                                                    node.inputs[0].shape()[0],
                                                    node.inputs[0].shape()[1]);
            break;
        }
        case OpKind::MaxPool2d: {
            const auto& a = std::get<PoolAttrs>(node.attrs);
            const auto& xs = node.inputs[0].shape();
            detail::maxpool_fwd<double>(fetch(node.inputs[0]).data(), out.data(), nullptr,
                                        xs[0], xs[1], xs[2], xs[3], a.kernel, a.stride);
            break;
        }
        case OpKind::PadCenter: {
            const auto& a = std::get<PadAttrs>(node.attrs);
            const auto& xs = node.inputs[0].shape();
            detail::pad_center_fwd<double>(fetch(node.inputs[0]).data(), out.data(),
                                           xs[0], xs[1], xs[2], a.target);
            break;
        }
        case OpKind::Reshape:
            out = fetch(node.inputs[0]);
            break;
        }
        values[node.output.id()] = std::move(out);
    }

    return values.at(output.id()).at(0);
}

ShadowGradients::ShadowGradients(const Graph& graph, const Tensor& loss) {
    const auto& nodes = graph.nodes();
    int loss_idx = -1;
    for (int i = int(nodes.size()) - 1; i >= 0; --i) {
        if (nodes[size_t(i)].output.id() == loss.id()) {
            loss_idx = i;
            break;
        }
    }
    if (loss_idx < 0) {
        throw AutodiffError("shadow gradients: loss tensor was not produced by this graph");
    }
    if (loss.numel() != 1) throw AutodiffError("shadow gradients: loss must be scalar");

    // forward replay, keeping every buffer
    std::unordered_map<const detail::TensorImpl*, std::vector<double>> values;
    auto fetch = [&](const Tensor& t) -> std::vector<double>& {
        auto found = values.find(t.id());
        if (found != values.end()) return found->second;
        std::vector<double> buf(t.data().begin(), t.data().end());
        return values.emplace(t.id(), std::move(buf)).first->second;
    };
    for (int i = 0; i <= loss_idx; ++i) {
        const Node& node = nodes[size_t(i)];
        std::vector<double> out(size_t(node.output.numel()));
        switch (node.kind) {
        case OpKind::Conv2d: {
            const auto& a = std::get<ConvAttrs>(node.attrs);
            const auto& xs = node.inputs[0].shape();
            const auto& ks = node.inputs[1].shape();
            detail::conv2d_fwd<double>(fetch(node.inputs[0]).data(), fetch(node.inputs[1]).data(),
                                       fetch(node.inputs[2]).data(), out.data(),
                                       xs[0], xs[1], xs[2], xs[3], ks[0], ks[2], ks[3],
                                       a.stride, a.padding);
            break;
        }
        case OpKind::ConvTranspose2d: {
            const auto& a = std::get<ConvAttrs>(node.attrs);
            const auto& xs = node.inputs[0].shape();
            const auto& ks = node.inputs[1].shape();
            detail::conv2d_transpose_fwd<double>(fetch(node.inputs[0]).data(),
                                                 fetch(node.inputs[1]).data(),
                                                 fetch(node.inputs[2]).data(), out.data(),
                                                 xs[0], xs[1], xs[2], xs[3], ks[1], ks[2], ks[3],
                                                 a.stride, a.padding);
            break;
        }
        case OpKind::Dense:
            detail::dense_fwd<double>(fetch(node.inputs[0]).data(), fetch(node.inputs[1]).data(),
                                      fetch(node.inputs[2]).data(), out.data(),
                                      node.inputs[0].shape()[0], node.inputs[0].shape()[1],
                                      node.inputs[1].shape()[1]);
            break;
        case OpKind::Relu:
            detail::relu_fwd<double>(fetch(node.inputs[0]).data(), out.data(), out.size());
            break;
        case OpKind::Sigmoid:
            detail::sigmoid_fwd<double>(fetch(node.inputs[0]).data(), out.data(), out.size());
            break;
        case OpKind::Mse:
            out[0] = detail::mse_fwd<double>(fetch(node.inputs[0]).data(),
                                             fetch(node.inputs[1]).data(),
                                             size_t(node.inputs[0].numel()));
            break;
        case OpKind::SoftmaxCrossEntropy: {
            const auto& labels = std::get<LabelAttrs>(node.attrs).labels;
            out[0] = detail::softmax_ce_fwd<double>(fetch(node.inputs[0]).data(), labels.data(),
                                                    node.inputs[0].shape()[0],
                                                    node.inputs[0].shape()[1]);
            break;
        }
        case OpKind::MaxPool2d: {
            const auto& a = std::get<PoolAttrs>(node.attrs);
            const auto& xs = node.inputs[0].shape();
            detail::maxpool_fwd<double>(fetch(node.inputs[0]).data(), out.data(), nullptr,
                                        xs[0], xs[1], xs[2], xs[3], a.kernel, a.stride);
            break;
        }
        case OpKind::PadCenter: {
            const auto& a = std::get<PadAttrs>(node.attrs);
            const auto& xs = node.inputs[0].shape();
            detail::pad_center_fwd<double>(fetch(node.inputs[0]).data(), out.data(),
                                           xs[0], xs[1], xs[2], a.target);
            break;
        }
        case OpKind::Reshape:
            out = fetch(node.inputs[0]);
            break;
        }
        values[node.output.id()] = std::move(out);
    }

    // reverse sweep
    auto gbuf = [&](const Tensor& t) -> std::vector<double>& {
        auto found = grads_.find(t.id());
        if (found != grads_.end()) return found->second;
        return grads_.emplace(t.id(), std::vector<double>(size_t(t.numel()), 0.0)).first->second;
    };
    gbuf(loss)[0] = 1.0;

    for (int i = loss_idx; i >= 0; --i) {
        const Node& node = nodes[size_t(i)];
        auto gy_it = grads_.find(node.output.id());
        if (gy_it == grads_.end()) continue;
        const std::vector<double>& gy = gy_it->second;
        switch (node.kind) {
        case OpKind::Conv2d: {
            const auto& a = std::get<ConvAttrs>(node.attrs);
            const auto& xs = node.inputs[0].shape();
            const auto& ks = node.inputs[1].shape();
            detail::conv2d_bwd<double>(values.at(node.inputs[0].id()).data(),
                                       values.at(node.inputs[1].id()).data(), gy.data(),
                                       gbuf(node.inputs[0]).data(), gbuf(node.inputs[1]).data(),
                                       gbuf(node.inputs[2]).data(),
                                       xs[0], xs[1], xs[2], xs[3], ks[0], ks[2], ks[3],
                                       a.stride, a.padding);
            break;
        }
        case OpKind::ConvTranspose2d: {
            const auto& a = std::get<ConvAttrs>(node.attrs);
            const auto& xs = node.inputs[0].shape();
            const auto& ks = node.inputs[1].shape();
            detail::conv2d_transpose_bwd<double>(values.at(node.inputs[0].id()).data(),
                                                 values.at(node.inputs[1].id()).data(), gy.data(),
                                                 gbuf(node.inputs[0]).data(),
                                                 gbuf(node.inputs[1]).data(),
                                                 gbuf(node.inputs[2]).data(),
                                                 xs[0], xs[1], xs[2], xs[3], ks[1], ks[2], ks[3],
                                                 a.stride, a.padding);
            break;
        }
        case OpKind::Dense: {
            const int n = node.inputs[0].shape()[0];
            const int f = node.inputs[0].shape()[1];
            const int g = node.inputs[1].shape()[1];
            detail::gemm_bt_acc<double>(gy.data(), values.at(node.inputs[1].id()).data(),
                                        gbuf(node.inputs[0]).data(), n, g, f);
            detail::gemm_ta_acc<double>(values.at(node.inputs[0].id()).data(), gy.data(),
                                        gbuf(node.inputs[1]).data(), f, n, g);
            auto& gb = gbuf(node.inputs[2]);
            for (int r = 0; r < n; ++r) {
                for (int j = 0; j < g; ++j) gb[size_t(j)] += gy[size_t(r) * g + j];
            }
            break;
        }
        case OpKind::Relu: {
            const auto& x = values.at(node.inputs[0].id());
            auto& gx = gbuf(node.inputs[0]);
            for (std::size_t j = 0; j < x.size(); ++j) {
                if (x[j] > 0.0) gx[j] += gy[j];
            }
            break;
        }
        case OpKind::Sigmoid: {
            const auto& y = values.at(node.output.id());
            auto& gx = gbuf(node.inputs[0]);
            for (std::size_t j = 0; j < y.size(); ++j) gx[j] += gy[j] * y[j] * (1.0 - y[j]);
            break;
        }
        case OpKind::Mse: {
            const auto& a = values.at(node.inputs[0].id());
            const auto& b = values.at(node.inputs[1].id());
            auto& gx = gbuf(node.inputs[0]);
            const double scale = gy[0] * 2.0 / double(a.size());
            for (std::size_t j = 0; j < a.size(); ++j) gx[j] += scale * (a[j] - b[j]);
            break;
        }
        case OpKind::SoftmaxCrossEntropy: {
            const auto& labels = std::get<LabelAttrs>(node.attrs).labels;
            const int n = node.inputs[0].shape()[0];
            const int c = node.inputs[0].shape()[1];
            const auto& lv = values.at(node.inputs[0].id());
            auto& gx = gbuf(node.inputs[0]);
            const double scale = gy[0] / double(n);
            for (int r = 0; r < n; ++r) {
                const double* row = lv.data() + std::size_t(r) * c;
                double mx = row[0];
                for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
                double sum = 0.0;
                for (int j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
                for (int j = 0; j < c; ++j) {
                    const double p = std::exp(row[j] - mx) / sum;
                    gx[std::size_t(r) * c + j] += scale * (p - (j == labels[r] ? 1.0 : 0.0));
                }
            }
            break;
        }
        case OpKind::MaxPool2d: {
            const auto& a = std::get<PoolAttrs>(node.attrs);
            const auto& xs = node.inputs[0].shape();
            const auto& xv = values.at(node.inputs[0].id());
            auto& gx = gbuf(node.inputs[0]);
            std::vector<double> dummy(gy.size());
            std::vector<int> argmax(gy.size());
            detail::maxpool_fwd<double>(xv.data(), dummy.data(), argmax.data(),
                                        xs[0], xs[1], xs[2], xs[3], a.kernel, a.stride);
            const std::int64_t per_in = std::int64_t(xs[1]) * xs[2] * xs[3];
            const std::int64_t per_out = std::int64_t(gy.size()) / xs[0];
            for (int b = 0; b < xs[0]; ++b) {
                for (std::int64_t j = 0; j < per_out; ++j) {
                    gx[size_t(b * per_in + argmax[size_t(b * per_out + j)])] +=
                        gy[size_t(b * per_out + j)];
                }
            }
            break;
        }
        case OpKind::PadCenter: {
            const auto& xs = node.inputs[0].shape();
            const int s = xs[2];
            const int t = node.output.shape()[2];
            const int off = (t - s) / 2;
            auto& gx = gbuf(node.inputs[0]);
            for (int b = 0; b < xs[0]; ++b) {
                for (int c = 0; c < xs[1]; ++c) {
                    const std::size_t src = (std::size_t(b) * xs[1] + c) * t * t;
                    const std::size_t dst = (std::size_t(b) * xs[1] + c) * s * s;
                    for (int r = 0; r < s; ++r) {
                        for (int q = 0; q < s; ++q) {
                            gx[dst + std::size_t(r) * s + q] +=
                                gy[src + std::size_t(r + off) * t + (q + off)];
                        }
                    }
                }
            }
            break;
        }
        case OpKind::Reshape: {
            auto& gx = gbuf(node.inputs[0]);
            for (std::size_t j = 0; j < gy.size(); ++j) gx[j] += gy[j];
            break;
        }
        }
    }
}

const std::vector<double>& ShadowGradients::grad(const Tensor& leaf) const {
    auto it = grads_.find(leaf.id());
    if (it != grads_.end()) return it->second;
    if (zeros_.size() < size_t(leaf.numel())) zeros_.assign(size_t(leaf.numel()), 0.0);
    return zeros_;
}

} // namespace plae
