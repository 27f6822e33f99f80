#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "plae/graph.hpp"
#include "plae/rng.hpp"
#include "plae/shadow.hpp"
#include "plae/tensor.hpp"

namespace plae::testutil {

inline Tensor random_tensor(Shape shape, Rng& rng, float lo = -0.5f, float hi = 0.5f,
                            bool requires_grad = false) {
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

// Relative error with an absolute floor, the metric used by every gradient check.
inline double rel_err(double a, double b, double floor = 1e-6) {
    const double scale = std::max({std::fabs(a), std::fabs(b), floor});
    return std::fabs(a - b) / scale;
}

struct GradCheckResult {
    double max_rel_err = 0.0;
    int checked = 0;
    int skipped = 0;   // coordinates where the loss is not locally smooth
    std::string worst; // description of the worst coordinate
};

// Central finite differences via the 64-bit shadow replay of the recorded
// graph, compared against the analytic float32 gradients already deposited by
// backward(). Checks up to max_coords_per_leaf coordinates per leaf (all of
// them when the leaf is small). Gradients must be populated before the call.
//
// Coordinates whose +-h interval crosses a relu/maxpool kink are skipped: the
// estimates at step h and h/16 disagree there, which is detectable without
// consulting the analytic gradient. The relu subgradient convention at exactly
// zero has its own dedicated test.
inline GradCheckResult finite_difference_check(const Graph& graph, const Tensor& loss,
                                               const std::vector<Tensor>& leaves,
                                               double h = 1e-3,
                                               int max_coords_per_leaf = 64,
                                               std::uint64_t pick_seed = 17) {
    ShadowReplay replay(graph);
    GradCheckResult result;
    Rng pick(pick_seed);
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        const Tensor& leaf = leaves[li];
        auto analytic = leaf.grad();
        const std::int64_t n = leaf.numel();
        std::vector<std::int64_t> coords;
        if (n <= max_coords_per_leaf) {
            for (std::int64_t i = 0; i < n; ++i) coords.push_back(i);
        } else {
            for (int i = 0; i < max_coords_per_leaf; ++i) {
                coords.push_back(pick.uniform_int(int(n)));
            }
        }
        for (std::int64_t c : coords) {
            const double w = double(leaf.data()[size_t(c)]);
            auto central = [&](double step) {
                const double up = replay.eval(loss, leaf, c, w + step);
                const double down = replay.eval(loss, leaf, c, w - step);
                return (up - down) / (2.0 * step);
            };
            const double fd = central(h);
            const double fd_fine = central(h / 16.0);
            const bool smooth = rel_err(fd, fd_fine) < 5e-4 ||
                                (std::fabs(fd) < 1e-9 && std::fabs(fd_fine) < 1e-9);
            if (!smooth) {
                ++result.skipped;
                continue;
            }
            ++result.checked;
            const double err = rel_err(double(analytic[size_t(c)]), fd);
            if (err > result.max_rel_err) {
                result.max_rel_err = err;
                result.worst = "leaf " + std::to_string(li) + " coord " + std::to_string(c) +
                               " analytic " + std::to_string(analytic[size_t(c)]) + " fd " +
                               std::to_string(fd);
            }
        }
    }
    return result;
}

inline bool all_finite(const Tensor& t) {
    for (float v : t.data()) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

struct ChainCheckResult {
    GradCheckResult fd;          // shadow analytic vs central differences
    double max_float_dev = 0.0;  // float32 engine vs shadow analytic
    std::string worst_float;
};

// Deep-chain gradient check. The backward formulas are verified against
// finite differences entirely in 64-bit shadow mode; the production float32
// gradients are then required to agree with the shadow gradients within
// float accumulation headroom.
inline ChainCheckResult chain_gradient_check(const Graph& graph, const Tensor& loss,
                                             const std::vector<Tensor>& leaves,
                                             double h = 1e-3,
                                             int max_coords_per_leaf = 32,
                                             std::uint64_t pick_seed = 17) {
    ChainCheckResult result;
    ShadowReplay replay(graph);
    ShadowGradients shadow(graph, loss);
    Rng pick(pick_seed);
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        const Tensor& leaf = leaves[li];
        const auto& sg = shadow.grad(leaf);
        auto fg = leaf.grad();
        const std::int64_t n = leaf.numel();

        double gnorm = 0.0;
        for (double v : sg) gnorm = std::max(gnorm, std::fabs(v));
        for (std::int64_t c = 0; c < n; ++c) {
            const double dev = std::fabs(double(fg[size_t(c)]) - sg[size_t(c)]) /
                               std::max(gnorm, 1e-6);
            if (dev > result.max_float_dev) {
                result.max_float_dev = dev;
                result.worst_float = "leaf " + std::to_string(li) + " coord " + std::to_string(c);
            }
        }

        std::vector<std::int64_t> coords;
        if (n <= max_coords_per_leaf) {
            for (std::int64_t i = 0; i < n; ++i) coords.push_back(i);
        } else {
            for (int i = 0; i < max_coords_per_leaf; ++i) coords.push_back(pick.uniform_int(int(n)));
        }
        for (std::int64_t c : coords) {
            const double w = double(leaf.data()[size_t(c)]);
            auto central = [&](double step) {
                return (replay.eval(loss, leaf, c, w + step) -
                        replay.eval(loss, leaf, c, w - step)) / (2.0 * step);
            };
            const double fd = central(h);
            const double fd_fine = central(h / 16.0);
            const bool smooth = rel_err(fd, fd_fine) < 5e-4 ||
                                (std::fabs(fd) < 1e-9 && std::fabs(fd_fine) < 1e-9);
            if (!smooth) {
                ++result.fd.skipped;
                continue;
            }
            ++result.fd.checked;
            const double err = rel_err(sg[size_t(c)], fd);
            if (err > result.fd.max_rel_err) {
                result.fd.max_rel_err = err;
                result.fd.worst = "leaf " + std::to_string(li) + " coord " + std::to_string(c) +
                                  " shadow " + std::to_string(sg[size_t(c)]) + " fd " +
                                  std::to_string(fd);
            }
        }
    }
    return result;
}

} // namespace plae::testutil
