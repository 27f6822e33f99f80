#include "plae/adam.hpp"

#include <cmath>

namespace plae {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : cfg_(cfg) {
    slots_.reserve(params.size());
    for (auto& p : params) {
        Slot s;
        s.m.assign(size_t(p.numel()), 0.0f);
        s.v.assign(size_t(p.numel()), 0.0f);
        s.param = std::move(p);
        slots_.push_back(std::move(s));
    }
}

void Adam::step() {
    ++t_;
    const float c1 = 1.0f - float(std::pow(double(cfg_.beta1), double(t_)));
    const float c2 = 1.0f - float(std::pow(double(cfg_.beta2), double(t_)));
    for (auto& slot : slots_) {
        if (!slot.param.has_grad()) {
            throw AutodiffError("adam step: parameter gradient missing");
        }
        auto w = slot.param.data();
        auto g = slot.param.grad();
        for (std::size_t i = 0; i < w.size(); ++i) {
            slot.m[i] = cfg_.beta1 * slot.m[i] + (1.0f - cfg_.beta1) * g[i];
            slot.v[i] = cfg_.beta2 * slot.v[i] + (1.0f - cfg_.beta2) * g[i] * g[i];
            const float mhat = slot.m[i] / c1;
            const float vhat = slot.v[i] / c2;
            w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (auto& slot : slots_) slot.param.zero_grad();
}

void Adam::restore_state(std::size_t i, std::vector<float> m, std::vector<float> v) {
    if (m.size() != slots_[i].m.size() || v.size() != slots_[i].v.size()) {
        throw ShapeError("adam state size does not match parameter");
    }
    slots_[i].m = std::move(m);
    slots_[i].v = std::move(v);
}

} // namespace plae
