#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plae/tensor.hpp"

namespace plae {

struct AdamConfig {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f; // conventional default
};

// Adam with bias correction. Moment buffers persist across steps and can be
// exported for resumable checkpoints.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig cfg = {});

    // One update. Every parameter must hold a populated gradient.
    void step();

    void zero_grad();

    std::int64_t step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }
    std::size_t param_count() const { return slots_.size(); }

    // Moment buffers for checkpointing, index-aligned with the parameter list.
    const std::vector<float>& first_moment(std::size_t i) const { return slots_[i].m; }
    const std::vector<float>& second_moment(std::size_t i) const { return slots_[i].v; }
    void restore_state(std::size_t i, std::vector<float> m, std::vector<float> v);
    void set_step_count(std::int64_t t) { t_ = t; }

private:
    struct Slot {
        Tensor param;
        std::vector<float> m;
        std::vector<float> v;
    };
    std::vector<Slot> slots_;
    AdamConfig cfg_;
    std::int64_t t_ = 0;
};

} // namespace plae
