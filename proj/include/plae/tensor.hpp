#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "plae/errors.hpp"

namespace plae {

using Shape = std::vector<int>;

std::int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorImpl {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;     // empty until first use
    bool requires_grad = false;  // true for trainable leaves
    bool needs_grad = false;     // true if backward must deposit a gradient here
};
} // namespace detail

// Shared-storage handle to an n-dimensional float32 array in row-major order.
// Copies are shallow: two handles to the same storage observe each other's
// writes, which is what lets the tape, the optimizer, and the model structs
// all refer to one parameter. Gradient buffers are allocated lazily.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<float> values, bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::int64_t numel() const { return std::int64_t(impl_->data.size()); }

    std::span<float> data() { return impl_->data; }
    std::span<const float> data() const { return impl_->data; }

    // Value of a one-element tensor.
    float item() const;

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool v) {
        impl_->requires_grad = v;
        if (v) impl_->needs_grad = true;
    }
    bool needs_grad() const { return impl_->needs_grad; }
    void set_needs_grad(bool v) { impl_->needs_grad = v; }

    bool has_grad() const { return defined() && !impl_->grad.empty(); }
    // Gradient buffer, zero-allocated on first access.
    std::span<float> grad();
    std::span<const float> grad() const;
    void zero_grad();
    void drop_grad();

    // Constant deep copy of the data: no requires_grad, no gradient state.
    Tensor clone() const;

    // Stable identity of the underlying storage.
    const detail::TensorImpl* id() const { return impl_.get(); }

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

} // namespace plae
