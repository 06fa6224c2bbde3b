#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "expe/error.hpp"

namespace expe::num {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// Dense row-major array with optional gradient storage.
//
// Tensor is a handle: copies share the underlying buffers, so a parameter
// held by a model and the same parameter referenced from a tape are one
// object. Use clone() for an independent copy. view() reinterprets the shape
// over the same data and gradient buffers.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false)
      : Tensor(shape, std::vector<T>(shape_numel(shape), T{0}), requires_grad) {}

  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
      : impl_(std::make_shared<Impl>()) {
    for (auto d : shape) {
      if (d == 0) throw DimensionError("tensor dims must be positive, got " + shape_str(shape));
    }
    if (shape_numel(shape) != values.size()) {
      throw DimensionError("shape " + shape_str(shape) + " holds " +
                           std::to_string(shape_numel(shape)) + " values, got " +
                           std::to_string(values.size()));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::make_shared<std::vector<T>>(std::move(values));
    set_requires_grad(requires_grad);
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, T value) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, value));
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return Tensor({1}, {value}, requires_grad);
  }

  bool defined() const { return static_cast<bool>(impl_); }

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data->size(); }
  std::size_t last_dim() const { return impl_->shape.back(); }
  std::size_t rows() const { return numel() / last_dim(); }

  std::span<T> data() { return *impl_->data; }
  std::span<const T> data() const { return *impl_->data; }

  T& operator[](std::size_t i) { return (*impl_->data)[i]; }
  const T& operator[](std::size_t i) const { return (*impl_->data)[i]; }

  T item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return (*impl_->data)[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }

  void set_requires_grad(bool flag) {
    impl_->requires_grad = flag;
    if (flag && !impl_->grad) impl_->grad = std::make_shared<std::vector<T>>(numel(), T{0});
  }

  bool has_grad() const { return static_cast<bool>(impl_->grad); }

  // Gradient accumulator. Mutable through a const handle: ops that only read
  // a tensor's values still accumulate into its gradient during backward.
  std::span<T> grad() const {
    if (!impl_->grad) throw ContractError("tensor " + shape_str(shape()) + " has no gradient");
    return *impl_->grad;
  }

  void zero_grad() {
    if (impl_->grad) std::fill(impl_->grad->begin(), impl_->grad->end(), T{0});
  }

  Tensor view(Shape shape) const {
    if (shape_numel(shape) != numel()) {
      throw DimensionError("cannot view " + shape_str(this->shape()) + " as " + shape_str(shape));
    }
    Tensor out;
    out.impl_ = std::make_shared<Impl>(*impl_);
    out.impl_->shape = std::move(shape);
    return out;
  }

  Tensor clone() const {
    return Tensor(shape(), std::vector<T>(impl_->data->begin(), impl_->data->end()));
  }

  bool same_storage(const Tensor& other) const {
    return defined() && other.defined() && impl_->data == other.impl_->data;
  }

 private:
  struct Impl {
    Shape shape;
    std::shared_ptr<std::vector<T>> data;
    std::shared_ptr<std::vector<T>> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

}  // namespace expe::num
