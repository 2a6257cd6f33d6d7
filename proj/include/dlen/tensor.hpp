#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dlen/error.hpp"

namespace dlen {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Normalizes a possibly negative axis against `rank`; throws ContractError when out of range.
std::size_t normalize_axis(int axis, std::size_t rank);

template <typename T>
struct TensorImpl;

// One entry of the computation record: the inputs an output was computed from and
// the rule that pushes the output gradient back into them.
template <typename T>
struct GradNode {
  const char* op = "";
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  // Reads out.grad and accumulates into inputs[i]->grad for every input that requires grad.
  std::function<void(TensorImpl<T>& out)> backward;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  // Creation sequence number. Inputs always have smaller ids than their consumers, so
  // sorting recorded nodes by descending id is a valid reverse topological order.
  std::uint64_t node_id = 0;
  std::shared_ptr<GradNode<T>> node;  // null for leaves

  // Returns the gradient buffer, allocating it zero-filled on first use.
  std::vector<T>& grad_buffer();
};

// N-dimensional row-major array with optional gradient tracking.
//
// Tensor is a handle: copies share the underlying buffer, as with parameters that are
// referenced from both a model and an optimizer. Use clone() or detach() for an
// independent copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl<T>> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(const Shape& shape);
  static Tensor ones(const Shape& shape);
  static Tensor full(const Shape& shape, T value);
  static Tensor from_data(const Shape& shape, std::vector<T> data);
  static Tensor scalar(T value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }
  // Extent along `axis`; negative axes count from the end.
  std::size_t dim(int axis) const;

  std::span<const T> data() const { return impl_->data; }
  // Direct write access. Intended for leaves (parameter updates, test fixtures); writing
  // into a recorded intermediate does not invalidate saved backward state.
  std::span<T> mutable_data() { return impl_->data; }
  T item() const;
  T at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on = true);
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  // Gradient as a standalone tensor (zeros when no gradient was accumulated).
  Tensor grad_tensor() const;
  void zero_grad();

  bool is_leaf() const { return impl_->node == nullptr; }
  std::uint64_t node_id() const { return impl_->node_id; }

  // Copy of the values without graph history; requires_grad is false.
  Tensor detach() const;
  // Copy of the values keeping requires_grad, as a new leaf.
  Tensor clone() const;

  const std::shared_ptr<TensorImpl<T>>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

// Reverse-mode differentiation from a scalar loss. Every requires_grad leaf reachable
// from `loss` receives d(loss)/d(leaf), accumulated into any existing gradient.
template <typename T>
void backward(const Tensor<T>& loss);

// Records an operation result. The node is attached only when gradient recording is
// enabled on this thread and at least one input requires grad.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, const char* op,
                      std::vector<Tensor<T>> inputs,
                      std::function<void(TensorImpl<T>& out)> backward_rule);

bool grad_enabled();

// Disables recording for the current thread while alive (inference, parameter updates).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Throws NonFiniteError naming `what` when any value is NaN or infinite.
template <typename T>
void check_finite(std::span<const T> values, const std::string& what);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace dlen
