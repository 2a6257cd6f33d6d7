#include "dlen/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace dlen {

namespace {

std::atomic<std::uint64_t> g_next_node_id{1};
thread_local bool t_grad_enabled = true;

template <typename T>
std::shared_ptr<TensorImpl<T>> new_impl(Shape shape, std::vector<T> data) {
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->node_id = g_next_node_id.fetch_add(1, std::memory_order_relaxed);
  return impl;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t normalize_axis(int axis, std::size_t rank) {
  const auto r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ContractError("axis " + std::to_string(axis) + " out of range for rank " +
                        std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

template <typename T>
std::vector<T>& TensorImpl<T>::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), T(0));
  return grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(const Shape& shape) {
  return full(shape, T(0));
}

template <typename T>
Tensor<T> Tensor<T>::ones(const Shape& shape) {
  return full(shape, T(1));
}

template <typename T>
Tensor<T> Tensor<T>::full(const Shape& shape, T value) {
  return Tensor(new_impl<T>(shape, std::vector<T>(shape_numel(shape), value)));
}

template <typename T>
Tensor<T> Tensor<T>::from_data(const Shape& shape, std::vector<T> data) {
  if (shape_numel(shape) != data.size()) {
    throw ContractError("from_data: shape " + shape_str(shape) + " needs " +
                        std::to_string(shape_numel(shape)) + " values, got " +
                        std::to_string(data.size()));
  }
  return Tensor(new_impl<T>(shape, std::move(data)));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value) {
  return Tensor(new_impl<T>(Shape{}, std::vector<T>{value}));
}

template <typename T>
std::size_t Tensor<T>::dim(int axis) const {
  return impl_->shape[normalize_axis(axis, rank())];
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw ContractError("item() on tensor of shape " + shape_str(shape()));
  }
  return impl_->data[0];
}

template <typename T>
T Tensor<T>::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) throw ContractError("at(): index rank mismatch");
  std::size_t flat = 0;
  std::size_t i = 0;
  for (auto v : index) {
    if (v >= impl_->shape[i]) throw ContractError("at(): index out of range");
    flat = flat * impl_->shape[i] + v;
    ++i;
  }
  return impl_->data[flat];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

template <typename T>
Tensor<T> Tensor<T>::grad_tensor() const {
  if (impl_->grad.empty()) return zeros(shape());
  return from_data(shape(), impl_->grad);
}

template <typename T>
void Tensor<T>::zero_grad() {
  impl_->grad.clear();
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(new_impl<T>(impl_->shape, impl_->data));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  auto out = detach();
  out.set_requires_grad(requires_grad());
  return out;
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, const char* op,
                      std::vector<Tensor<T>> inputs,
                      std::function<void(TensorImpl<T>& out)> backward_rule) {
  auto impl = new_impl<T>(std::move(shape), std::move(data));
  if (!t_grad_enabled) return Tensor<T>(std::move(impl));
  const bool track = std::any_of(inputs.begin(), inputs.end(), [](const Tensor<T>& t) {
    return t.defined() && t.requires_grad();
  });
  if (!track) return Tensor<T>(std::move(impl));
  auto node = std::make_shared<GradNode<T>>();
  node->op = op;
  node->inputs.reserve(inputs.size());
  for (auto& t : inputs) node->inputs.push_back(t.impl());
  node->backward = std::move(backward_rule);
  impl->requires_grad = true;
  impl->node = std::move(node);
  return Tensor<T>(std::move(impl));
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) return;

  // Collect the recorded nodes reachable from the loss.
  std::vector<TensorImpl<T>*> order;
  std::unordered_set<TensorImpl<T>*> seen;
  std::vector<TensorImpl<T>*> stack{loss.impl().get()};
  while (!stack.empty()) {
    auto* cur = stack.back();
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    if (!cur->node) continue;
    order.push_back(cur);
    for (auto& in : cur->node->inputs) {
      if (in && in->requires_grad) stack.push_back(in.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const TensorImpl<T>* a, const TensorImpl<T>* b) { return a->node_id > b->node_id; });

  loss.impl()->grad_buffer()[0] += T(1);
  for (auto* impl : order) {
    if (impl->grad.empty()) continue;
    impl->node->backward(*impl);
    // Intermediate gradients are not needed once propagated.
    if (impl != loss.impl().get()) {
      impl->grad.clear();
      impl->grad.shrink_to_fit();
    }
  }
}

template <typename T>
void check_finite(std::span<const T> values, const std::string& what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NonFiniteError(what + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

template class Tensor<float>;
template class Tensor<double>;
template struct TensorImpl<float>;
template struct TensorImpl<double>;
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);
template Tensor<float> make_result(Shape, std::vector<float>, const char*, std::vector<Tensor<float>>,
                                   std::function<void(TensorImpl<float>&)>);
template Tensor<double> make_result(Shape, std::vector<double>, const char*,
                                    std::vector<Tensor<double>>,
                                    std::function<void(TensorImpl<double>&)>);
template void check_finite(std::span<const float>, const std::string&);
template void check_finite(std::span<const double>, const std::string&);

}  // namespace dlen
