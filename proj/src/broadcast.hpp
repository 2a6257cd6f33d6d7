#pragma once

#include <vector>

#include "dlen/tensor.hpp"

namespace dlen::detail {

// Maps each flat index of `a` to the flat index of the broadcast operand `b`.
class BroadcastMap {
 public:
  BroadcastMap(const Shape& a, const Shape& b) : a_(a) {
    const std::size_t bn = shape_numel(b);
    if (a == b) {
      mode_ = Mode::same;
      return;
    }
    if (bn == 1) {
      mode_ = Mode::scalar;
      return;
    }
    if (a.size() != b.size()) {
      throw ContractError("elementwise: cannot broadcast " + shape_str(b) + " to " + shape_str(a));
    }
    mode_ = Mode::general;
    strides_.assign(a.size(), 0);
    std::size_t stride = 1;
    for (std::size_t i = a.size(); i-- > 0;) {
      if (b[i] == a[i]) {
        strides_[i] = stride;
      } else if (b[i] != 1) {
        throw ContractError("elementwise: cannot broadcast " + shape_str(b) + " to " +
                            shape_str(a));
      }
      stride *= b[i];
    }
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    const std::size_t n = shape_numel(a_);
    if (mode_ == Mode::same) {
      for (std::size_t i = 0; i < n; ++i) fn(i, i);
      return;
    }
    if (mode_ == Mode::scalar) {
      for (std::size_t i = 0; i < n; ++i) fn(i, std::size_t{0});
      return;
    }
    if (n == 0) return;
    const std::size_t r = a_.size();
    const std::size_t inner = a_[r - 1];
    const std::size_t inner_stride = strides_[r - 1];
    std::vector<std::size_t> idx(r, 0);
    std::size_t b_off = 0;
    for (std::size_t a_off = 0; a_off < n; a_off += inner) {
      for (std::size_t i = 0; i < inner; ++i) fn(a_off + i, b_off + i * inner_stride);
      // Advance the odometer over the leading axes.
      for (std::size_t ax = r - 1; ax-- > 0;) {
        ++idx[ax];
        b_off += strides_[ax];
        if (idx[ax] < a_[ax]) break;
        b_off -= strides_[ax] * idx[ax];
        idx[ax] = 0;
      }
    }
  }

 private:
  enum class Mode { same, scalar, general };
  Shape a_;
  Mode mode_ = Mode::same;
  std::vector<std::size_t> strides_;
};

}  // namespace dlen::detail
