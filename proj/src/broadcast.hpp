#pragma once

#include <cstddef>
#include <vector>

#include "frwkv/tensor.hpp"

namespace frwkv::detail {

// Walks an output shape in row-major order while tracking the flat offset
// of the corresponding element in an operand broadcast to that shape.
class BroadcastIndex {
 public:
  BroadcastIndex(const Shape& out, const Shape& operand) : dims_(out), idx_(out.size(), 0), strides_(out.size(), 0) {
    const std::size_t lead = out.size() - operand.size();
    std::size_t stride = 1;
    for (std::size_t i = operand.size(); i-- > 0;) {
      strides_[lead + i] = operand[i] == 1 ? 0 : stride;
      stride *= operand[i];
    }
  }

  std::size_t offset() const { return off_; }

  void next() {
    for (std::size_t a = dims_.size(); a-- > 0;) {
      ++idx_[a];
      off_ += strides_[a];
      if (idx_[a] < dims_[a]) return;
      off_ -= strides_[a] * idx_[a];
      idx_[a] = 0;
    }
  }

 private:
  Shape dims_;
  std::vector<std::size_t> idx_;
  std::vector<std::size_t> strides_;
  std::size_t off_ = 0;
};

// (outer, axis, inner) factorization of a shape around one axis.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

inline AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace frwkv::detail
