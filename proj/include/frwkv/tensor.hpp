#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace frwkv {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Dense row-major array of doubles. Plain value type; autograd lives in Var.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({}, std::vector<double>{v}); }
  static Tensor from(std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(int axis) const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::initializer_list<std::size_t> idx);
  double at(std::initializer_list<std::size_t> idx) const;

  double item() const;
  bool all_finite() const;

  // Same data, new shape; product must match.
  Tensor reshaped(Shape shape) const;

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const;

  Shape shape_;
  std::vector<double> data_;
};

// Normalizes a possibly negative axis against rank; throws ContractError.
std::size_t norm_axis(int axis, std::size_t rank);

// Trailing-axis aligned broadcast of two shapes; throws DimensionError.
Shape broadcast_shapes(const Shape& a, const Shape& b);

// Sums `t` down to `target` (inverse of broadcasting).
Tensor sum_to(const Tensor& t, const Shape& target);

}  // namespace frwkv
