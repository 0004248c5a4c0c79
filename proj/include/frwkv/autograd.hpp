#pragma once

// Dynamic reverse-mode autodiff over Tensor.
//
// A Var is a shared handle to a graph node. Ops record their inputs and a
// backward closure when grad mode is on and any input requires a gradient;
// backward() replays the closures in reverse topological order.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "frwkv/tensor.hpp"

namespace frwkv {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something is accumulated
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return parents.empty(); }
  void accumulate(const Tensor& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  // Leaves only; mutating an interior node invalidates its recorded backward.
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad = Tensor(); }

  bool requires_grad() const { return node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(int axis) const { return node_->value.dim(axis); }
  std::size_t size() const { return node_->value.size(); }
  double item() const { return node_->value.item(); }

  const std::shared_ptr<Node>& node() const { return node_; }
  bool defined() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

inline Var constant(Tensor t) { return Var(std::move(t), false); }
inline Var parameter(Tensor t) { return Var(std::move(t), true); }

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

// Nodes reachable from `root` that take part in differentiation, inputs first.
std::vector<Node*> topological_order(const Var& root);

// Accumulates d(loss)/d(leaf) into every requires_grad leaf. Loss must be scalar.
void backward(const Var& loss);

// ---- elementwise ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& x);
Var add_scalar(const Var& x, double c);
Var mul_scalar(const Var& x, double c);

Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var abs(const Var& x);
Var relu(const Var& x);
Var square(const Var& x);
Var sqrt(const Var& x);
// Gradient passes where lo <= x <= hi.
Var clip(const Var& x, double lo, double hi);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& x) { return neg(x); }
inline Var operator+(const Var& x, double c) { return add_scalar(x, c); }
inline Var operator+(double c, const Var& x) { return add_scalar(x, c); }
inline Var operator-(const Var& x, double c) { return add_scalar(x, -c); }
inline Var operator*(const Var& x, double c) { return mul_scalar(x, c); }
inline Var operator*(double c, const Var& x) { return mul_scalar(x, c); }

// ---- reductions ----
Var sum(const Var& x, int axis, bool keepdim = false);
Var mean(const Var& x, int axis, bool keepdim = false);
Var sum_all(const Var& x);
Var mean_all(const Var& x);

// ---- layout ----
Var reshape(const Var& x, Shape shape);
Var permute(const Var& x, const std::vector<std::size_t>& perm);
Var transpose(const Var& x, int a, int b);
Var broadcast_to(const Var& x, const Shape& shape);
Var concat(const std::vector<Var>& xs, int axis);
Var slice(const Var& x, int axis, std::size_t start, std::size_t len);
Var gather(const Var& x, int axis, const std::vector<std::size_t>& indices);
// a[m] ⊗ b[n] -> [m,n]
Var outer(const Var& a, const Var& b);

// ---- contractions & normalization ----
// a[..., m, k] @ b[..., k, n] with broadcast leading axes.
Var matmul(const Var& a, const Var& b);
// Max-subtracted softmax.
Var softmax(const Var& x, int axis);
// (x - mean) / sqrt(var + eps) per slice along `axis`; affine terms are applied by callers.
Var layer_norm(const Var& x, int axis, double eps = 1e-5);

// Plain-tensor permutation shared with the spectral ops.
Tensor permuted(const Tensor& t, const std::vector<std::size_t>& perm);

// Helper for fused ops defined outside this file: builds a node from `value`
// that depends on `inputs` and propagates via `fn` (which reads self.grad).
Var make_op(Tensor value, const std::vector<Var>& inputs, const char* op, std::function<void(Node&)> fn);

}  // namespace frwkv
