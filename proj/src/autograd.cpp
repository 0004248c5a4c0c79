#include "frwkv/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "broadcast.hpp"
#include "frwkv/errors.hpp"
#include "frwkv/kernels.hpp"

namespace frwkv {

namespace {

thread_local bool g_grad_enabled = true;

using detail::AxisSplit;
using detail::BroadcastIndex;
using detail::split_at;

template <class F>
Tensor map(const Tensor& x, F f) {
  Tensor out(x.shape());
  const auto& in = x.vec();
  auto& o = out.vec();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
  return out;
}

// Elementwise unary op whose derivative is a function of (input, output).
template <class F, class D>
Var unary(const Var& x, const char* name, F f, D df) {
  Tensor out = map(x.value(), f);
  return make_op(std::move(out), {x}, name, [df](Node& self) {
    const Tensor& in = self.parents[0]->value;
    Tensor g(in.shape());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * df(in[i], self.value[i]);
    self.parents[0]->accumulate(g);
  });
}

template <class F>
Tensor broadcast_binary(const Tensor& a, const Tensor& b, F f) {
  if (a.shape() == b.shape()) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
  }
  const Shape s = broadcast_shapes(a.shape(), b.shape());
  Tensor out(s);
  BroadcastIndex ia(s, a.shape()), ib(s, b.shape());
  for (std::size_t i = 0; i < out.size(); ++i, ia.next(), ib.next()) out[i] = f(a[ia.offset()], b[ib.offset()]);
  return out;
}

// Per-element gradients of a broadcast binary op, reduced back to each operand's shape.
template <class DA, class DB>
void binary_backward(Node& self, DA da, DB db) {
  Node& pa = *self.parents[0];
  Node& pb = *self.parents[1];
  const Tensor& a = pa.value;
  const Tensor& b = pb.value;
  const Shape& s = self.value.shape();
  Tensor ga(s), gb(s);
  BroadcastIndex ia(s, a.shape()), ib(s, b.shape());
  for (std::size_t i = 0; i < self.grad.size(); ++i, ia.next(), ib.next()) {
    const double x = a[ia.offset()], y = b[ib.offset()], g = self.grad[i];
    ga[i] = g * da(x, y);
    gb[i] = g * db(x, y);
  }
  if (pa.requires_grad) pa.accumulate(sum_to(ga, a.shape()));
  if (pb.requires_grad) pb.accumulate(sum_to(gb, b.shape()));
}

Shape reduced_shape(const Shape& s, std::size_t axis, bool keepdim) {
  Shape out = s;
  if (keepdim) {
    out[axis] = 1;
  } else {
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  return out;
}

std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

}  // namespace

void Node::accumulate(const Tensor& g) {
  if (!requires_grad) return;
  if (g.shape() != value.shape()) {
    throw DimensionError(std::string("gradient shape ") + to_string(g.shape()) + " does not match value shape " +
                         to_string(value.shape()) + " at op " + op);
  }
  if (grad.size() == 0) {
    grad = g;
    return;
  }
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

Var make_op(Tensor value, const std::vector<Var>& inputs, const char* op, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  if (g_grad_enabled) {
    const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      for (const auto& v : inputs) node->parents.push_back(v.node());
      node->backward_fn = std::move(fn);
    }
  }
  return Var(std::move(node));
}

std::vector<Node*> topological_order(const Var& root) {
  std::vector<Node*> order;
  if (!root.requires_grad()) return order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

void backward(const Var& loss) {
  if (loss.size() != 1) throw ContractError("backward() needs a scalar loss, got shape " + to_string(loss.shape()));
  if (!loss.requires_grad()) throw ContractError("backward() on a loss that does not depend on any parameter");
  auto order = topological_order(loss);
  loss.node()->accumulate(Tensor(loss.shape(), 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
    if (!n->is_leaf()) n->grad = Tensor();
  }
}

// ---- elementwise ----

Var add(const Var& a, const Var& b) {
  return make_op(broadcast_binary(a.value(), b.value(), std::plus<>()), {a, b}, "add", [](Node& self) {
    self.parents[0]->accumulate(sum_to(self.grad, self.parents[0]->value.shape()));
    self.parents[1]->accumulate(sum_to(self.grad, self.parents[1]->value.shape()));
  });
}

Var sub(const Var& a, const Var& b) {
  return make_op(broadcast_binary(a.value(), b.value(), std::minus<>()), {a, b}, "sub", [](Node& self) {
    self.parents[0]->accumulate(sum_to(self.grad, self.parents[0]->value.shape()));
    if (self.parents[1]->requires_grad) {
      Tensor g = sum_to(self.grad, self.parents[1]->value.shape());
      for (auto& v : g.vec()) v = -v;
      self.parents[1]->accumulate(g);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  return make_op(broadcast_binary(a.value(), b.value(), std::multiplies<>()), {a, b}, "mul", [](Node& self) {
    binary_backward(
        self, [](double, double y) { return y; }, [](double x, double) { return x; });
  });
}

Var div(const Var& a, const Var& b) {
  return make_op(broadcast_binary(a.value(), b.value(), std::divides<>()), {a, b}, "div", [](Node& self) {
    binary_backward(
        self, [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
  });
}

Var neg(const Var& x) { return mul_scalar(x, -1.0); }

Var add_scalar(const Var& x, double c) {
  return make_op(map(x.value(), [c](double v) { return v + c; }), {x}, "add_scalar",
                 [](Node& self) { self.parents[0]->accumulate(self.grad); });
}

Var mul_scalar(const Var& x, double c) {
  return make_op(map(x.value(), [c](double v) { return v * c; }), {x}, "mul_scalar", [c](Node& self) {
    self.parents[0]->accumulate(map(self.grad, [c](double g) { return g * c; }));
  });
}

Var tanh(const Var& x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(const Var& x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(const Var& x) {
  return unary(
      x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var abs(const Var& x) {
  return unary(
      x, "abs", [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Var relu(const Var& x) {
  return unary(
      x, "relu", [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Var square(const Var& x) {
  return unary(
      x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var sqrt(const Var& x) {
  return unary(
      x, "sqrt", [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Var clip(const Var& x, double lo, double hi) {
  return unary(
      x, "clip", [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

// ---- reductions ----

Var sum(const Var& x, int axis, bool keepdim) {
  const std::size_t ax = norm_axis(axis, x.value().rank());
  const AxisSplit sp = split_at(x.shape(), ax);
  Tensor out(reduced_shape(x.shape(), ax, keepdim));
  const auto& in = x.value().vec();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t l = 0; l < sp.len; ++l)
      for (std::size_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] += in[(o * sp.len + l) * sp.inner + i];
  return make_op(std::move(out), {x}, "sum", [sp](Node& self) {
    Tensor g(self.parents[0]->value.shape());
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t l = 0; l < sp.len; ++l)
        for (std::size_t i = 0; i < sp.inner; ++i) g[(o * sp.len + l) * sp.inner + i] = self.grad[o * sp.inner + i];
    self.parents[0]->accumulate(g);
  });
}

Var mean(const Var& x, int axis, bool keepdim) {
  const std::size_t ax = norm_axis(axis, x.value().rank());
  return mul_scalar(sum(x, axis, keepdim), 1.0 / static_cast<double>(x.shape()[ax]));
}

Var sum_all(const Var& x) {
  const auto& v = x.value().vec();
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  return make_op(Tensor::scalar(s), {x}, "sum_all", [](Node& self) {
    self.parents[0]->accumulate(Tensor(self.parents[0]->value.shape(), self.grad[0]));
  });
}

Var mean_all(const Var& x) { return mul_scalar(sum_all(x), 1.0 / static_cast<double>(x.size())); }

// ---- layout ----

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_op(std::move(out), {x}, "reshape", [](Node& self) {
    self.parents[0]->accumulate(self.grad.reshaped(self.parents[0]->value.shape()));
  });
}

Tensor permuted(const Tensor& t, const std::vector<std::size_t>& perm) {
  const Shape& s = t.shape();
  if (perm.size() != s.size()) throw ContractError("permutation rank mismatch for shape " + to_string(s));
  Shape os(s.size());
  for (std::size_t i = 0; i < perm.size(); ++i) os[i] = s[perm[i]];
  const auto in_strides = strides_of(s);
  // Stride in the input for each output axis.
  std::vector<std::size_t> st(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) st[i] = in_strides[perm[i]];
  Tensor out(os);
  std::vector<std::size_t> idx(os.size(), 0);
  std::size_t off = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = t[off];
    for (std::size_t a = os.size(); a-- > 0;) {
      ++idx[a];
      off += st[a];
      if (idx[a] < os[a]) break;
      off -= st[a] * idx[a];
      idx[a] = 0;
    }
  }
  return out;
}

Var permute(const Var& x, const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] >= perm.size()) throw ContractError("invalid permutation");
    inv[perm[i]] = i;
  }
  return make_op(permuted(x.value(), perm), {x}, "permute",
                 [inv](Node& self) { self.parents[0]->accumulate(permuted(self.grad, inv)); });
}

Var transpose(const Var& x, int a, int b) {
  const std::size_t r = x.value().rank();
  std::vector<std::size_t> perm(r);
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[norm_axis(a, r)], perm[norm_axis(b, r)]);
  return permute(x, perm);
}

Var broadcast_to(const Var& x, const Shape& shape) {
  if (broadcast_shapes(x.shape(), shape) != shape) {
    throw DimensionError("cannot broadcast " + to_string(x.shape()) + " to " + to_string(shape));
  }
  Tensor out(shape);
  BroadcastIndex it(shape, x.shape());
  for (std::size_t i = 0; i < out.size(); ++i, it.next()) out[i] = x.value()[it.offset()];
  return make_op(std::move(out), {x}, "broadcast_to", [](Node& self) {
    self.parents[0]->accumulate(sum_to(self.grad, self.parents[0]->value.shape()));
  });
}

Var concat(const std::vector<Var>& xs, int axis) {
  if (xs.empty()) throw ContractError("concat of zero tensors");
  const std::size_t r = xs[0].value().rank();
  const std::size_t ax = norm_axis(axis, r);
  Shape os = xs[0].shape();
  os[ax] = 0;
  std::vector<std::size_t> lens;
  for (const auto& x : xs) {
    Shape s = x.shape();
    if (s.size() != r) throw DimensionError("concat rank mismatch");
    for (std::size_t i = 0; i < r; ++i) {
      if (i != ax && s[i] != xs[0].shape()[i]) {
        throw DimensionError("concat shapes " + to_string(xs[0].shape()) + " and " + to_string(s) + " differ off-axis");
      }
    }
    lens.push_back(s[ax]);
    os[ax] += s[ax];
  }
  const AxisSplit sp = split_at(os, ax);
  Tensor out(os);
  std::size_t start = 0;
  for (std::size_t n = 0; n < xs.size(); ++n) {
    const auto& in = xs[n].value();
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::copy_n(in.vec().begin() + static_cast<std::ptrdiff_t>(o * lens[n] * sp.inner), lens[n] * sp.inner,
                  out.vec().begin() + static_cast<std::ptrdiff_t>((o * sp.len + start) * sp.inner));
    start += lens[n];
  }
  return make_op(std::move(out), xs, "concat", [sp, lens](Node& self) {
    std::size_t st = 0;
    for (std::size_t n = 0; n < lens.size(); ++n) {
      Node& p = *self.parents[n];
      if (p.requires_grad) {
        Tensor g(p.value.shape());
        for (std::size_t o = 0; o < sp.outer; ++o)
          std::copy_n(self.grad.vec().begin() + static_cast<std::ptrdiff_t>((o * sp.len + st) * sp.inner),
                      lens[n] * sp.inner, g.vec().begin() + static_cast<std::ptrdiff_t>(o * lens[n] * sp.inner));
        p.accumulate(g);
      }
      st += lens[n];
    }
  });
}

Var gather(const Var& x, int axis, const std::vector<std::size_t>& indices) {
  const std::size_t ax = norm_axis(axis, x.value().rank());
  const AxisSplit sp = split_at(x.shape(), ax);
  for (std::size_t i : indices)
    if (i >= sp.len) throw ContractError("gather index out of range on axis of length " + std::to_string(sp.len));
  Shape os = x.shape();
  os[ax] = indices.size();
  Tensor out(os);
  const auto& in = x.value();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t n = 0; n < indices.size(); ++n)
      for (std::size_t i = 0; i < sp.inner; ++i)
        out[(o * indices.size() + n) * sp.inner + i] = in[(o * sp.len + indices[n]) * sp.inner + i];
  return make_op(std::move(out), {x}, "gather", [sp, indices](Node& self) {
    Tensor g(self.parents[0]->value.shape());
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t n = 0; n < indices.size(); ++n)
        for (std::size_t i = 0; i < sp.inner; ++i)
          g[(o * sp.len + indices[n]) * sp.inner + i] += self.grad[(o * indices.size() + n) * sp.inner + i];
    self.parents[0]->accumulate(g);
  });
}

Var slice(const Var& x, int axis, std::size_t start, std::size_t len) {
  const std::size_t ax = norm_axis(axis, x.value().rank());
  if (start + len > x.shape()[ax]) {
    throw ContractError("slice [" + std::to_string(start) + ", " + std::to_string(start + len) +
                        ") exceeds axis of length " + std::to_string(x.shape()[ax]));
  }
  std::vector<std::size_t> idx(len);
  std::iota(idx.begin(), idx.end(), start);
  return gather(x, static_cast<int>(ax), idx);
}

Var outer(const Var& a, const Var& b) {
  if (a.value().rank() != 1 || b.value().rank() != 1) throw DimensionError("outer() takes two vectors");
  return mul(reshape(a, {a.size(), 1}), reshape(b, {1, b.size()}));
}

// ---- contractions ----

Var matmul(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2 || sa.back() != sb[sb.size() - 2]) {
    throw DimensionError("matmul shapes " + to_string(sa) + " and " + to_string(sb) + " are incompatible");
  }
  const std::size_t m = sa[sa.size() - 2], k = sa.back(), n = sb.back();
  const Shape lead_a(sa.begin(), sa.end() - 2), lead_b(sb.begin(), sb.end() - 2);

  if (lead_b.empty()) {
    // Common linear-layer case: fold every leading axis of `a` into rows.
    const std::size_t rows = numel(lead_a) * m;
    Shape os = sa;
    os.back() = n;
    Tensor out(os);
    kernels::parallel::gemm({rows, n, k}, a.value().vec().data(), b.value().vec().data(), out.vec().data(), false);
    return make_op(std::move(out), {a, b}, "matmul", [rows, n, k](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        Tensor ga(pa.value.shape());
        kernels::parallel::gemm({rows, k, n, false, true}, self.grad.vec().data(), pb.value.vec().data(),
                                ga.vec().data(), false);
        pa.accumulate(ga);
      }
      if (pb.requires_grad) {
        Tensor gb(pb.value.shape());
        kernels::parallel::gemm({k, n, rows, true, false}, pa.value.vec().data(), self.grad.vec().data(),
                                gb.vec().data(), false);
        pb.accumulate(gb);
      }
    });
  }

  Shape lead = broadcast_shapes(lead_a, lead_b);
  const std::size_t batches = numel(lead);
  std::vector<std::size_t> off_a(batches), off_b(batches);
  {
    BroadcastIndex ia(lead, lead_a), ib(lead, lead_b);
    for (std::size_t i = 0; i < batches; ++i, ia.next(), ib.next()) {
      off_a[i] = ia.offset() * m * k;
      off_b[i] = ib.offset() * k * n;
    }
  }
  Shape os = lead;
  os.push_back(m);
  os.push_back(n);
  Tensor out(os);
  for (std::size_t i = 0; i < batches; ++i) {
    kernels::parallel::gemm({m, n, k}, a.value().vec().data() + off_a[i], b.value().vec().data() + off_b[i],
                            out.vec().data() + i * m * n, false);
  }
  return make_op(std::move(out), {a, b}, "matmul", [m, n, k, off_a, off_b](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const double* g = self.grad.vec().data();
    if (pa.requires_grad) {
      Tensor ga(pa.value.shape());
      for (std::size_t i = 0; i < off_a.size(); ++i)
        kernels::parallel::gemm({m, k, n, false, true}, g + i * m * n, pb.value.vec().data() + off_b[i],
                                ga.vec().data() + off_a[i], true);
      pa.accumulate(ga);
    }
    if (pb.requires_grad) {
      Tensor gb(pb.value.shape());
      for (std::size_t i = 0; i < off_b.size(); ++i)
        kernels::parallel::gemm({k, n, m, true, false}, pa.value.vec().data() + off_a[i], g + i * m * n,
                                gb.vec().data() + off_b[i], true);
      pb.accumulate(gb);
    }
  });
}

Var softmax(const Var& x, int axis) {
  const std::size_t ax = norm_axis(axis, x.value().rank());
  const AxisSplit sp = split_at(x.shape(), ax);
  Tensor out(x.shape());
  const auto& in = x.value();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.len * sp.inner + i;
      double mx = in[base];
      for (std::size_t l = 1; l < sp.len; ++l) mx = std::max(mx, in[base + l * sp.inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l) {
        const double e = std::exp(in[base + l * sp.inner] - mx);
        out[base + l * sp.inner] = e;
        z += e;
      }
      for (std::size_t l = 0; l < sp.len; ++l) out[base + l * sp.inner] /= z;
    }
  }
  return make_op(std::move(out), {x}, "softmax", [sp](Node& self) {
    Tensor g(self.value.shape());
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t base = o * sp.len * sp.inner + i;
        double dot = 0.0;
        for (std::size_t l = 0; l < sp.len; ++l) dot += self.grad[base + l * sp.inner] * self.value[base + l * sp.inner];
        for (std::size_t l = 0; l < sp.len; ++l) {
          const std::size_t j = base + l * sp.inner;
          g[j] = self.value[j] * (self.grad[j] - dot);
        }
      }
    }
    self.parents[0]->accumulate(g);
  });
}

Var layer_norm(const Var& x, int axis, double eps) {
  const std::size_t ax = norm_axis(axis, x.value().rank());
  const AxisSplit sp = split_at(x.shape(), ax);
  if (sp.len == 0) throw ContractError("layer_norm over an empty axis");
  Tensor out(x.shape());
  std::vector<double> inv_std(sp.outer * sp.inner);
  const auto& in = x.value();
  const double n = static_cast<double>(sp.len);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.len * sp.inner + i;
      double mu = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l) mu += in[base + l * sp.inner];
      mu /= n;
      double var = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l) {
        const double d = in[base + l * sp.inner] - mu;
        var += d * d;
      }
      var /= n;
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std[o * sp.inner + i] = is;
      for (std::size_t l = 0; l < sp.len; ++l) out[base + l * sp.inner] = (in[base + l * sp.inner] - mu) * is;
    }
  }
  return make_op(std::move(out), {x}, "layer_norm", [sp, inv_std, n](Node& self) {
    Tensor g(self.value.shape());
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t base = o * sp.len * sp.inner + i;
        double mg = 0.0, mgy = 0.0;
        for (std::size_t l = 0; l < sp.len; ++l) {
          const std::size_t j = base + l * sp.inner;
          mg += self.grad[j];
          mgy += self.grad[j] * self.value[j];
        }
        mg /= n;
        mgy /= n;
        const double is = inv_std[o * sp.inner + i];
        for (std::size_t l = 0; l < sp.len; ++l) {
          const std::size_t j = base + l * sp.inner;
          g[j] = is * (self.grad[j] - mg - self.value[j] * mgy);
        }
      }
    }
    self.parents[0]->accumulate(g);
  });
}

}  // namespace frwkv
