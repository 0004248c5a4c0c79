#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "frwkv/autograd.hpp"
#include "frwkv/module.hpp"

namespace frwkv::testkit {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.vec()) v = u(rng);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

struct GradReport {
  double worst = 0.0;
  std::size_t worst_leaf = 0;
};

// Compares reverse-mode gradients with five-point central differences, leaf by leaf:
// ||g_ad - g_fd|| / max(||g_ad||, ||g_fd||, floor). The floor keeps leaves
// whose gradient is numerically zero from dividing noise by noise.
inline GradReport grad_check(const std::function<Var()>& loss_fn, const std::vector<Var>& leaves, double h = 1e-5,
                             double floor = 1e-6) {
  for (auto v : leaves) v.zero_grad();
  backward(loss_fn());
  GradReport report;
  NoGradGuard guard;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Var leaf = leaves[li];
    const Tensor analytic = leaf.has_grad() ? leaf.grad() : Tensor(leaf.shape());
    auto& x = leaf.mutable_value().vec();
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double keep = x[i];
      auto at = [&](double offset) {
        x[i] = keep + offset;
        return loss_fn().item();
      };
      const double numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
      x[i] = keep;
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
    const double rel = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), floor});
    if (rel > report.worst) {
      report.worst = rel;
      report.worst_leaf = li;
    }
  }
  for (auto v : leaves) v.zero_grad();
  return report;
}

// Fills every parameter with fresh values so gradient checks see generic
// weights instead of the structured initialization.
inline void randomize(ParamStore& store, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& p : store.items())
    for (auto& v : p.var.mutable_value().vec()) v = u(rng);
}

}  // namespace frwkv::testkit
