#pragma once

// Single (sequence, head) scan of the decay-and-removal recurrence
//   S_l = S_{l-1} (diag(d_l) - k̂_l (k̂_l ⊙ η_l)^T) + v_l k_rep_l^T,   y_l = S_l r_l
// with S laid out [value, key]. Shared by the serial and OpenMP drivers,
// which differ only in how (sequence, head) pairs are scheduled.

#include <cstddef>
#include <vector>

#include "frwkv/kernels.hpp"

namespace frwkv::kernels::detail {

struct HeadView {
  std::size_t base;    // offset of (batch, step 0, head, 0) in the [batch, seq, C] inputs
  std::size_t stride;  // distance between consecutive steps (= channels)
  std::size_t state;   // offset of slot 0 in the states buffer
};

inline HeadView head_view(const WkvShape& s, std::size_t b, std::size_t h) {
  const std::size_t c = s.channels();
  const std::size_t hd2 = s.head_dim * s.head_dim;
  return {b * s.seq * c + h * s.head_dim, c, (b * s.heads + h) * (s.seq + 1) * hd2};
}

inline void scan_forward(const WkvShape& s, const WkvInputs& in, const HeadView& hv, double* y, double* states) {
  const std::size_t n = s.head_dim;
  const std::size_t n2 = n * n;
  std::vector<double> sa(n);
  double* prev = states + hv.state;
  for (std::size_t i = 0; i < n2; ++i) prev[i] = 0.0;

  for (std::size_t l = 0; l < s.seq; ++l) {
    const std::size_t o = hv.base + l * hv.stride;
    const double* a = in.k_hat + o;
    const double* eta = in.eta + o;
    const double* d = in.decay + o;
    const double* v = in.v + o;
    const double* kr = in.k_rep + o;
    const double* r = in.r + o;
    double* cur = prev + n2;

    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += prev[i * n + j] * a[j];
      sa[i] = acc;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double out = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double val = prev[i * n + j] * d[j] - sa[i] * (a[j] * eta[j]) + v[i] * kr[j];
        cur[i * n + j] = val;
        out += val * r[j];
      }
      y[o + i] = out;
    }
    prev = cur;
  }
}

inline void scan_backward(const WkvShape& s, const WkvInputs& in, const HeadView& hv, const double* states,
                          const double* dy, const WkvGrads& g) {
  const std::size_t n = s.head_dim;
  const std::size_t n2 = n * n;
  std::vector<double> ds(n2, 0.0), u(n), w(n);

  for (std::size_t l = s.seq; l-- > 0;) {
    const std::size_t o = hv.base + l * hv.stride;
    const double* cur = states + hv.state + (l + 1) * n2;
    const double* prev = cur - n2;
    const double* a = in.k_hat + o;
    const double* eta = in.eta + o;
    const double* d = in.decay + o;
    const double* v = in.v + o;
    const double* kr = in.k_rep + o;
    const double* r = in.r + o;
    const double* gy = dy + o;

    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) ds[i * n + j] += gy[i] * r[j];

    for (std::size_t j = 0; j < n; ++j) {
      double dr = 0.0, dkr = 0.0, dd = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        dr += cur[i * n + j] * gy[i];
        dkr += ds[i * n + j] * v[i];
        dd += prev[i * n + j] * ds[i * n + j];
      }
      g.r[o + j] = dr;
      g.k_rep[o + j] = dkr;
      g.decay[o + j] = dd;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double dv = 0.0, ui = 0.0, wi = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        dv += ds[i * n + j] * kr[j];
        ui += ds[i * n + j] * (a[j] * eta[j]);
        wi += prev[i * n + j] * a[j];
      }
      g.v[o + i] = dv;
      u[i] = ui;
      w[i] = wi;
    }
    for (std::size_t j = 0; j < n; ++j) {
      double da = 0.0, dbj = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        da -= prev[i * n + j] * u[i];
        dbj -= w[i] * ds[i * n + j];
      }
      g.k_hat[o + j] = da + eta[j] * dbj;
      g.eta[o + j] = a[j] * dbj;
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) ds[i * n + j] = ds[i * n + j] * d[j] - u[i] * a[j];
  }
}

}  // namespace frwkv::kernels::detail
