#include <cmath>
#include <numbers>
#include <vector>

#include "frwkv/kernels.hpp"
#include "wkv_scan.hpp"

namespace frwkv::kernels::serial {

namespace {

double a_at(const GemmShape& s, const double* a, std::size_t i, std::size_t p) {
  return s.trans_a ? a[p * s.m + i] : a[i * s.k + p];
}

double b_at(const GemmShape& s, const double* b, std::size_t p, std::size_t j) {
  return s.trans_b ? b[j * s.k + p] : b[p * s.n + j];
}

}  // namespace

void gemm(const GemmShape& s, const double* a, const double* b, double* c, bool accumulate) {
  for (std::size_t i = 0; i < s.m; ++i) {
    for (std::size_t j = 0; j < s.n; ++j) {
      double acc = accumulate ? c[i * s.n + j] : 0.0;
      for (std::size_t p = 0; p < s.k; ++p) acc += a_at(s, a, i, p) * b_at(s, b, p, j);
      c[i * s.n + j] = acc;
    }
  }
}

void rfft(const double* x, std::size_t rows, std::size_t t, double* re, double* im) {
  const std::size_t f = t / 2 + 1;
  for (std::size_t row = 0; row < rows; ++row) {
    const double* xs = x + row * t;
    for (std::size_t k = 0; k < f; ++k) {
      double sr = 0.0, si = 0.0;
      for (std::size_t n = 0; n < t; ++n) {
        const double th = 2.0 * std::numbers::pi * static_cast<double>((k * n) % t) / static_cast<double>(t);
        sr += xs[n] * std::cos(th);
        si -= xs[n] * std::sin(th);
      }
      re[row * f + k] = sr;
      im[row * f + k] = si;
    }
    im[row * f] = 0.0;
    if (t % 2 == 0) im[row * f + f - 1] = 0.0;
  }
}

void irfft(const double* re, const double* im, std::size_t rows, std::size_t t, double* x) {
  const std::size_t f = t / 2 + 1;
  for (std::size_t row = 0; row < rows; ++row) {
    const double* zr = re + row * f;
    const double* zi = im + row * f;
    for (std::size_t n = 0; n < t; ++n) {
      double acc = zr[0];
      for (std::size_t k = 1; k < f; ++k) {
        const bool nyquist = t % 2 == 0 && k == f - 1;
        const double th = 2.0 * std::numbers::pi * static_cast<double>((k * n) % t) / static_cast<double>(t);
        if (nyquist) {
          acc += zr[k] * std::cos(th);
        } else {
          acc += 2.0 * (zr[k] * std::cos(th) - zi[k] * std::sin(th));
        }
      }
      x[row * t + n] = acc / static_cast<double>(t);
    }
  }
}

void wkv_forward(const WkvShape& s, const WkvInputs& in, double* y, double* states) {
  for (std::size_t b = 0; b < s.batch; ++b)
    for (std::size_t h = 0; h < s.heads; ++h) detail::scan_forward(s, in, detail::head_view(s, b, h), y, states);
}

void wkv_backward(const WkvShape& s, const WkvInputs& in, const double* states, const double* dy, const WkvGrads& g) {
  for (std::size_t b = 0; b < s.batch; ++b)
    for (std::size_t h = 0; h < s.heads; ++h)
      detail::scan_backward(s, in, detail::head_view(s, b, h), states, dy, g);
}

}  // namespace frwkv::kernels::serial
