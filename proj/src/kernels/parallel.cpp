#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "frwkv/kernels.hpp"
#include "wkv_scan.hpp"

namespace frwkv::kernels::parallel {

namespace {

using cplx = std::complex<double>;

// Below this many multiply-adds the OpenMP fork costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

struct Twiddles {
  std::vector<double> cos, sin;
  explicit Twiddles(std::size_t t) : cos(t), sin(t) {
    for (std::size_t j = 0; j < t; ++j) {
      const double th = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(t);
      cos[j] = std::cos(th);
      sin[j] = std::sin(th);
    }
  }
};

// In-place iterative radix-2 FFT; `inverse` uses conjugate twiddles without scaling.
void fft_radix2(std::vector<cplx>& a, const Twiddles& tw, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < len / 2; ++j) {
        const double s = inverse ? tw.sin[j * step] : -tw.sin[j * step];
        const cplx w(tw.cos[j * step], s);
        const cplx u = a[i + j];
        const cplx v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }
}

void rfft_row_naive(const double* xs, std::size_t t, const Twiddles& tw, double* re, double* im) {
  const std::size_t f = t / 2 + 1;
  for (std::size_t k = 0; k < f; ++k) {
    double sr = 0.0, si = 0.0;
    for (std::size_t n = 0; n < t; ++n) {
      const std::size_t j = (k * n) % t;
      sr += xs[n] * tw.cos[j];
      si -= xs[n] * tw.sin[j];
    }
    re[k] = sr;
    im[k] = si;
  }
}

void irfft_row_naive(const double* zr, const double* zi, std::size_t t, const Twiddles& tw, double* x) {
  const std::size_t f = t / 2 + 1;
  for (std::size_t n = 0; n < t; ++n) {
    double acc = zr[0];
    for (std::size_t k = 1; k < f; ++k) {
      const std::size_t j = (k * n) % t;
      if (t % 2 == 0 && k == f - 1) {
        acc += zr[k] * tw.cos[j];
      } else {
        acc += 2.0 * (zr[k] * tw.cos[j] - zi[k] * tw.sin[j]);
      }
    }
    x[n] = acc / static_cast<double>(t);
  }
}

}  // namespace

void gemm(const GemmShape& s, const double* a, const double* b, double* c, bool accumulate) {
  const auto m = static_cast<std::ptrdiff_t>(s.m);
  const std::size_t n = s.n, k = s.k;
#pragma omp parallel for schedule(static) if (s.m * s.n * s.k > kParallelWork)
  for (std::ptrdiff_t ii = 0; ii < m; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* crow = c + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    if (!s.trans_b) {
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = s.trans_a ? a[p * s.m + i] : a[i * k + p];
        const double* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    } else {
      for (std::size_t j = 0; j < n; ++j) {
        const double* bcol = b + j * k;
        double acc = crow[j];
        if (s.trans_a) {
          for (std::size_t p = 0; p < k; ++p) acc += a[p * s.m + i] * bcol[p];
        } else {
          const double* arow = a + i * k;
          for (std::size_t p = 0; p < k; ++p) acc += arow[p] * bcol[p];
        }
        crow[j] = acc;
      }
    }
  }
}

void rfft(const double* x, std::size_t rows, std::size_t t, double* re, double* im) {
  const std::size_t f = t / 2 + 1;
  const Twiddles tw(t);
  const bool radix2 = is_power_of_two(t) && t > 1;
#pragma omp parallel for schedule(static) if (rows * t * f > kParallelWork)
  for (std::ptrdiff_t rr = 0; rr < static_cast<std::ptrdiff_t>(rows); ++rr) {
    const auto row = static_cast<std::size_t>(rr);
    double* zr = re + row * f;
    double* zi = im + row * f;
    if (radix2) {
      std::vector<cplx> buf(t);
      for (std::size_t n = 0; n < t; ++n) buf[n] = cplx(x[row * t + n], 0.0);
      fft_radix2(buf, tw, false);
      for (std::size_t k = 0; k < f; ++k) {
        zr[k] = buf[k].real();
        zi[k] = buf[k].imag();
      }
    } else {
      rfft_row_naive(x + row * t, t, tw, zr, zi);
    }
    zi[0] = 0.0;
    if (t % 2 == 0) zi[f - 1] = 0.0;
  }
}

void irfft(const double* re, const double* im, std::size_t rows, std::size_t t, double* x) {
  const std::size_t f = t / 2 + 1;
  const Twiddles tw(t);
  const bool radix2 = is_power_of_two(t) && t > 1;
#pragma omp parallel for schedule(static) if (rows * t * f > kParallelWork)
  for (std::ptrdiff_t rr = 0; rr < static_cast<std::ptrdiff_t>(rows); ++rr) {
    const auto row = static_cast<std::size_t>(rr);
    const double* zr = re + row * f;
    const double* zi = im + row * f;
    if (radix2) {
      std::vector<cplx> buf(t);
      buf[0] = cplx(zr[0], 0.0);
      for (std::size_t k = 1; k < f; ++k) {
        const bool nyquist = k == f - 1;
        buf[k] = cplx(zr[k], nyquist ? 0.0 : zi[k]);
        if (!nyquist) buf[t - k] = std::conj(buf[k]);
      }
      fft_radix2(buf, tw, true);
      for (std::size_t n = 0; n < t; ++n) x[row * t + n] = buf[n].real() / static_cast<double>(t);
    } else {
      irfft_row_naive(zr, zi, t, tw, x + row * t);
    }
  }
}

void wkv_forward(const WkvShape& s, const WkvInputs& in, double* y, double* states) {
  const auto pairs = static_cast<std::ptrdiff_t>(s.batch * s.heads);
#pragma omp parallel for schedule(static) if (s.batch * s.seq * s.state_size() > kParallelWork)
  for (std::ptrdiff_t p = 0; p < pairs; ++p) {
    const auto b = static_cast<std::size_t>(p) / s.heads;
    const auto h = static_cast<std::size_t>(p) % s.heads;
    detail::scan_forward(s, in, detail::head_view(s, b, h), y, states);
  }
}

void wkv_backward(const WkvShape& s, const WkvInputs& in, const double* states, const double* dy, const WkvGrads& g) {
  const auto pairs = static_cast<std::ptrdiff_t>(s.batch * s.heads);
#pragma omp parallel for schedule(static) if (s.batch * s.seq * s.state_size() > kParallelWork)
  for (std::ptrdiff_t p = 0; p < pairs; ++p) {
    const auto b = static_cast<std::size_t>(p) / s.heads;
    const auto h = static_cast<std::size_t>(p) % s.heads;
    detail::scan_backward(s, in, detail::head_view(s, b, h), states, dy, g);
  }
}

}  // namespace frwkv::kernels::parallel
