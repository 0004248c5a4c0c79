#include "frwkv/spectral.hpp"

#include "frwkv/errors.hpp"
#include "frwkv/kernels.hpp"

namespace frwkv::spectral {

namespace {

// Weight of bin k in the one-sided inverse sum: 1 for DC and Nyquist, 2 otherwise.
double bin_weight(std::size_t k, std::size_t t) {
  const std::size_t f = t / 2 + 1;
  if (k == 0) return 1.0;
  if (t % 2 == 0 && k == f - 1) return 1.0;
  return 2.0;
}

}  // namespace

Spectrum rfft_time(const Var& x) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw DimensionError("rfft_time expects [B,N,T,D], got " + to_string(s));
  const std::size_t b = s[0], n = s[1], t = s[2], d = s[3];
  if (t == 0) throw ContractError("rfft_time needs at least one time sample");
  const std::size_t f = t / 2 + 1;
  const std::size_t rows = b * n * d;

  const Tensor rows_major = permuted(x.value(), {0, 1, 3, 2});  // [B,N,D,T]
  Tensor both({2, b, n, d, f});
  kernels::parallel::rfft(rows_major.vec().data(), rows, t, both.vec().data(), both.vec().data() + rows * f);

  Var joint = make_op(std::move(both), {x}, "rfft_time", [b, n, t, d, f, rows](Node& self) {
    // Adjoint of the forward DFT, expressed through the inverse kernel.
    Tensor re({rows * f}), im({rows * f});
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < f; ++k) {
        const double scale = static_cast<double>(t) / bin_weight(k, t);
        re[r * f + k] = self.grad[r * f + k] * scale;
        im[r * f + k] = self.grad[rows * f + r * f + k] * scale;
      }
    }
    Tensor gx({b, n, d, t});
    kernels::parallel::irfft(re.vec().data(), im.vec().data(), rows, t, gx.vec().data());
    self.parents[0]->accumulate(permuted(gx, {0, 1, 3, 2}));
  });
  Spectrum z;
  z.real = reshape(slice(joint, 0, 0, 1), {b, n, d, f});
  z.imag = reshape(slice(joint, 0, 1, 1), {b, n, d, f});
  z.time_len = t;
  return z;
}

Var irfft_time(const Spectrum& z) {
  const Shape& s = z.real.shape();
  if (s.size() != 4 || z.imag.shape() != s) {
    throw DimensionError("irfft_time expects matching [B,N,D,F] streams, got " + to_string(s) + " and " +
                         to_string(z.imag.shape()));
  }
  const std::size_t b = s[0], n = s[1], d = s[2], f = s[3], t = z.time_len;
  if (t == 0 || f != t / 2 + 1) {
    throw DimensionError("spectrum has " + std::to_string(f) + " bins, inconsistent with length " + std::to_string(t));
  }
  const std::size_t rows = b * n * d;
  Tensor x({b, n, d, t});
  kernels::parallel::irfft(z.real.value().vec().data(), z.imag.value().vec().data(), rows, t, x.vec().data());

  Var series = make_op(std::move(x), {z.real, z.imag}, "irfft_time", [rows, t, f](Node& self) {
    Tensor re(self.parents[0]->value.shape()), im(self.parents[1]->value.shape());
    kernels::parallel::rfft(self.grad.vec().data(), rows, t, re.vec().data(), im.vec().data());
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < f; ++k) {
        const double scale = bin_weight(k, t) / static_cast<double>(t);
        re[r * f + k] *= scale;
        im[r * f + k] *= scale;
      }
    }
    self.parents[0]->accumulate(re);
    self.parents[1]->accumulate(im);
  });
  return permute(series, {0, 1, 3, 2});
}

Var mean_freq(const Var& y) {
  if (y.value().rank() == 0 || y.shape().back() == 0) throw ContractError("mean_freq needs at least one bin");
  return mean(y, -1);
}

}  // namespace frwkv::spectral
