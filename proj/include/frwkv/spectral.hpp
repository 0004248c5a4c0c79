#pragma once

#include <cstddef>

#include "frwkv/autograd.hpp"

namespace frwkv::spectral {

// Complex rFFT output split into real and imaginary streams, each [B,N,D,F]
// with F = floor(T/2)+1. Imaginary DC (and Nyquist, for even T) are exactly 0.
struct Spectrum {
  Var real;
  Var imag;
  std::size_t time_len = 0;

  std::size_t bins() const { return time_len / 2 + 1; }
};

// x[B,N,T,D] -> spectrum along T, laid out [B,N,D,F]. Unnormalized forward transform.
Spectrum rfft_time(const Var& x);

// Inverse of rfft_time (1/T normalization) -> [B,N,T,D]. The structurally
// imaginary DC/Nyquist bins are ignored rather than rejected.
Var irfft_time(const Spectrum& z);

// Mean over the trailing frequency axis: [B,N,D,F] -> [B,N,D].
Var mean_freq(const Var& y);

}  // namespace frwkv::spectral
