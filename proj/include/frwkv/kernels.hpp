#pragma once

// Raw numeric kernels behind the autograd ops.
//
// Every kernel has a plain serial reference in `kernels::serial` and an
// OpenMP version in `kernels::parallel`. The parallel versions only split
// independent output rows across threads (no cross-thread reductions), so
// both produce bitwise-identical results for a given input. The library
// always dispatches to `parallel`; `serial` is kept for tests and benchmarks.

#include <cstddef>

namespace frwkv::kernels {

struct GemmShape {
  std::size_t m = 0, n = 0, k = 0;
  bool trans_a = false;  // A stored k×m instead of m×k
  bool trans_b = false;  // B stored n×k instead of k×n
};

struct WkvShape {
  std::size_t batch = 0, seq = 0, heads = 0, head_dim = 0;
  std::size_t channels() const { return heads * head_dim; }
  std::size_t state_size() const { return heads * head_dim * head_dim; }
};

// Per-step inputs of the decay-and-removal recurrence, each [batch, seq, heads*head_dim].
struct WkvInputs {
  const double* r;       // receptance (read key)
  const double* k_hat;   // unit removal key
  const double* k_rep;   // replacement key
  const double* v;       // value
  const double* decay;   // d in (0,1)
  const double* eta;     // removal interpolation in (0,1)
};

struct WkvGrads {
  double* r;
  double* k_hat;
  double* k_rep;
  double* v;
  double* decay;
  double* eta;
};

namespace serial {

// C = op(A)·op(B) (+ C when accumulate). Row-major, dense.
void gemm(const GemmShape& s, const double* a, const double* b, double* c, bool accumulate);

// Real DFT of `rows` contiguous series of length t into re/im [rows, t/2+1].
// Naive O(t^2) evaluation; imaginary DC and Nyquist bins are exactly 0.
void rfft(const double* x, std::size_t rows, std::size_t t, double* re, double* im);

// Inverse of rfft: x_t = (1/t) Σ_k c_k (re_k cos − im_k sin); imaginary DC/Nyquist ignored.
void irfft(const double* re, const double* im, std::size_t rows, std::size_t t, double* x);

// States buffer holds [batch, heads, seq+1, head_dim, head_dim]; slot 0 is the zero initial state.
void wkv_forward(const WkvShape& s, const WkvInputs& in, double* y, double* states);
void wkv_backward(const WkvShape& s, const WkvInputs& in, const double* states, const double* dy, const WkvGrads& g);

}  // namespace serial

namespace parallel {

void gemm(const GemmShape& s, const double* a, const double* b, double* c, bool accumulate);

// Uses an iterative radix-2 FFT when t is a power of two, naive DFT otherwise.
void rfft(const double* x, std::size_t rows, std::size_t t, double* re, double* im);
void irfft(const double* re, const double* im, std::size_t rows, std::size_t t, double* x);

void wkv_forward(const WkvShape& s, const WkvInputs& in, double* y, double* states);
void wkv_backward(const WkvShape& s, const WkvInputs& in, const double* states, const double* dy, const WkvGrads& g);

}  // namespace parallel

inline bool is_power_of_two(std::size_t n) { return n && !(n & (n - 1)); }

}  // namespace frwkv::kernels
