// Serial reference vs OpenMP kernels on model-sized problems.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "frwkv/kernels.hpp"

namespace k = frwkv::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const k::GemmShape s{n, n, n, false, false};
  auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::gemm(s, a.data(), b.data(), c.data(), false);
    } else {
      k::serial::gemm(s, a.data(), b.data(), c.data(), false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n * n * n));
}

template <bool Parallel>
void BM_Rfft(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  const std::size_t rows = 7 * 16 * 32;  // N·D·B of one ETT batch
  const std::size_t f = t / 2 + 1;
  auto x = random_vec(rows * t, 3);
  std::vector<double> re(rows * f), im(rows * f);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::rfft(x.data(), rows, t, re.data(), im.data());
    } else {
      k::serial::rfft(x.data(), rows, t, re.data(), im.data());
    }
    benchmark::DoNotOptimize(re.data());
  }
}

template <bool Parallel>
void BM_Wkv(benchmark::State& state) {
  const k::WkvShape s{static_cast<std::size_t>(state.range(0)), 49, 8, 64};
  const std::size_t n = s.batch * s.seq * s.channels();
  auto r = random_vec(n, 4), kh = random_vec(n, 5), kr = random_vec(n, 6), v = random_vec(n, 7);
  auto d = random_vec(n, 8, 0.5, 0.99), eta = random_vec(n, 9, 0.0, 1.0);
  const k::WkvInputs in{r.data(), kh.data(), kr.data(), v.data(), d.data(), eta.data()};
  std::vector<double> y(n), states(s.batch * s.heads * (s.seq + 1) * s.head_dim * s.head_dim);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::wkv_forward(s, in, y.data(), states.data());
    } else {
      k::serial::wkv_forward(s, in, y.data(), states.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_Rfft<false>)->Arg(96)->Arg(128);
BENCHMARK(BM_Rfft<true>)->Arg(96)->Arg(128);
BENCHMARK(BM_Wkv<false>)->Arg(4)->Arg(16);
BENCHMARK(BM_Wkv<true>)->Arg(4)->Arg(16);

BENCHMARK_MAIN();
