#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "frwkv/autograd.hpp"

namespace frwkv {

// Stable per-name seed derivation so each sub-module's initialization depends
// only on (run seed, parameter name), never on construction order or variant.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  double normal(double mean, double stddev) { return std::normal_distribution<double>(mean, stddev)(gen_); }
  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

struct NamedParam {
  std::string name;
  Var var;
  bool decay = true;  // false for norms, biases, router tokens, correction strength
};

// Ordered registry of learnable tensors owned by one model instance.
class ParamStore {
 public:
  Var add(std::string name, Tensor init, bool decay = true);

  const std::vector<NamedParam>& items() const { return params_; }
  std::vector<NamedParam>& items() { return params_; }
  const NamedParam* find(std::string_view name) const;
  Var get(std::string_view name) const;
  std::size_t count() const;  // total scalar count
  void zero_grad();

 private:
  std::vector<NamedParam> params_;
};

// Fan-in uniform U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor uniform_fan_in(Shape shape, std::size_t fan_in, Rng& rng);

// x[..., in] @ W[in, out] (+ b[out]).
class Linear {
 public:
  Linear() = default;
  enum class Init { FanIn, Zero };
  Linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, std::uint64_t seed,
         bool bias = true, Init init = Init::FanIn);

  Var operator()(const Var& x) const;
  const Var& weight() const { return w_; }
  const Var& bias() const { return b_; }
  std::size_t in() const { return in_; }
  std::size_t out() const { return out_; }

 private:
  Var w_, b_;
  std::size_t in_ = 0, out_ = 0;
};

// in -> hidden (tanh) -> out; the project-wide two-layer map for gates, deltas and trust.
class Mlp2 {
 public:
  Mlp2() = default;
  Mlp2(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
       std::uint64_t seed, Linear::Init last_init = Linear::Init::FanIn);

  Var operator()(const Var& x) const { return second_(tanh(first_(x))); }
  const Linear& first() const { return first_; }
  const Linear& second() const { return second_; }

 private:
  Linear first_, second_;
};

}  // namespace frwkv
