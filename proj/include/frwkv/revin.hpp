#pragma once

#include <string>
#include <utility>

#include "frwkv/autograd.hpp"
#include "frwkv/module.hpp"

namespace frwkv::revin {

inline constexpr double kRevinEps = 1e-5;

// Per-window statistics kept for exact inversion. Treated as constants by autodiff.
struct RevinState {
  Tensor mu;     // [B,1,N]
  Tensor sigma;  // [B,1,N], population std clamped below at eps
  double eps = kRevinEps;
};

class RevIN {
 public:
  RevIN() = default;
  // affine=false keeps γ=1, β=0 as constants instead of learnables.
  RevIN(ParamStore& store, const std::string& name, std::size_t n_vars, bool affine);

  // x [B,T,N] -> γ (x - μ)/σ + β with statistics over T.
  std::pair<Var, RevinState> normalize(const Var& x) const;
  // y [B,H,N] -> ((y - β)/γ) σ + μ
  Var denormalize(const Var& y, const RevinState& state) const;

  Var gamma() const { return gamma_; }
  Var beta() const { return beta_; }

 private:
  Var gamma_, beta_;
};

// X_emb[b,n,t,d] = x[b,t,n] · e_d  ->  [B,N,T,D]
Var token_embed(const Var& x, const Var& e);

enum class HeadKind { MeanLinear, Flatten };

std::string to_string(HeadKind kind);
HeadKind parse_head(const std::string& text);

// [B,N,T,D] -> [B,H,N]. MeanLinear collapses D by mean and applies a shared T→H
// map; Flatten applies a shared (T·D)→H map.
class HorizonHead {
 public:
  HorizonHead() = default;
  HorizonHead(ParamStore& store, const std::string& name, HeadKind kind, std::size_t input_len, std::size_t channels,
              std::size_t horizon, std::uint64_t seed);

  Var operator()(const Var& x) const;
  const Linear& linear() const { return proj_; }
  HeadKind kind() const { return kind_; }

 private:
  HeadKind kind_ = HeadKind::MeanLinear;
  Linear proj_;
};

std::size_t head_param_count(HeadKind kind, std::size_t input_len, std::size_t channels, std::size_t horizon);

}  // namespace frwkv::revin
