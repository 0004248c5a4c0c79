#pragma once

// Periodic positional context encoder: folds the embedded window into one
// token per position inside a period, then compresses those tokens through a
// small set of learnable router tokens into one context vector per
// (sample, variable).

#include <cstddef>
#include <string>

#include "frwkv/autograd.hpp"
#include "frwkv/module.hpp"

namespace frwkv::ppce {

struct PpceConfig {
  std::size_t channels = 4;  // D
  std::size_t period = 4;    // P, positions per period
  std::size_t routers = 1;   // R

  void validate() const;
};

std::size_t param_count(const PpceConfig& c);

// [P, T] averaging operator: row p averages x[(m·P + p) mod T] over the M = ceil(T/P)
// repetitions of the circularly padded window.
Tensor fold_matrix(std::size_t time_len, std::size_t period);

// x_emb [B,N,T,D] -> Φ [B,N,P,D].
Var period_fold(const Var& x_emb, std::size_t period);

class PeriodicPositionRouter {
 public:
  PeriodicPositionRouter() = default;
  PeriodicPositionRouter(ParamStore& store, const std::string& name, const PpceConfig& cfg, std::uint64_t seed);

  struct Trace {
    Var tokens;         // LN(Φ) as [(B·N), P, D]
    Var router_attn;    // A_R [(B·N), R, P]
    Var router_buffer;  // B_R [(B·N), R, D]
    Var token_attn;     // A_T [(B·N), P, R]
    Var routed;         // U   [(B·N), P, D]
    Var context;        // C_pos [B, N, D]
  };

  // Φ [B,N,P,D] -> C_pos [B,N,D]
  Trace route(const Var& phi) const;
  Var router_context(const Var& phi) const { return route(phi).context; }

  // x_emb [B,N,T,D] -> C_pos [B,N,D]
  Var operator()(const Var& x_emb) const { return router_context(period_fold(x_emb, cfg_.period)); }

  const PpceConfig& config() const { return cfg_; }
  Var router_tokens() const { return router_tokens_; }
  Var w_q() const { return w_q_; }
  Var w_k() const { return w_k_; }
  Var w_v() const { return w_v_; }
  Var w_o() const { return w_o_; }
  Var ln_weight() const { return ln_g_; }
  Var ln_bias() const { return ln_b_; }

 private:
  PpceConfig cfg_;
  Var ln_g_, ln_b_, router_tokens_, w_q_, w_k_, w_v_, w_o_;
};

}  // namespace frwkv::ppce
