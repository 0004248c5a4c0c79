#include "frwkv/ppce.hpp"

#include <cmath>

#include "frwkv/errors.hpp"

namespace frwkv::ppce {

void PpceConfig::validate() const {
  if (channels == 0) throw ConfigError("ppce channel width must be positive");
  if (period == 0) throw ConfigError("period-position length must be at least 1");
  if (routers == 0) throw ConfigError("router count must be at least 1");
}

std::size_t param_count(const PpceConfig& c) {
  const std::size_t d = c.channels;
  return 4 * d * d + c.routers * d + 2 * d;
}

Tensor fold_matrix(std::size_t time_len, std::size_t period) {
  if (time_len == 0 || period == 0) throw ContractError("period_fold needs T >= 1 and P >= 1");
  const std::size_t reps = (time_len + period - 1) / period;
  Tensor f({period, time_len});
  const double w = 1.0 / static_cast<double>(reps);
  for (std::size_t m = 0; m < reps; ++m)
    for (std::size_t p = 0; p < period; ++p) f[p * time_len + (m * period + p) % time_len] += w;
  return f;
}

Var period_fold(const Var& x_emb, std::size_t period) {
  const Shape& s = x_emb.shape();
  if (s.size() != 4) throw DimensionError("period_fold expects [B,N,T,D], got " + to_string(s));
  return matmul(constant(fold_matrix(s[2], period)), x_emb);
}

PeriodicPositionRouter::PeriodicPositionRouter(ParamStore& store, const std::string& name, const PpceConfig& cfg,
                                               std::uint64_t seed)
    : cfg_(cfg) {
  cfg.validate();
  const std::size_t d = cfg.channels;
  Rng rng(derive_seed(seed, name + ".router_tokens"));
  Tensor tokens({cfg.routers, d});
  for (auto& v : tokens.vec()) v = rng.normal(0.0, 0.02);

  ln_g_ = store.add(name + ".ln.weight", Tensor({d}, 1.0), false);
  ln_b_ = store.add(name + ".ln.bias", Tensor({d}), false);
  router_tokens_ = store.add(name + ".router_tokens", std::move(tokens), false);
  auto square = [&](const std::string& n) {
    Rng r(derive_seed(seed, name + "." + n));
    return store.add(name + "." + n, uniform_fan_in({d, d}, d, r));
  };
  w_q_ = square("w_q");
  w_k_ = square("w_k");
  w_v_ = square("w_v");
  w_o_ = square("w_o");
}

PeriodicPositionRouter::Trace PeriodicPositionRouter::route(const Var& phi) const {
  const Shape& s = phi.shape();
  if (s.size() != 4 || s[3] != cfg_.channels) {
    throw DimensionError("router expects [B,N,P," + std::to_string(cfg_.channels) + "], got " + to_string(s));
  }
  const std::size_t b = s[0], n = s[1], p = s[2], d = s[3];
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  Trace t;
  t.tokens = layer_norm(reshape(phi, {b * n, p, d}), -1) * ln_g_ + ln_b_;
  Var q = matmul(t.tokens, w_q_);
  Var k = matmul(t.tokens, w_k_);
  Var v = matmul(t.tokens, w_v_);
  // Router tokens are shared by every (sample, variable) row through broadcasting.
  t.router_attn = softmax(matmul(router_tokens_, transpose(k, 1, 2)) * inv_sqrt_d, -1);
  t.router_buffer = matmul(t.router_attn, v);
  t.token_attn = softmax(matmul(q, transpose(t.router_buffer, 1, 2)) * inv_sqrt_d, -1);
  t.routed = matmul(t.token_attn, t.router_buffer);
  t.context = reshape(matmul(mean(t.routed, 1), w_o_), {b, n, d});
  return t;
}

}  // namespace frwkv::ppce
