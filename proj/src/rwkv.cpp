#include "frwkv/rwkv.hpp"

#include <cmath>
#include <memory>

#include "frwkv/errors.hpp"
#include "frwkv/kernels.hpp"

namespace frwkv::rwkv {

void RwkvConfig::validate() const {
  if (channels == 0 || hidden == 0 || heads == 0 || layers == 0 || ffn_dim == 0 || mix_rank == 0) {
    throw ConfigError("rwkv dimensions must all be positive");
  }
  if (hidden % heads != 0) {
    throw ConfigError("head count " + std::to_string(heads) + " does not divide hidden width " + std::to_string(hidden));
  }
}

std::size_t block_param_count(const RwkvConfig& c) {
  const std::size_t h = c.hidden, r = c.mix_rank, f = c.ffn_dim;
  return 6 * h * h + 6 * h * r + 2 * h * f + 18 * h;
}

std::size_t branch_param_count(const RwkvConfig& c) {
  return c.layers * block_param_count(c) + (c.channels * c.hidden + c.hidden) + (c.hidden * c.channels + c.channels);
}

RwkvState::RwkvState(std::size_t heads_, std::size_t head_dim_)
    : heads(heads_), head_dim(head_dim_), s({heads_, head_dim_, head_dim_}) {}

std::vector<double> rwkv_step(RwkvState& state, const StepStreams& in, std::size_t step) {
  const std::size_t n = state.head_dim;
  std::vector<double> y(state.heads * n, 0.0);
  for (std::size_t h = 0; h < state.heads; ++h) {
    const std::size_t o = h * n;
    double* s = state.s.vec().data() + h * n * n;
    // A = diag(d) - k̂ (k̂ ⊙ η)^T acts on the key axis: S <- S A + v k_rep^T.
    std::vector<double> next(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
          const double a = (p == j ? in.decay[o + j] : 0.0) - in.k_hat[o + p] * (in.k_hat[o + j] * in.eta[o + j]);
          acc += s[i * n + p] * a;
        }
        next[i * n + j] = acc + in.v[o + i] * in.k_rep[o + j];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      double out = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (!std::isfinite(next[i * n + j])) {
          throw NumericError("rwkv state diverged at step " + std::to_string(step));
        }
        s[i * n + j] = next[i * n + j];
        out += next[i * n + j] * in.r[o + j];
      }
      y[o + i] = out;
    }
  }
  return y;
}

Var wkv(const Var& r, const Var& k_hat, const Var& k_rep, const Var& v, const Var& decay, const Var& eta,
        std::size_t heads) {
  const Shape& s = r.shape();
  if (s.size() != 3) throw DimensionError("wkv expects [S, L, C] streams, got " + to_string(s));
  for (const Var* x : {&k_hat, &k_rep, &v, &decay, &eta}) {
    if (x->shape() != s) throw DimensionError("wkv stream shapes " + to_string(s) + " and " + to_string(x->shape()));
  }
  if (heads == 0 || s[2] % heads != 0) throw DimensionError("wkv head count does not divide channels");
  const kernels::WkvShape ws{s[0], s[1], heads, s[2] / heads};
  const kernels::WkvInputs in{r.value().vec().data(),     k_hat.value().vec().data(), k_rep.value().vec().data(),
                              v.value().vec().data(),     decay.value().vec().data(), eta.value().vec().data()};
  Tensor y(s);
  auto states = std::make_shared<Tensor>(Shape{ws.batch * ws.heads, ws.seq + 1, ws.head_dim, ws.head_dim});
  kernels::parallel::wkv_forward(ws, in, y.vec().data(), states->vec().data());

  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) {
      throw NumericError("rwkv state diverged at step " + std::to_string((i / s[2]) % s[1]));
    }
  }
  return make_op(std::move(y), {r, k_hat, k_rep, v, decay, eta}, "wkv", [ws, states](Node& self) {
    auto val = [&](int i) { return self.parents[static_cast<std::size_t>(i)]->value.vec().data(); };
    const kernels::WkvInputs in{val(0), val(1), val(2), val(3), val(4), val(5)};
    const Shape& sh = self.value.shape();
    Tensor gr(sh), gk(sh), gkr(sh), gv(sh), gd(sh), ge(sh);
    const kernels::WkvGrads g{gr.vec().data(), gk.vec().data(), gkr.vec().data(),
                              gv.vec().data(), gd.vec().data(), ge.vec().data()};
    kernels::parallel::wkv_backward(ws, in, states->vec().data(), self.grad.vec().data(), g);
    self.parents[0]->accumulate(gr);
    self.parents[1]->accumulate(gk);
    self.parents[2]->accumulate(gkr);
    self.parents[3]->accumulate(gv);
    self.parents[4]->accumulate(gd);
    self.parents[5]->accumulate(ge);
  });
}

Var token_shift(const Var& x) {
  const Shape& s = x.shape();
  if (s.size() != 3) throw DimensionError("token_shift expects [S, L, C], got " + to_string(s));
  Var pad = constant(Tensor({s[0], 1, s[2]}));
  if (s[1] == 1) return pad;
  return concat({pad, slice(x, 1, 0, s[1] - 1)}, 1);
}

Var head_normalize(const Var& x, std::size_t heads, double eps) {
  const Shape s = x.shape();
  const std::size_t c = s.back();
  Shape hs(s.begin(), s.end() - 1);
  hs.push_back(heads);
  hs.push_back(c / heads);
  Var xh = reshape(x, hs);
  Var norm = sqrt(sum(square(xh), -1, true) + eps);
  return reshape(xh / norm, s);
}

namespace {

Tensor ramp(std::size_t n, double lo, double hi) {
  Tensor t({n});
  for (std::size_t i = 0; i < n; ++i) t[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return t;
}

}  // namespace

RwkvBlock::RwkvBlock(ParamStore& store, const std::string& name, const RwkvConfig& cfg, std::uint64_t seed)
    : cfg_(cfg) {
  const std::size_t c = cfg.hidden, rk = cfg.mix_rank;
  auto vec = [&](const std::string& n, double fill) { return store.add(name + "." + n, Tensor({c}, fill), false); };
  ln1_g_ = vec("ln1.weight", 1.0);
  ln1_b_ = vec("ln1.bias", 0.0);
  mix_r_ = vec("mix_r", 0.0);
  mix_krem_ = vec("mix_krem", 0.0);
  mix_krep_ = vec("mix_krep", 0.0);
  mix_v_ = vec("mix_v", 0.0);
  mix_w_ = vec("mix_w", 0.0);
  mix_eta_ = vec("mix_eta", 0.0);
  mix_g_ = vec("mix_g", 0.0);
  w_r_ = Linear(store, name + ".receptance", c, c, seed, false);
  w_krem_ = Linear(store, name + ".key_remove", c, c, seed, false);
  w_krep_ = Linear(store, name + ".key_replace", c, c, seed, false);
  w_v_ = Linear(store, name + ".value", c, c, seed, false);
  decay_a_ = Linear(store, name + ".decay.0", c, rk, seed, false);
  decay_b_ = Linear(store, name + ".decay.1", rk, c, seed, true, Linear::Init::Zero);
  eta_a_ = Linear(store, name + ".eta.0", c, rk, seed, false);
  eta_b_ = Linear(store, name + ".eta.1", rk, c, seed, true, Linear::Init::Zero);
  gate_a_ = Linear(store, name + ".gate.0", c, rk, seed, false);
  gate_b_ = Linear(store, name + ".gate.1", rk, c, seed, true, Linear::Init::Zero);
  // Decay logits spread so d = sigmoid(logit) spans roughly 0.5 .. 0.95 across channels.
  decay_b_.bias().node()->value = ramp(c, 0.0, 3.0);
  gn_g_ = vec("groupnorm.weight", 1.0);
  gn_b_ = vec("groupnorm.bias", 0.0);
  w_o_ = Linear(store, name + ".output", c, c, seed, false);
  ln2_g_ = vec("ln2.weight", 1.0);
  ln2_b_ = vec("ln2.bias", 0.0);
  mix_fk_ = vec("mix_ffn_k", 0.0);
  mix_fr_ = vec("mix_ffn_r", 0.0);
  ffn_k_ = Linear(store, name + ".ffn.key", c, cfg.ffn_dim, seed, false);
  ffn_v_ = Linear(store, name + ".ffn.value", cfg.ffn_dim, c, seed, false);
  ffn_r_ = Linear(store, name + ".ffn.receptance", c, c, seed, false);
}

Var RwkvBlock::lerp_stream(const Var& x, const Var& dx, const Var& mix_logit) const {
  return x + dx * sigmoid(mix_logit);
}

RwkvBlock::Streams RwkvBlock::streams(const Var& h) const {
  Var x = layer_norm(h, -1) * ln1_g_ + ln1_b_;
  Var dx = token_shift(x) - x;
  Streams s;
  s.r = w_r_(lerp_stream(x, dx, mix_r_));
  s.k_hat = head_normalize(w_krem_(lerp_stream(x, dx, mix_krem_)), cfg_.heads);
  s.k_rep = w_krep_(lerp_stream(x, dx, mix_krep_));
  s.v = w_v_(lerp_stream(x, dx, mix_v_));
  s.decay = sigmoid(decay_b_(tanh(decay_a_(lerp_stream(x, dx, mix_w_)))));
  s.eta = sigmoid(eta_b_(tanh(eta_a_(lerp_stream(x, dx, mix_eta_)))));
  s.gate = sigmoid(gate_b_(tanh(gate_a_(lerp_stream(x, dx, mix_g_)))));
  return s;
}

Var RwkvBlock::operator()(const Var& h) const {
  const Shape& sh = h.shape();
  const Streams s = streams(h);
  Var y = wkv(s.r, s.k_hat, s.k_rep, s.v, s.decay, s.eta, cfg_.heads);
  Var yn = reshape(layer_norm(reshape(y, {sh[0], sh[1], cfg_.heads, cfg_.head_dim()}), -1), sh) * gn_g_ + gn_b_;
  Var h1 = h + w_o_(yn * s.gate);

  Var x2 = layer_norm(h1, -1) * ln2_g_ + ln2_b_;
  Var dx2 = token_shift(x2) - x2;
  Var k = square(relu(ffn_k_(lerp_stream(x2, dx2, mix_fk_))));
  Var rr = sigmoid(ffn_r_(lerp_stream(x2, dx2, mix_fr_)));
  return h1 + rr * ffn_v_(k);
}

BranchEncoder::BranchEncoder(ParamStore& store, const std::string& name, const RwkvConfig& cfg, std::uint64_t seed)
    : cfg_((cfg.validate(), cfg)), lift_(store, name + ".lift", cfg.channels, cfg.hidden, seed) {
  blocks_.reserve(cfg.layers);
  for (std::size_t l = 0; l < cfg.layers; ++l) blocks_.emplace_back(store, name + ".block" + std::to_string(l), cfg, seed);
  out_ = Linear(store, name + ".proj", cfg.hidden, cfg.channels, seed, true, Linear::Init::Zero);
}

Var BranchEncoder::operator()(const Var& z) const {
  const Shape s = z.shape();
  if (s.size() != 4 || s[2] != cfg_.channels) {
    throw DimensionError("branch encoder expects [B,N," + std::to_string(cfg_.channels) + ",F], got " + to_string(s));
  }
  const std::size_t b = s[0], n = s[1], d = s[2], f = s[3];
  Var seq = reshape(permute(z, {0, 1, 3, 2}), {b * n, f, d});
  Var h = lift_(seq);
  for (const auto& block : blocks_) h = block(h);
  Var out = permute(reshape(out_(h), {b, n, f, d}), {0, 1, 3, 2});
  return z + out;
}

}  // namespace frwkv::rwkv
