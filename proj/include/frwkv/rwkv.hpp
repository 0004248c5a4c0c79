#pragma once

// RWKV frequency-branch encoder.
//
// Each branch treats the frequency bins of one complex stream as a sequence:
// [B,N,D,F] is viewed as B·N sequences of F steps with D channels, lifted to
// the hidden width, passed through stacked blocks, projected back to D and
// added to the input (residual). A block is
//
//   time mix:    token-shifted streams -> r, k_rem, k_rep, v, gate, η, decay
//                S_l = S_{l-1}(diag(d_l) - k̂_l (k̂_l ⊙ η_l)^T) + v_l k_rep_l^T
//                out = W_o (groupnorm(S_l r_l) ⊙ gate)
//   channel mix: sigmoid(W_r x) ⊙ W_v relu(W_k x)^2
//
// with pre-norm residual connections around both halves. S is kept per head
// in [value, key] layout so the transition acts on the key axis.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "frwkv/autograd.hpp"
#include "frwkv/module.hpp"

namespace frwkv::rwkv {

struct RwkvConfig {
  std::size_t channels = 4;  // D, the frequency embedding width
  std::size_t hidden = 8;
  std::size_t heads = 1;
  std::size_t layers = 1;
  std::size_t ffn_dim = 8;
  std::size_t mix_rank = 8;  // inner width of the decay / interpolation / gate maps

  void validate() const;
  std::size_t head_dim() const { return hidden / heads; }
};

// Scalar count of one block's learnables as a closed form of the config.
std::size_t block_param_count(const RwkvConfig& c);
// One branch: lift + blocks + output projection.
std::size_t branch_param_count(const RwkvConfig& c);

// ---- single-sequence stepping ----

struct RwkvState {
  std::size_t heads = 0, head_dim = 0;
  Tensor s;  // [heads, head_dim(value), head_dim(key)]

  RwkvState(std::size_t heads, std::size_t head_dim);
};

// Per-step streams for all heads, each of length heads*head_dim.
struct StepStreams {
  std::span<const double> r, k_hat, k_rep, v, decay, eta;
};

// Advances the state by one step and returns the readout S_l r_l (length heads*head_dim).
// Throws NumericError naming `step` if the state stops being finite.
std::vector<double> rwkv_step(RwkvState& state, const StepStreams& in, std::size_t step);

// ---- differentiable sequence ops ----

// Full-sequence recurrence over inputs [S, L, C]; returns readouts [S, L, C].
Var wkv(const Var& r, const Var& k_hat, const Var& k_rep, const Var& v, const Var& decay, const Var& eta,
        std::size_t heads);

// x_{l-1} along axis 1 of [S, L, C], zero at l = 0.
Var token_shift(const Var& x);

// L2-normalizes each head slice of the trailing axis.
Var head_normalize(const Var& x, std::size_t heads, double eps = 1e-12);

class RwkvBlock {
 public:
  RwkvBlock(ParamStore& store, const std::string& name, const RwkvConfig& cfg, std::uint64_t seed);

  // h: [S, L, hidden]
  Var operator()(const Var& h) const;

  // The recurrence inputs this block would feed to wkv() for `h` (exposed for tests).
  struct Streams {
    Var r, k_hat, k_rep, v, decay, eta, gate;
  };
  Streams streams(const Var& h) const;

 private:
  Var lerp_stream(const Var& x, const Var& dx, const Var& mix_logit) const;

  RwkvConfig cfg_;
  Var ln1_g_, ln1_b_, ln2_g_, ln2_b_;
  Var mix_r_, mix_krem_, mix_krep_, mix_v_, mix_w_, mix_eta_, mix_g_, mix_fk_, mix_fr_;
  Linear w_r_, w_krem_, w_krep_, w_v_;
  Linear decay_a_, decay_b_, eta_a_, eta_b_, gate_a_, gate_b_;
  Var gn_g_, gn_b_;
  Linear w_o_;
  Linear ffn_k_, ffn_v_, ffn_r_;
};

class BranchEncoder {
 public:
  BranchEncoder(ParamStore& store, const std::string& name, const RwkvConfig& cfg, std::uint64_t seed);

  // z: [B,N,D,F] -> z + encode(z), same shape.
  Var operator()(const Var& z) const;
  const RwkvConfig& config() const { return cfg_; }

 private:
  RwkvConfig cfg_;
  Linear lift_;
  std::vector<RwkvBlock> blocks_;
  Linear out_;
};

}  // namespace frwkv::rwkv
