#pragma once

// Cross-branch gating between the real and imaginary frequency streams, and
// the trust-controlled periodic-position correction applied on top of it.
//
//   G⁰_{i→r} = σ(MLP⁰_{i→r}(C_i))                 base gate (source context -> other branch)
//   Δ_{i→r}  = tanh(MLP^Δ_{i→r}([C_i, C_pos]))     signed correction
//   T_r      = σ(MLP_trust^r([C_r, C_i, C_pos]))   trust
//   G_r      = 1 + G⁰_{i→r} + clip(α, 0, 0.2) · T_r ⊙ Δ_{i→r}
//
// and symmetrically for the imaginary branch. The variant decides which terms exist.

#include <optional>
#include <string>
#include <string_view>

#include "frwkv/autograd.hpp"
#include "frwkv/module.hpp"

namespace frwkv::interaction {

enum class VariantKind { FRWKV, CrossBranchGate, CrossBranchPhaseGate, FullContextDelta, FRWKVPlus };

struct Variant {
  VariantKind kind = VariantKind::FRWKVPlus;
  // Component switches, valid only with FRWKVPlus.
  bool no_ppce = false;        // C_pos replaced by zeros
  bool positive_only = false;  // Δ = |tanh(·)|
  bool fixed_trust = false;    // T = 1

  void validate() const;
  std::string name() const;
  static Variant parse(std::string_view name);

  bool has_base_gates() const { return kind != VariantKind::FRWKV; }
  bool has_correction() const { return has_base_gates() && kind != VariantKind::CrossBranchGate; }
  bool has_ppce() const { return has_correction() && !no_ppce; }
  bool has_adaptive_trust() const { return has_correction() && kind != VariantKind::CrossBranchPhaseGate && !fixed_trust; }
  bool full_context_delta() const { return kind == VariantKind::FullContextDelta; }

  friend bool operator==(const Variant&, const Variant&) = default;
};

inline constexpr double kAlphaMax = 0.20;

struct GateConfig {
  std::size_t channels = 4;  // D
  std::size_t hidden = 4;    // D_h of every gate/delta/trust MLP
  double alpha_init = 0.05;
  double trust_bias_init = -4.0;
};

std::size_t param_count(const GateConfig& cfg, const Variant& variant);

struct BaseGates {
  Var i2r, r2i;
};
struct Deltas {
  Var i2r, r2i;
};
struct Trust {
  Var r, i;
};
struct FinalGates {
  Var r, i;
};

// Everything the interaction computed for one batch; the contexts are inputs.
struct BranchContexts {
  Var c_r, c_i, c_pos;
  std::optional<BaseGates> base;
  std::optional<Deltas> deltas;
  std::optional<Trust> trust;
  Var alpha;  // clipped, scalar
  FinalGates gates;
};

class BranchInteraction {
 public:
  BranchInteraction() = default;
  BranchInteraction(ParamStore& store, const std::string& name, const GateConfig& cfg, const Variant& variant,
                    std::uint64_t seed);

  BaseGates base_gates(const Var& c_r, const Var& c_i) const;
  Deltas deltas(const Var& c_r, const Var& c_i, const Var& c_pos) const;
  Trust trust(const Var& c_r, const Var& c_i, const Var& c_pos) const;
  Var clipped_alpha() const;

  // Contexts [B,N,D] -> gates [B,N,D]; c_pos is ignored unless the variant corrects.
  BranchContexts compute(const Var& c_r, const Var& c_i, const Var& c_pos) const;

  const Variant& variant() const { return variant_; }
  const GateConfig& config() const { return cfg_; }
  Var alpha_raw() const { return alpha_; }

 private:
  GateConfig cfg_;
  Variant variant_;
  Mlp2 base_i2r_, base_r2i_;
  Mlp2 delta_i2r_, delta_r2i_;
  Mlp2 trust_r_, trust_i_;
  Var alpha_;
};

// G_r = 1 + G⁰ + α T ⊙ Δ with whichever terms are present.
FinalGates final_gates(const std::optional<BaseGates>& base, const std::optional<Deltas>& deltas,
                       const std::optional<Trust>& trust, const Var& alpha, const Shape& context_shape);

// y [B,N,D,F] ⊙ G [B,N,D] broadcast over frequency bins.
std::pair<Var, Var> apply_gates(const Var& y_r, const Var& y_i, const Var& g_r, const Var& g_i);

}  // namespace frwkv::interaction
