#include "frwkv/interaction.hpp"

#include <sstream>
#include <vector>

#include "frwkv/errors.hpp"

namespace frwkv::interaction {

namespace {

constexpr std::pair<VariantKind, std::string_view> kKindNames[] = {
    {VariantKind::FRWKV, "FRWKV"},
    {VariantKind::CrossBranchGate, "CrossBranchGate"},
    {VariantKind::CrossBranchPhaseGate, "CrossBranchPhaseGate"},
    {VariantKind::FullContextDelta, "FullContextDelta"},
    {VariantKind::FRWKVPlus, "FRWKVPlus"},
};

std::size_t mlp_count(std::size_t in, std::size_t hidden, std::size_t out) {
  return in * hidden + hidden + hidden * out + out;
}

}  // namespace

void Variant::validate() const {
  if ((no_ppce || positive_only || fixed_trust) && kind != VariantKind::FRWKVPlus) {
    throw ConfigError("component switches are only valid with FRWKVPlus");
  }
}

std::string Variant::name() const {
  std::string out;
  for (const auto& [k, n] : kKindNames)
    if (k == kind) out = n;
  if (no_ppce) out += "+no_ppce";
  if (positive_only) out += "+positive_only";
  if (fixed_trust) out += "+fixed_trust";
  return out;
}

Variant Variant::parse(std::string_view text) {
  if (text == "FRWKV+") return Variant{};
  std::vector<std::string> parts;
  std::stringstream ss{std::string(text)};
  for (std::string part; std::getline(ss, part, '+');) parts.push_back(part);
  if (parts.empty()) throw ConfigError("empty variant name");
  Variant v;
  bool found = false;
  for (const auto& [k, n] : kKindNames) {
    if (parts[0] == n) {
      v.kind = k;
      found = true;
    }
  }
  if (!found) throw ConfigError("unknown variant '" + parts[0] + "'");
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (parts[i] == "no_ppce") {
      v.no_ppce = true;
    } else if (parts[i] == "positive_only") {
      v.positive_only = true;
    } else if (parts[i] == "fixed_trust") {
      v.fixed_trust = true;
    } else {
      throw ConfigError("unknown variant switch '" + parts[i] + "'");
    }
  }
  v.validate();
  return v;
}

std::size_t param_count(const GateConfig& cfg, const Variant& variant) {
  const std::size_t d = cfg.channels, h = cfg.hidden;
  std::size_t n = 0;
  if (variant.has_base_gates()) n += 2 * mlp_count(d, h, d);
  if (variant.has_correction()) {
    n += 2 * mlp_count((variant.full_context_delta() ? 3 : 2) * d, h, d) + 1;
    if (variant.has_adaptive_trust()) n += 2 * mlp_count(3 * d, h, d);
  }
  return n;
}

BranchInteraction::BranchInteraction(ParamStore& store, const std::string& name, const GateConfig& cfg,
                                     const Variant& variant, std::uint64_t seed)
    : cfg_(cfg), variant_(variant) {
  variant.validate();
  const std::size_t d = cfg.channels, h = cfg.hidden;
  if (d == 0 || h == 0) throw ConfigError("gate widths must be positive");
  if (variant.has_base_gates()) {
    base_i2r_ = Mlp2(store, name + ".base_i2r", d, h, d, seed);
    base_r2i_ = Mlp2(store, name + ".base_r2i", d, h, d, seed);
  }
  if (variant.has_correction()) {
    const std::size_t in = (variant.full_context_delta() ? 3 : 2) * d;
    delta_i2r_ = Mlp2(store, name + ".delta_i2r", in, h, d, seed, Linear::Init::Zero);
    delta_r2i_ = Mlp2(store, name + ".delta_r2i", in, h, d, seed, Linear::Init::Zero);
    if (variant.has_adaptive_trust()) {
      trust_r_ = Mlp2(store, name + ".trust_r", 3 * d, h, d, seed);
      trust_i_ = Mlp2(store, name + ".trust_i", 3 * d, h, d, seed);
      for (const Mlp2* m : {&trust_r_, &trust_i_}) {
        for (auto& b : m->second().bias().node()->value.vec()) b = cfg.trust_bias_init;
      }
    }
    alpha_ = store.add(name + ".alpha", Tensor({1}, cfg.alpha_init), false);
  }
}

BaseGates BranchInteraction::base_gates(const Var& c_r, const Var& c_i) const {
  if (!variant_.has_base_gates()) throw ContractError("variant " + variant_.name() + " has no base gates");
  return {sigmoid(base_i2r_(c_i)), sigmoid(base_r2i_(c_r))};
}

Deltas BranchInteraction::deltas(const Var& c_r, const Var& c_i, const Var& c_pos) const {
  if (!variant_.has_correction()) throw ContractError("variant " + variant_.name() + " has no correction");
  Var pos = variant_.no_ppce ? constant(Tensor(c_pos.shape())) : c_pos;
  Var in_i2r, in_r2i;
  if (variant_.full_context_delta()) {
    in_i2r = in_r2i = concat({c_r, c_i, pos}, -1);
  } else {
    in_i2r = concat({c_i, pos}, -1);
    in_r2i = concat({c_r, pos}, -1);
  }
  Var d_i2r = tanh(delta_i2r_(in_i2r));
  Var d_r2i = tanh(delta_r2i_(in_r2i));
  if (variant_.positive_only) {
    d_i2r = abs(d_i2r);
    d_r2i = abs(d_r2i);
  }
  return {d_i2r, d_r2i};
}

Trust BranchInteraction::trust(const Var& c_r, const Var& c_i, const Var& c_pos) const {
  if (!variant_.has_adaptive_trust()) {
    Var ones = constant(Tensor(c_r.shape(), 1.0));
    return {ones, ones};
  }
  Var pos = variant_.no_ppce ? constant(Tensor(c_pos.shape())) : c_pos;
  Var in = concat({c_r, c_i, pos}, -1);
  return {sigmoid(trust_r_(in)), sigmoid(trust_i_(in))};
}

Var BranchInteraction::clipped_alpha() const {
  if (!alpha_.defined()) return constant(Tensor({1}));
  return clip(alpha_, 0.0, kAlphaMax);
}

BranchContexts BranchInteraction::compute(const Var& c_r, const Var& c_i, const Var& c_pos) const {
  BranchContexts out;
  out.c_r = c_r;
  out.c_i = c_i;
  out.c_pos = c_pos;
  out.alpha = clipped_alpha();
  if (variant_.has_base_gates()) out.base = base_gates(c_r, c_i);
  if (variant_.has_correction()) {
    out.deltas = deltas(c_r, c_i, c_pos);
    if (variant_.has_adaptive_trust()) out.trust = trust(c_r, c_i, c_pos);
  }
  out.gates = final_gates(out.base, out.deltas, out.trust, out.alpha, c_r.shape());
  return out;
}

FinalGates final_gates(const std::optional<BaseGates>& base, const std::optional<Deltas>& deltas,
                       const std::optional<Trust>& trust, const Var& alpha, const Shape& context_shape) {
  if (!base) {
    Var ones = constant(Tensor(context_shape, 1.0));
    return {ones, ones};
  }
  Var g_r = base->i2r + 1.0;
  Var g_i = base->r2i + 1.0;
  if (deltas) {
    Var corr_r = trust ? trust->r * deltas->i2r : deltas->i2r;
    Var corr_i = trust ? trust->i * deltas->r2i : deltas->r2i;
    g_r = g_r + alpha * corr_r;
    g_i = g_i + alpha * corr_i;
  }
  return {g_r, g_i};
}

std::pair<Var, Var> apply_gates(const Var& y_r, const Var& y_i, const Var& g_r, const Var& g_i) {
  const Shape& s = y_r.shape();
  if (s.size() != 4 || y_i.shape() != s || g_r.shape() != Shape{s[0], s[1], s[2]} || g_i.shape() != g_r.shape()) {
    throw DimensionError("apply_gates shapes " + to_string(s) + " / " + to_string(g_r.shape()) + " are inconsistent");
  }
  const Shape gs{s[0], s[1], s[2], 1};
  return {y_r * reshape(g_r, gs), y_i * reshape(g_i, gs)};
}

}  // namespace frwkv::interaction
