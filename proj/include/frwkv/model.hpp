#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"

#include "frwkv/autograd.hpp"
#include "frwkv/interaction.hpp"
#include "frwkv/module.hpp"
#include "frwkv/ppce.hpp"
#include "frwkv/revin.hpp"
#include "frwkv/rwkv.hpp"
#include "frwkv/spectral.hpp"

namespace frwkv::model {

using interaction::Variant;
using revin::HeadKind;

struct ModelConfig {
  Variant variant;
  std::size_t input_len = 96;  // T
  std::size_t horizon = 96;    // H
  std::size_t n_vars = 7;      // N
  std::size_t embed = 16;      // D
  std::size_t hidden = 512;
  std::size_t heads = 8;
  std::size_t layers = 2;
  std::size_t ffn_dim = 512;
  std::size_t mix_rank = 512;
  std::size_t gate_hidden = 0;  // 0: same as embed
  std::size_t period = 24;  // P
  std::size_t routers = 4;  // R
  double alpha_init = 0.05;
  double trust_bias_init = -4.0;
  HeadKind head = HeadKind::MeanLinear;
  bool revin_affine = true;
  // Carried for recipe bookkeeping only; no mechanism consumes them.
  std::size_t patch_len = 16;
  std::size_t patch_stride = 8;
  std::uint64_t seed = 2024;

  void validate() const;
  rwkv::RwkvConfig branch() const;
  interaction::GateConfig gates() const;
  ppce::PpceConfig ppce() const;
  std::size_t gate_width() const { return gate_hidden ? gate_hidden : embed; }

  // B=2-scale configuration used by the gradient and equivalence checks.
  static ModelConfig toy();
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& j);
std::string config_hash(const ModelConfig& c);

std::size_t expected_param_count(const ModelConfig& c);

class Forecaster {
 public:
  explicit Forecaster(const ModelConfig& cfg);
  Forecaster(const Forecaster&) = delete;
  Forecaster& operator=(const Forecaster&) = delete;

  struct Trace {
    revin::RevinState stats;
    Var normalized;  // [B,T,N]
    Var emb;         // [B,N,T,D]
    spectral::Spectrum spectrum;
    Var y_r, y_i;  // encoded branches [B,N,D,F]
    interaction::BranchContexts contexts;
    Var freq_out;  // [B,N,T,D]
    Var head_out;  // [B,H,N], normalized scale
    Var output;    // [B,H,N]
  };

  // x [B,T,N] -> forecast [B,H,N]
  Var forward(const Var& x) const { return trace(x).output; }
  Trace trace(const Var& x) const;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  std::size_t param_count() const { return store_.count(); }

  const interaction::BranchInteraction& interaction() const { return gates_; }
  const revin::RevIN& revin() const { return revin_; }
  const revin::HorizonHead& head() const { return head_; }
  Var embedding() const { return e_; }

 private:
  ModelConfig cfg_;
  ParamStore store_;
  revin::RevIN revin_;
  Var e_;
  rwkv::BranchEncoder branch_r_, branch_i_;
  std::optional<ppce::PeriodicPositionRouter> ppce_;
  interaction::BranchInteraction gates_;
  revin::HorizonHead head_;
};

// Self-describing binary checkpoint: magic, version, JSON header, raw doubles.
void save_checkpoint(const std::string& path, const Forecaster& model);
std::unique_ptr<Forecaster> load_checkpoint(const std::string& path);

// Copies parameter values by name; shapes must match.
void copy_parameters(const Forecaster& from, Forecaster& to);

}  // namespace frwkv::model
