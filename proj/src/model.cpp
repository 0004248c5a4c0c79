#include "frwkv/model.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "frwkv/errors.hpp"

namespace frwkv::model {

namespace {

constexpr char kMagic[8] = {'F', 'R', 'W', 'K', 'V', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

// Rethrows module errors with the pipeline stage prefixed, keeping the error type.
template <class F>
auto stage(const char* name, F&& fn) {
  const auto tag = [name](const std::exception& e) { return std::string(name) + ": " + e.what(); };
  try {
    return fn();
  } catch (const NumericError& e) {
    throw NumericError(tag(e));
  } catch (const DimensionError& e) {
    throw DimensionError(tag(e));
  } catch (const ConfigError& e) {
    throw ConfigError(tag(e));
  } catch (const DataError& e) {
    throw DataError(tag(e));
  } catch (const ContractError& e) {
    throw ContractError(tag(e));
  }
}

Var make_embedding(ParamStore& store, const ModelConfig& c) {
  Rng rng(derive_seed(c.seed, "embed"));
  return store.add("embed", uniform_fan_in({c.embed}, 1, rng));
}

}  // namespace

void ModelConfig::validate() const {
  variant.validate();
  if (input_len < 2) throw ConfigError("input length must be at least 2");
  if (horizon == 0 || n_vars == 0 || embed == 0) throw ConfigError("horizon, variable count and embedding size must be positive");
  branch().validate();
  if (variant.has_ppce()) ppce().validate();
  if (!(alpha_init >= 0.0)) throw ConfigError("alpha_init must be non-negative");
}

rwkv::RwkvConfig ModelConfig::branch() const {
  return rwkv::RwkvConfig{embed, hidden, heads, layers, ffn_dim, mix_rank};
}

interaction::GateConfig ModelConfig::gates() const {
  return interaction::GateConfig{embed, gate_width(), alpha_init, trust_bias_init};
}

ppce::PpceConfig ModelConfig::ppce() const { return ppce::PpceConfig{embed, period, routers}; }

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.input_len = 8;
  c.horizon = 4;
  c.n_vars = 2;
  c.embed = 4;
  c.hidden = 8;
  c.heads = 1;
  c.layers = 1;
  c.ffn_dim = 8;
  c.mix_rank = 8;
  c.period = 4;
  c.routers = 2;
  return c;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"variant", c.variant.name()},
      {"input_len", c.input_len},
      {"horizon", c.horizon},
      {"n_vars", c.n_vars},
      {"embed", c.embed},
      {"hidden", c.hidden},
      {"heads", c.heads},
      {"layers", c.layers},
      {"ffn_dim", c.ffn_dim},
      {"mix_rank", c.mix_rank},
      {"gate_hidden", c.gate_hidden},
      {"period", c.period},
      {"routers", c.routers},
      {"alpha_init", c.alpha_init},
      {"trust_bias_init", c.trust_bias_init},
      {"head", revin::to_string(c.head)},
      {"revin_affine", c.revin_affine},
      {"patch_len", c.patch_len},
      {"patch_stride", c.patch_stride},
      {"seed", c.seed},
  };
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.variant = Variant::parse(j.at("variant").get<std::string>());
    c.input_len = j.at("input_len");
    c.horizon = j.at("horizon");
    c.n_vars = j.at("n_vars");
    c.embed = j.at("embed");
    c.hidden = j.at("hidden");
    c.heads = j.at("heads");
    c.layers = j.at("layers");
    c.ffn_dim = j.at("ffn_dim");
    c.mix_rank = j.at("mix_rank");
    c.gate_hidden = j.at("gate_hidden");
    c.period = j.at("period");
    c.routers = j.at("routers");
    c.alpha_init = j.at("alpha_init");
    c.trust_bias_init = j.at("trust_bias_init");
    c.head = revin::parse_head(j.at("head").get<std::string>());
    c.revin_affine = j.at("revin_affine");
    c.patch_len = j.at("patch_len");
    c.patch_stride = j.at("patch_stride");
    c.seed = j.at("seed");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_hash(const ModelConfig& c) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::size_t expected_param_count(const ModelConfig& c) {
  std::size_t n = c.embed;
  if (c.revin_affine) n += 2 * c.n_vars;
  n += 2 * rwkv::branch_param_count(c.branch());
  if (c.variant.has_ppce()) n += ppce::param_count(c.ppce());
  n += interaction::param_count(c.gates(), c.variant);
  n += revin::head_param_count(c.head, c.input_len, c.embed, c.horizon);
  return n;
}

Forecaster::Forecaster(const ModelConfig& cfg)
    : cfg_((cfg.validate(), cfg)),
      revin_(store_, "revin", cfg.n_vars, cfg.revin_affine),
      e_(make_embedding(store_, cfg)),
      branch_r_(store_, "branch_real", cfg.branch(), cfg.seed),
      branch_i_(store_, "branch_imag", cfg.branch(), cfg.seed) {
  if (cfg.variant.has_ppce()) ppce_.emplace(store_, "ppce", cfg.ppce(), cfg.seed);
  gates_ = interaction::BranchInteraction(store_, "interaction", cfg.gates(), cfg.variant, cfg.seed);
  head_ = revin::HorizonHead(store_, "head", cfg.head, cfg.input_len, cfg.embed, cfg.horizon, cfg.seed);
  if (store_.count() != expected_param_count(cfg)) {
    throw ContractError("parameter count " + std::to_string(store_.count()) + " differs from closed form " +
                        std::to_string(expected_param_count(cfg)));
  }
}

Forecaster::Trace Forecaster::trace(const Var& x) const {
  const Shape& s = x.shape();
  if (s.size() != 3 || s[1] != cfg_.input_len || s[2] != cfg_.n_vars) {
    throw DimensionError("model expects [B," + std::to_string(cfg_.input_len) + "," + std::to_string(cfg_.n_vars) +
                         "], got " + to_string(s));
  }
  Trace t;
  std::tie(t.normalized, t.stats) = stage("revin", [&] { return revin_.normalize(x); });
  t.emb = stage("embed", [&] { return revin::token_embed(t.normalized, e_); });
  t.spectrum = stage("rfft", [&] { return spectral::rfft_time(t.emb); });
  t.y_r = stage("branch_real", [&] { return branch_r_(t.spectrum.real); });
  t.y_i = stage("branch_imag", [&] { return branch_i_(t.spectrum.imag); });
  Var c_r = spectral::mean_freq(t.y_r);
  Var c_i = spectral::mean_freq(t.y_i);
  Var c_pos = ppce_ ? stage("ppce", [&] { return (*ppce_)(t.emb); }) : constant(Tensor(c_r.shape()));
  t.contexts = stage("interaction", [&] { return gates_.compute(c_r, c_i, c_pos); });
  auto [yr, yi] = interaction::apply_gates(t.y_r, t.y_i, t.contexts.gates.r, t.contexts.gates.i);
  t.freq_out = stage("irfft", [&] { return spectral::irfft_time(spectral::Spectrum{yr, yi, cfg_.input_len}); });
  t.head_out = stage("head", [&] { return head_(t.emb + t.freq_out); });
  t.output = stage("denormalize", [&] { return revin_.denormalize(t.head_out, t.stats); });
  return t;
}

void copy_parameters(const Forecaster& from, Forecaster& to) {
  for (auto& p : to.params().items()) {
    const NamedParam* src = from.params().find(p.name);
    if (!src) throw ContractError("parameter '" + p.name + "' missing from source model");
    if (src->var.shape() != p.var.shape()) throw DimensionError("parameter '" + p.name + "' shape mismatch");
    p.var.mutable_value() = src->var.value();
  }
}

void save_checkpoint(const std::string& path, const Forecaster& model) {
  nlohmann::json index = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& p : model.params().items()) {
    index.push_back({{"name", p.name}, {"shape", p.var.shape()}, {"offset", offset}});
    offset += p.var.size();
  }
  const std::string header = nlohmann::json{{"config", to_json(model.config())}, {"params", index}}.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path);
  const std::uint64_t len = header.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& p : model.params().items()) {
    const auto data = p.var.value().data();
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!out) throw ConfigError("failed writing checkpoint " + path);
}

std::unique_ptr<Forecaster> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path);
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ConfigError(path + " is not a checkpoint");
  if (version != kVersion) throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw ConfigError("truncated checkpoint header in " + path);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("corrupt checkpoint header: " + std::string(e.what()));
  }
  auto model = std::make_unique<Forecaster>(config_from_json(j.at("config")));
  const auto& index = j.at("params");
  if (index.size() != model->params().items().size()) throw ConfigError("checkpoint parameter list does not match config");
  std::vector<double> blob(model->param_count());
  in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(double)));
  if (!in) throw ConfigError("truncated checkpoint payload in " + path);

  for (const auto& entry : index) {
    const std::string name = entry.at("name");
    const NamedParam* p = model->params().find(name);
    if (!p) throw ConfigError("checkpoint has unknown parameter '" + name + "'");
    const Shape shape = entry.at("shape").get<Shape>();
    if (shape != p->var.shape()) throw ConfigError("checkpoint shape mismatch for '" + name + "'");
    const std::size_t off = entry.at("offset");
    if (off + p->var.size() > blob.size()) throw ConfigError("checkpoint offset out of range for '" + name + "'");
    Var v = p->var;
    std::copy_n(blob.begin() + static_cast<std::ptrdiff_t>(off), v.size(), v.mutable_value().vec().begin());
  }
  return model;
}

}  // namespace frwkv::model
