#include "frwkv/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "frwkv/errors.hpp"

namespace frwkv::config {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

std::size_t to_size(const std::string& v, const std::string& key) {
  std::size_t pos = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return static_cast<std::size_t>(x);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
}

double to_double(const std::string& v, const std::string& key) {
  std::size_t pos = 0;
  try {
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;
using SectionTable = std::map<std::string, std::map<std::string, Setter>>;

const SectionTable& run_table() {
  static const SectionTable table = [] {
    SectionTable t;
    auto& d = t["data"];
    d["path"] = [](RunConfig& c, const std::string& v) { c.data_path = v; };
    d["kind"] = [](RunConfig& c, const std::string& v) {
      if (v != "auto") data::parse_kind(v);
      c.dataset_kind = v;
    };
    d["name"] = [](RunConfig& c, const std::string& v) { c.dataset_name = v; };

    auto& m = t["model"];
    m["variant"] = [](RunConfig& c, const std::string& v) { c.model.variant = interaction::Variant::parse(v); };
    auto size_key = [&m](const char* key, std::size_t model::ModelConfig::*field) {
      m[key] = [key, field](RunConfig& c, const std::string& v) { c.model.*field = to_size(v, key); };
    };
    size_key("input_len", &model::ModelConfig::input_len);
    size_key("horizon", &model::ModelConfig::horizon);
    size_key("n_vars", &model::ModelConfig::n_vars);
    size_key("embed", &model::ModelConfig::embed);
    size_key("hidden", &model::ModelConfig::hidden);
    size_key("heads", &model::ModelConfig::heads);
    size_key("layers", &model::ModelConfig::layers);
    size_key("ffn_dim", &model::ModelConfig::ffn_dim);
    size_key("mix_rank", &model::ModelConfig::mix_rank);
    size_key("gate_hidden", &model::ModelConfig::gate_hidden);
    size_key("period", &model::ModelConfig::period);
    size_key("routers", &model::ModelConfig::routers);
    size_key("patch_len", &model::ModelConfig::patch_len);
    size_key("patch_stride", &model::ModelConfig::patch_stride);
    m["alpha_init"] = [](RunConfig& c, const std::string& v) { c.model.alpha_init = to_double(v, "alpha_init"); };
    m["trust_bias_init"] = [](RunConfig& c, const std::string& v) {
      c.model.trust_bias_init = to_double(v, "trust_bias_init");
    };
    m["head"] = [](RunConfig& c, const std::string& v) { c.model.head = revin::parse_head(v); };
    m["revin_affine"] = [](RunConfig& c, const std::string& v) { c.model.revin_affine = to_bool(v, "revin_affine"); };

    auto& o = t["optim"];
    o["lr"] = [](RunConfig& c, const std::string& v) { c.train.optim.lr = to_double(v, "lr"); };
    o["weight_decay"] = [](RunConfig& c, const std::string& v) {
      c.train.optim.weight_decay = to_double(v, "weight_decay");
    };
    o["beta1"] = [](RunConfig& c, const std::string& v) { c.train.optim.beta1 = to_double(v, "beta1"); };
    o["beta2"] = [](RunConfig& c, const std::string& v) { c.train.optim.beta2 = to_double(v, "beta2"); };
    o["eps"] = [](RunConfig& c, const std::string& v) { c.train.optim.eps = to_double(v, "eps"); };
    o["epochs"] = [](RunConfig& c, const std::string& v) { c.train.epochs_max = to_size(v, "epochs"); };
    o["patience"] = [](RunConfig& c, const std::string& v) { c.train.patience = to_size(v, "patience"); };
    o["batch_size"] = [](RunConfig& c, const std::string& v) { c.train.batch_size = to_size(v, "batch_size"); };
    o["loss_alpha"] = [](RunConfig& c, const std::string& v) { c.train.loss_alpha = to_double(v, "loss_alpha"); };
    o["max_train_batches"] = [](RunConfig& c, const std::string& v) {
      c.train.max_train_batches = to_size(v, "max_train_batches");
    };
    o["max_val_windows"] = [](RunConfig& c, const std::string& v) {
      c.train.max_val_windows = to_size(v, "max_val_windows");
    };

    auto& r = t["run"];
    r["seed"] = [](RunConfig& c, const std::string& v) {
      c.model.seed = to_size(v, "seed");
      c.train.seed = c.model.seed;
    };
    r["output_dir"] = [](RunConfig& c, const std::string& v) { c.output_dir = v; };
    return t;
  }();
  return table;
}

pt::ptree read_ini(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return tree;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Applies one recipe section, rejecting keys the table does not know.
void apply_section(RunConfig& c, const std::string& section, const pt::ptree& keys) {
  const auto& table = run_table().at(section);
  for (const auto& [key, node] : keys) {
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
    it->second(c, node.data());
  }
}

void validate_run(const RunConfig& c) {
  if (c.train.batch_size == 0 || c.train.epochs_max == 0) throw ConfigError("epochs and batch_size must be positive");
  if (!(c.train.optim.lr > 0.0)) throw ConfigError("lr must be positive");
  if (c.train.optim.weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
}

}  // namespace

data::DatasetKind RunConfig::kind() const {
  return dataset_kind == "auto" ? data::infer_kind(data_path) : data::parse_kind(dataset_kind);
}

std::string RunConfig::name() const {
  return dataset_name.empty() ? fs::path(data_path).stem().string() : dataset_name;
}

RunConfig parse_run_config(const std::string& ini_text) {
  const pt::ptree tree = read_ini(ini_text);
  RunConfig c;
  for (const auto& [section, keys] : tree) {
    if (!run_table().count(section)) throw ConfigError("unknown section [" + section + "]");
    apply_section(c, section, keys);
  }
  if (c.data_path.empty()) throw ConfigError("[data] path is required");
  validate_run(c);
  return c;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_file(path)); }

std::string dump_run_config(const RunConfig& c) {
  const auto& m = c.model;
  const auto& t = c.train;
  std::ostringstream o;
  o << "[data]\n"
    << "path=" << c.data_path << "\nkind=" << c.dataset_kind << "\nname=" << c.name() << "\n\n"
    << "[model]\n"
    << "variant=" << m.variant.name() << "\ninput_len=" << m.input_len << "\nhorizon=" << m.horizon
    << "\nn_vars=" << m.n_vars << "\nembed=" << m.embed << "\nhidden=" << m.hidden << "\nheads=" << m.heads
    << "\nlayers=" << m.layers << "\nffn_dim=" << m.ffn_dim << "\nmix_rank=" << m.mix_rank
    << "\ngate_hidden=" << m.gate_hidden << "\nperiod=" << m.period << "\nrouters=" << m.routers
    << "\nalpha_init=" << num(m.alpha_init) << "\ntrust_bias_init=" << num(m.trust_bias_init)
    << "\nhead=" << revin::to_string(m.head) << "\nrevin_affine=" << (m.revin_affine ? "true" : "false")
    << "\npatch_len=" << m.patch_len << "\npatch_stride=" << m.patch_stride << "\n\n"
    << "[optim]\n"
    << "lr=" << num(t.optim.lr) << "\nweight_decay=" << num(t.optim.weight_decay) << "\nbeta1=" << num(t.optim.beta1)
    << "\nbeta2=" << num(t.optim.beta2) << "\neps=" << num(t.optim.eps) << "\nepochs=" << t.epochs_max
    << "\npatience=" << t.patience << "\nbatch_size=" << t.batch_size << "\nloss_alpha=" << num(t.loss_alpha)
    << "\nmax_train_batches=" << t.max_train_batches << "\nmax_val_windows=" << t.max_val_windows << "\n\n"
    << "[run]\n"
    << "seed=" << m.seed << "\noutput_dir=" << c.output_dir << "\n";
  return o.str();
}

RunConfig GridConfig::cell_config(const harness::Cell& cell) const {
  auto it = datasets.find(cell.setting.dataset);
  if (it == datasets.end()) throw ConfigError("grid has no [dataset." + cell.setting.dataset + "] section");
  RunConfig c = base;
  c.data_path = it->second.path;
  c.dataset_kind = it->second.kind;
  c.dataset_name = cell.setting.dataset;
  if (it->second.input_len) c.model.input_len = *it->second.input_len;
  if (it->second.batch_size) c.train.batch_size = *it->second.batch_size;
  c.model.horizon = cell.setting.horizon;
  c.model.variant = interaction::Variant::parse(cell.variant);
  c.model.seed = cell.seed;
  c.train.seed = cell.seed;
  return c;
}

GridConfig parse_grid_config(const std::string& ini_text) {
  const pt::ptree tree = read_ini(ini_text);
  GridConfig g;
  std::vector<std::string> dataset_order;
  std::vector<std::size_t> horizons;
  bool have_grid = false;
  for (const auto& [section, keys] : tree) {
    if (section == "grid") {
      have_grid = true;
      for (const auto& [key, node] : keys) {
        const std::string v = node.data();
        if (key == "datasets") {
          dataset_order = to_list(v);
        } else if (key == "horizons") {
          for (const auto& h : to_list(v)) horizons.push_back(to_size(h, key));
        } else if (key == "variants") {
          for (const auto& name : to_list(v)) g.grid.variants.push_back(interaction::Variant::parse(name).name());
        } else if (key == "seeds") {
          // Either a list "2024, 2025" or an inclusive range "2024-2039".
          const auto dash = v.find('-');
          if (dash != std::string::npos && v.find(',') == std::string::npos) {
            const auto lo = to_size(to_list(v.substr(0, dash))[0], key);
            const auto hi = to_size(to_list(v.substr(dash + 1))[0], key);
            if (hi < lo) throw ConfigError("empty seed range '" + v + "'");
            for (auto s = lo; s <= hi; ++s) g.grid.seeds.push_back(s);
          } else {
            for (const auto& s : to_list(v)) g.grid.seeds.push_back(to_size(s, key));
          }
        } else if (key == "store") {
          g.store = v;
        } else if (key == "report_dir") {
          g.report_dir = v;
        } else if (key == "workers") {
          g.workers = to_size(v, key);
        } else {
          throw ConfigError("unknown key '" + key + "' in [grid]");
        }
      }
    } else if (section.rfind("dataset.", 0) == 0) {
      DatasetEntry e;
      for (const auto& [key, node] : keys) {
        const std::string v = node.data();
        if (key == "path") {
          e.path = v;
        } else if (key == "kind") {
          if (v != "auto") data::parse_kind(v);
          e.kind = v;
        } else if (key == "input_len") {
          e.input_len = to_size(v, key);
        } else if (key == "batch_size") {
          e.batch_size = to_size(v, key);
        } else {
          throw ConfigError("unknown key '" + key + "' in [" + section + "]");
        }
      }
      if (e.path.empty()) throw ConfigError("[" + section + "] needs a path");
      g.datasets[section.substr(8)] = e;
    } else if (section == "model" || section == "optim" || section == "run") {
      apply_section(g.base, section, keys);
    } else {
      throw ConfigError("unknown section [" + section + "] in grid config");
    }
  }
  if (!have_grid) throw ConfigError("grid config needs a [grid] section");
  if (dataset_order.empty() || horizons.empty() || g.grid.variants.empty() || g.grid.seeds.empty()) {
    throw ConfigError("[grid] needs non-empty datasets, horizons, variants and seeds");
  }
  for (const auto& d : dataset_order) {
    if (!g.datasets.count(d)) throw ConfigError("dataset '" + d + "' has no [dataset." + d + "] section");
    for (auto h : horizons) g.grid.settings.push_back({d, h});
  }
  validate_run(g.base);
  if (g.workers == 0) throw ConfigError("workers must be at least 1");
  return g;
}

GridConfig load_grid_config(const std::string& path) { return parse_grid_config(read_file(path)); }

std::string resolve_output_path(const std::string& path) {
  const char* root = std::getenv("FRWKV_OUTPUT_ROOT");
  if (!root || !*root || fs::path(path).is_absolute()) return path;
  return (fs::path(root) / path).string();
}

std::optional<std::size_t> env_workers() {
  const char* v = std::getenv("FRWKV_WORKERS");
  if (!v || !*v) return std::nullopt;
  const std::size_t n = to_size(v, "FRWKV_WORKERS");
  if (n == 0) throw ConfigError("FRWKV_WORKERS must be at least 1");
  return n;
}

ExperimentResult run_experiment(const RunConfig& cfg, const std::optional<std::string>& out_dir) {
  data::Dataset ds = data::prepare(data::load_csv(cfg.data_path), cfg.kind(), cfg.model.input_len, cfg.model.horizon);
  RunConfig resolved = cfg;
  if (resolved.model.n_vars == 0) resolved.model.n_vars = ds.table.n_vars();
  if (resolved.model.n_vars != ds.table.n_vars()) {
    throw ConfigError("config says n_vars=" + std::to_string(resolved.model.n_vars) + " but " + cfg.data_path +
                      " has " + std::to_string(ds.table.n_vars()) + " variables");
  }
  if (resolved.dataset_name.empty()) resolved.dataset_name = cfg.name();

  ExperimentResult res;
  res.model = resolved.model;
  res.config_hash = model::config_hash(resolved.model);
  model::Forecaster net(resolved.model);

  std::ofstream log;
  if (out_dir) {
    fs::create_directories(*out_dir);
    std::ofstream(fs::path(*out_dir) / "config.ini") << dump_run_config(resolved);
    log.open(fs::path(*out_dir) / "epochs.csv");
  }
  res.fit = training::fit(net, ds.train, ds.val, resolved.train, out_dir ? &log : nullptr);
  res.val = training::evaluate(net, ds.val, resolved.train.batch_size);
  res.test = training::evaluate(net, ds.test, resolved.train.batch_size);

  if (out_dir) {
    model::save_checkpoint((fs::path(*out_dir) / "checkpoint.bin").string(), net);
    nlohmann::json metrics = {
        {"dataset", resolved.name()},
        {"variant", resolved.model.variant.name()},
        {"seed", resolved.model.seed},
        {"config_hash", res.config_hash},
        {"epochs_run", res.fit.epochs.size()},
        {"best_epoch", res.fit.best_epoch},
        {"train_seconds", res.fit.seconds},
        {"val", {{"mse", res.val.mse}, {"mae", res.val.mae}}},
        {"test", {{"mse", res.test.mse}, {"mae", res.test.mae}}},
        {"split", {{"kind", data::to_string(ds.spec.kind)},
                   {"train_rows", ds.spec.train_len},
                   {"val_rows", ds.spec.val_len},
                   {"test_rows", ds.spec.test_len},
                   {"context_prepended", true}}},
    };
    std::ofstream(fs::path(*out_dir) / "metrics.json") << metrics.dump(2) << '\n';
  }
  return res;
}

}  // namespace frwkv::config
