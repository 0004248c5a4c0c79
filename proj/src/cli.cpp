#include "frwkv/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "frwkv/config.hpp"
#include "frwkv/errors.hpp"

namespace frwkv::cli {

namespace fs = std::filesystem;

namespace {

void export_predictions(const std::string& path, const Tensor& preds, const data::WindowSet& windows) {
  const std::size_t h = windows.horizon(), n = windows.n_vars();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "window";
  for (const char* kind : {"pred", "true"})
    for (std::size_t t = 0; t < h; ++t)
      for (std::size_t c = 0; c < n; ++c) out << ',' << kind << "_t" << t << "_v" << c;
  out << '\n';
  char buf[32];
  Tensor x, y;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    windows.gather({w}, x, y);
    out << w;
    for (std::size_t k = 0; k < h * n; ++k) {
      std::snprintf(buf, sizeof buf, "%.10g", preds[w * h * n + k]);
      out << ',' << buf;
    }
    for (std::size_t k = 0; k < h * n; ++k) {
      std::snprintf(buf, sizeof buf, "%.10g", y[k]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

int cmd_train(const std::string& config_path, std::ostream& out) {
  const config::RunConfig cfg = config::load_run_config(config_path);
  const std::string dir = config::resolve_output_path(cfg.output_dir);
  const auto res = config::run_experiment(cfg, dir);
  nlohmann::json j = {{"output_dir", dir},
                      {"epochs_run", res.fit.epochs.size()},
                      {"test", {{"mse", res.test.mse}, {"mae", res.test.mae}}}};
  out << j.dump() << '\n';
  return kOk;
}

int cmd_eval(const std::string& ckpt, const std::string& data_path, const std::string& split, const std::string& kind,
             std::size_t batch, const std::string& export_path, std::ostream& out) {
  auto net = model::load_checkpoint(ckpt);
  const auto& mc = net->config();
  data::SeriesTable table = data::load_csv(data_path);
  if (table.n_vars() != mc.n_vars) {
    throw DimensionError("checkpoint expects " + std::to_string(mc.n_vars) + " variables, " + data_path + " has " +
                         std::to_string(table.n_vars()));
  }
  const auto k = kind == "auto" ? data::infer_kind(data_path) : data::parse_kind(kind);
  const data::Dataset ds = data::prepare(std::move(table), k, mc.input_len, mc.horizon);
  const data::WindowSet& windows = ds.windows(split);
  Tensor preds;
  const auto m = training::evaluate(*net, windows, batch, &preds);
  if (!export_path.empty()) export_predictions(export_path, preds, windows);
  nlohmann::json j = {{"split", split}, {"windows", windows.size()}, {"mse", m.mse}, {"mae", m.mae}};
  out << j.dump() << '\n';
  return kOk;
}

int cmd_report(const std::vector<harness::RunRecord>& records, const std::string& dir, std::ostream& out) {
  harness::write_report(records, dir);
  std::ifstream in(fs::path(dir) / "report.txt");
  out << in.rdbuf();
  return kOk;
}

int cmd_ablate(const std::string& grid_path, std::optional<std::size_t> workers_flag, std::ostream& out,
               std::ostream& err) {
  const config::GridConfig g = config::load_grid_config(grid_path);
  const std::size_t workers = workers_flag.value_or(config::env_workers().value_or(g.workers));
  if (workers == 0) throw ConfigError("--workers must be at least 1");
  harness::RecordStore store(config::resolve_output_path(g.store));

  auto runner = [&g](const harness::Cell& cell) {
    const auto res = config::run_experiment(g.cell_config(cell), std::nullopt);
    harness::RunRecord r;
    r.mse = res.test.mse;
    r.mae = res.test.mae;
    r.epochs_run = res.fit.epochs.size();
    r.train_seconds = res.fit.seconds;
    r.config_hash = res.config_hash;
    return r;
  };
  const auto stats = harness::run_grid(g.grid, store, runner, workers);
  out << "planned " << stats.planned << ", resumed " << stats.skipped << ", executed " << stats.executed
      << ", failed " << stats.failed << '\n';

  std::vector<harness::RunRecord> records;
  std::vector<std::string> wanted;
  for (const auto& c : g.grid.cells()) wanted.push_back(c.key());
  std::sort(wanted.begin(), wanted.end());
  for (auto& r : store.latest())
    if (std::binary_search(wanted.begin(), wanted.end(), r.key())) records.push_back(std::move(r));
  const auto missing = harness::missing_cells(g.grid, records);
  if (!missing.empty()) {
    err << missing.size() << " cell(s) have no successful run; analysis skipped\n";
    for (const auto& r : records)
      if (!r.ok()) err << "  " << r.key() << ": " << r.error << '\n';
    return kNumericFailure;
  }
  const std::string dir = g.report_dir.empty()
                              ? (fs::path(store.path()).parent_path() / "report").string()
                              : config::resolve_output_path(g.report_dir);
  return cmd_report(records, dir, out);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"frequency-domain RWKV forecaster"};
  app.require_subcommand(1);

  std::string config_path;
  auto* train = app.add_subcommand("train", "train one model from a config file");
  train->add_option("--config", config_path, "run config (INI)")->required();

  std::string ckpt, data_path, split = "test", export_path, kind = "auto";
  std::size_t batch = 32;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on one split");
  eval->add_option("--ckpt", ckpt)->required();
  eval->add_option("--data", data_path)->required();
  eval->add_option("--split", split)->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--kind", kind, "auto, etth, ettm or custom");
  eval->add_option("--batch-size", batch)->check(CLI::PositiveNumber);
  eval->add_option("--export-preds", export_path, "per-window prediction CSV");

  std::string grid_path;
  std::optional<std::size_t> workers;
  auto* ablate = app.add_subcommand("ablate", "run a matched-seed variant grid");
  ablate->add_option("--grid", grid_path)->required();
  ablate->add_option("--workers", workers);

  std::string store_path, report_dir;
  auto* report = app.add_subcommand("report", "analyse a record store");
  report->add_option("--store", store_path)->required();
  report->add_option("--out", report_dir)->required();

  std::string synth_out;
  std::size_t vars = 2, length = 2000;
  double period = 24.0, noise = 0.1, jitter = 0.0;
  std::uint64_t seed = 2024;
  auto* synth = app.add_subcommand("synth", "write a synthetic periodic dataset");
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--vars", vars);
  synth->add_option("--len", length);
  synth->add_option("--period", period);
  synth->add_option("--noise", noise);
  synth->add_option("--jitter", jitter);
  synth->add_option("--seed", seed);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUserError;
  }

  try {
    if (*train) return cmd_train(config_path, out);
    if (*eval) return cmd_eval(ckpt, data_path, split, kind, batch, export_path, out);
    if (*ablate) return cmd_ablate(grid_path, workers, out, err);
    if (*report) return cmd_report(harness::RecordStore(store_path).latest(), report_dir, out);
    if (*synth) {
      data::save_csv(synth_out, data::synth_periodic(vars, length, period, jitter, noise, seed));
      out << "wrote " << synth_out << '\n';
      return kOk;
    }
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUserError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kUserError;
  } catch (const DimensionError& e) {
    err << "shape error: " << e.what() << '\n';
    return kUserError;
  } catch (const IncompleteGridError& e) {
    err << "incomplete grid: " << e.what() << '\n';
    return kUserError;
  } catch (const fs::filesystem_error& e) {
    err << "file error: " << e.what() << '\n';
    return kUserError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}

}  // namespace frwkv::cli
