#pragma once

#include <map>
#include <optional>
#include <string>

#include "frwkv/data.hpp"
#include "frwkv/harness.hpp"
#include "frwkv/model.hpp"
#include "frwkv/training.hpp"

namespace frwkv::config {

// One training run. INI sections: [data] [model] [optim] [run].
struct RunConfig {
  std::string data_path;
  std::string dataset_kind = "auto";  // auto | etth | ettm | custom
  std::string dataset_name;           // defaults to the file stem
  // n_vars = 0 means "take it from the data".
  model::ModelConfig model = [] {
    model::ModelConfig m;
    m.n_vars = 0;
    return m;
  }();
  training::TrainConfig train;
  std::string output_dir = "runs/default";

  data::DatasetKind kind() const;
  std::string name() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& ini_text);
// Every field, explicit, in a fixed order; parsing it back yields the same config.
std::string dump_run_config(const RunConfig& c);

struct DatasetEntry {
  std::string path;
  std::string kind = "auto";
  std::optional<std::size_t> input_len;
  std::optional<std::size_t> batch_size;
};

// Ablation grid: [grid] plus one [dataset.NAME] section per dataset; the
// [model] [optim] [run] sections give the shared base recipe.
struct GridConfig {
  RunConfig base;
  std::map<std::string, DatasetEntry> datasets;
  harness::GridSpec grid;
  std::string store = "records.jsonl";
  std::string report_dir;  // defaults to <store dir>/report
  std::size_t workers = 1;

  RunConfig cell_config(const harness::Cell& cell) const;
};

GridConfig load_grid_config(const std::string& path);
GridConfig parse_grid_config(const std::string& ini_text);

// Output root / worker count from the environment (FRWKV_OUTPUT_ROOT, FRWKV_WORKERS).
std::string resolve_output_path(const std::string& path);
std::optional<std::size_t> env_workers();

struct ExperimentResult {
  model::ModelConfig model;
  training::FitResult fit;
  training::Metrics val;
  training::Metrics test;
  std::string config_hash;
};

// Loads data, trains, evaluates on val/test. With `out_dir` it also writes
// checkpoint.bin, epochs.csv, metrics.json and config.ini there.
ExperimentResult run_experiment(const RunConfig& cfg, const std::optional<std::string>& out_dir);

}  // namespace frwkv::config
