#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

namespace frwkv::harness {

struct RunRecord {
  std::string dataset;
  std::size_t horizon = 0;
  std::string variant;
  std::uint64_t seed = 0;
  double mse = 0.0;
  double mae = 0.0;
  std::size_t epochs_run = 0;
  double train_seconds = 0.0;
  std::string config_hash;
  std::string status = "ok";  // "ok" or "failed"
  std::string error;

  bool ok() const { return status == "ok"; }
  std::string key() const;
};

nlohmann::json to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

// Append-only JSON-lines store. Appends are serialized across threads; a
// malformed line is skipped on load without affecting the others.
class RecordStore {
 public:
  explicit RecordStore(std::string path);

  void append(const RunRecord& r);
  std::vector<RunRecord> load() const;
  // Latest record per cell key, in first-seen order.
  std::vector<RunRecord> latest() const;
  std::size_t corrupt_lines() const { return corrupt_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  mutable std::mutex mu_;
  mutable std::size_t corrupt_ = 0;
};

struct Setting {
  std::string dataset;
  std::size_t horizon = 0;
  friend bool operator==(const Setting&, const Setting&) = default;
};

struct Cell {
  Setting setting;
  std::string variant;
  std::uint64_t seed = 0;
  std::string key() const;
};

struct GridSpec {
  std::vector<Setting> settings;
  std::vector<std::string> variants;
  std::vector<std::uint64_t> seeds;

  std::vector<Cell> cells() const;
};

std::vector<std::uint64_t> default_seeds(std::size_t count);  // 2024, 2025, ...

using CellRunner = std::function<RunRecord(const Cell&)>;

struct GridRunStats {
  std::size_t planned = 0;
  std::size_t skipped = 0;  // already had a successful record
  std::size_t executed = 0;
  std::size_t failed = 0;
};

// Runs every cell without a successful record in `store` on `workers` threads.
// Exceptions from the runner become failed records carrying the message.
GridRunStats run_grid(const GridSpec& grid, RecordStore& store, const CellRunner& runner, std::size_t workers = 1);

// Planned cells lacking a successful record.
std::vector<Cell> missing_cells(const GridSpec& grid, const std::vector<RunRecord>& records);

enum class Metric { MSE, MAE };
std::string to_string(Metric m);

// Every analysis requires a complete record set: every (setting, variant)
// pair present with the same seed set, no failures, no duplicate cells.
void check_complete(const std::vector<RunRecord>& records);

std::map<std::string, double> winner_counts(const std::vector<RunRecord>& records, Metric metric);
std::map<std::string, double> average_ranks(const std::vector<RunRecord>& records, Metric metric);

struct DatasetAverage {
  std::string dataset;
  std::string variant;
  double mse = 0.0;
  double mae = 0.0;
};
std::vector<DatasetAverage> dataset_averages(const std::vector<RunRecord>& records);

// Writes dataset_averages.csv, summary.csv and report.txt under `dir`.
void write_report(const std::vector<RunRecord>& records, const std::string& dir);

}  // namespace frwkv::harness
