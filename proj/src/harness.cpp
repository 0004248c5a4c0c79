#include "frwkv/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "frwkv/errors.hpp"

namespace frwkv::harness {

namespace {

std::string cell_key(const std::string& dataset, std::size_t horizon, const std::string& variant, std::uint64_t seed) {
  return dataset + "|" + std::to_string(horizon) + "|" + variant + "|" + std::to_string(seed);
}

using SettingKey = std::pair<std::string, std::size_t>;

double metric_of(const RunRecord& r, Metric m) { return m == Metric::MSE ? r.mse : r.mae; }

// setting -> variant -> mean metric over seeds
std::map<SettingKey, std::map<std::string, double>> seed_means(const std::vector<RunRecord>& records, Metric m) {
  check_complete(records);
  // Summed in seed order so the result does not depend on record order.
  std::map<SettingKey, std::map<std::string, std::map<std::uint64_t, double>>> acc;
  for (const auto& r : records) acc[{r.dataset, r.horizon}][r.variant][r.seed] = metric_of(r, m);
  std::map<SettingKey, std::map<std::string, double>> out;
  for (const auto& [s, vars] : acc) {
    for (const auto& [v, by_seed] : vars) {
      double sum = 0.0;
      for (const auto& [seed, x] : by_seed) sum += x;
      out[s][v] = sum / static_cast<double>(by_seed.size());
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string RunRecord::key() const { return cell_key(dataset, horizon, variant, seed); }
std::string Cell::key() const { return cell_key(setting.dataset, setting.horizon, variant, seed); }

nlohmann::json to_json(const RunRecord& r) {
  return {{"dataset", r.dataset},       {"horizon", r.horizon},         {"variant", r.variant},
          {"seed", r.seed},             {"mse", r.mse},                 {"mae", r.mae},
          {"epochs_run", r.epochs_run}, {"train_seconds", r.train_seconds}, {"config_hash", r.config_hash},
          {"status", r.status},         {"error", r.error}};
}

RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.dataset = j.at("dataset");
  r.horizon = j.at("horizon");
  r.variant = j.at("variant");
  r.seed = j.at("seed");
  r.mse = j.at("mse");
  r.mae = j.at("mae");
  r.epochs_run = j.value("epochs_run", std::size_t{0});
  r.train_seconds = j.value("train_seconds", 0.0);
  r.config_hash = j.value("config_hash", std::string());
  r.status = j.value("status", std::string("ok"));
  r.error = j.value("error", std::string());
  if (r.ok() && (!(r.mse >= 0.0) || !(r.mae >= 0.0))) throw DataError("record with negative or NaN metric");
  return r;
}

RecordStore::RecordStore(std::string path) : path_(std::move(path)) {
  const auto parent = std::filesystem::path(path_).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

void RecordStore::append(const RunRecord& r) {
  const std::string line = to_json(r).dump() + "\n";
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::app);
  if (!out) throw DataError("cannot append to record store " + path_);
  out << line;
  out.flush();
}

std::vector<RunRecord> RecordStore::load() const {
  std::lock_guard lock(mu_);
  std::vector<RunRecord> out;
  corrupt_ = 0;
  std::ifstream in(path_);
  if (!in) return out;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception&) {
      ++corrupt_;
    }
  }
  return out;
}

std::vector<RunRecord> RecordStore::latest() const {
  std::vector<RunRecord> out;
  std::map<std::string, std::size_t> pos;
  for (auto& r : load()) {
    auto [it, inserted] = pos.emplace(r.key(), out.size());
    if (inserted) {
      out.push_back(std::move(r));
    } else {
      out[it->second] = std::move(r);
    }
  }
  return out;
}

std::vector<Cell> GridSpec::cells() const {
  std::vector<Cell> out;
  for (const auto& s : settings)
    for (const auto& v : variants)
      for (auto seed : seeds) out.push_back({s, v, seed});
  return out;
}

std::vector<std::uint64_t> default_seeds(std::size_t count) {
  std::vector<std::uint64_t> s(count);
  for (std::size_t i = 0; i < count; ++i) s[i] = 2024 + i;
  return s;
}

std::vector<Cell> missing_cells(const GridSpec& grid, const std::vector<RunRecord>& records) {
  std::set<std::string> done;
  for (const auto& r : records)
    if (r.ok()) done.insert(r.key());
  std::vector<Cell> out;
  for (const auto& c : grid.cells())
    if (!done.count(c.key())) out.push_back(c);
  return out;
}

GridRunStats run_grid(const GridSpec& grid, RecordStore& store, const CellRunner& runner, std::size_t workers) {
  GridRunStats stats;
  stats.planned = grid.cells().size();
  const std::vector<Cell> todo = missing_cells(grid, store.latest());
  stats.skipped = stats.planned - todo.size();

  std::atomic<std::size_t> next{0}, failed{0};
  auto work = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      const Cell& c = todo[i];
      RunRecord r;
      try {
        r = runner(c);
      } catch (const std::exception& e) {
        r = RunRecord{};
        r.status = "failed";
        r.error = e.what();
      }
      r.dataset = c.setting.dataset;
      r.horizon = c.setting.horizon;
      r.variant = c.variant;
      r.seed = c.seed;
      if (!r.ok()) ++failed;
      store.append(r);
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(workers, todo.size()));
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  stats.executed = todo.size();
  stats.failed = failed;
  return stats;
}

std::string to_string(Metric m) { return m == Metric::MSE ? "mse" : "mae"; }

void check_complete(const std::vector<RunRecord>& records) {
  if (records.empty()) throw IncompleteGridError("no records to analyse");
  std::set<std::string> keys;
  std::set<SettingKey> settings;
  std::set<std::string> variants;
  std::map<std::pair<SettingKey, std::string>, std::set<std::uint64_t>> seeds;
  for (const auto& r : records) {
    if (!r.ok()) throw IncompleteGridError("run " + r.key() + " failed: " + r.error);
    if (!keys.insert(r.key()).second) throw IncompleteGridError("duplicate record for " + r.key());
    settings.insert({r.dataset, r.horizon});
    variants.insert(r.variant);
    seeds[{{r.dataset, r.horizon}, r.variant}].insert(r.seed);
  }
  const auto& reference = seeds.begin()->second;
  for (const auto& s : settings) {
    for (const auto& v : variants) {
      auto it = seeds.find({s, v});
      if (it == seeds.end()) {
        throw IncompleteGridError("missing variant " + v + " on " + s.first + "-" + std::to_string(s.second));
      }
      if (it->second != reference) {
        throw IncompleteGridError("seed set of " + v + " on " + s.first + "-" + std::to_string(s.second) +
                                  " differs from the rest of the grid");
      }
    }
  }
}

std::map<std::string, double> winner_counts(const std::vector<RunRecord>& records, Metric metric) {
  std::map<std::string, double> wins;
  for (const auto& [setting, means] : seed_means(records, metric)) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [v, m] : means) {
      wins.emplace(v, 0.0);
      best = std::min(best, m);
    }
    std::vector<std::string> tied;
    for (const auto& [v, m] : means)
      if (m == best) tied.push_back(v);
    for (const auto& v : tied) wins[v] += 1.0 / static_cast<double>(tied.size());
  }
  return wins;
}

std::map<std::string, double> average_ranks(const std::vector<RunRecord>& records, Metric metric) {
  std::map<std::string, double> total;
  const auto means = seed_means(records, metric);
  for (const auto& [setting, by_variant] : means) {
    std::vector<std::pair<double, std::string>> order;
    for (const auto& [v, m] : by_variant) order.emplace_back(m, v);
    std::sort(order.begin(), order.end());
    // Runs of equal scores share the average of the positions they span.
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j < order.size() && order[j].first == order[i].first) ++j;
      const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
      for (std::size_t k = i; k < j; ++k) total[order[k].second] += rank;
      i = j;
    }
  }
  for (auto& [v, r] : total) r /= static_cast<double>(means.size());
  return total;
}

std::vector<DatasetAverage> dataset_averages(const std::vector<RunRecord>& records) {
  const auto mse = seed_means(records, Metric::MSE);
  const auto mae = seed_means(records, Metric::MAE);
  std::map<std::pair<std::string, std::string>, std::tuple<double, double, std::size_t>> acc;
  for (const auto& [setting, by_variant] : mse) {
    for (const auto& [v, m] : by_variant) {
      auto& a = acc[{setting.first, v}];
      std::get<0>(a) += m;
      std::get<1>(a) += mae.at(setting).at(v);
      ++std::get<2>(a);
    }
  }
  std::vector<DatasetAverage> out;
  for (const auto& [k, a] : acc) {
    const auto n = static_cast<double>(std::get<2>(a));
    out.push_back({k.first, k.second, std::get<0>(a) / n, std::get<1>(a) / n});
  }
  return out;
}

void write_report(const std::vector<RunRecord>& records, const std::string& dir) {
  const auto averages = dataset_averages(records);
  const auto wins_mse = winner_counts(records, Metric::MSE);
  const auto wins_mae = winner_counts(records, Metric::MAE);
  const auto rank_mse = average_ranks(records, Metric::MSE);
  const auto rank_mae = average_ranks(records, Metric::MAE);
  std::filesystem::create_directories(dir);
  const std::filesystem::path root(dir);

  {
    std::ofstream out(root / "dataset_averages.csv");
    out << "dataset,variant,mse,mae\n";
    for (const auto& a : averages) out << a.dataset << ',' << a.variant << ',' << fmt(a.mse) << ',' << fmt(a.mae) << '\n';
  }
  {
    std::ofstream out(root / "summary.csv");
    out << "variant,mse_wins,mae_wins,mse_avg_rank,mae_avg_rank\n";
    for (const auto& [v, w] : wins_mse) {
      out << v << ',' << w << ',' << wins_mae.at(v) << ',' << fmt(rank_mse.at(v)) << ',' << fmt(rank_mae.at(v))
          << '\n';
    }
  }

  std::vector<std::string> datasets, variants;
  for (const auto& a : averages) {
    if (std::find(datasets.begin(), datasets.end(), a.dataset) == datasets.end()) datasets.push_back(a.dataset);
    if (std::find(variants.begin(), variants.end(), a.variant) == variants.end()) variants.push_back(a.variant);
  }
  std::size_t w0 = 7, w = 10;
  for (const auto& d : datasets) w0 = std::max(w0, d.size());
  for (const auto& v : variants) w = std::max(w, v.size());

  std::ofstream out(root / "report.txt");
  auto cell = [&](const std::string& s, std::size_t width) {
    out << s << std::string(width > s.size() ? width - s.size() : 0, ' ') << "  ";
  };
  for (Metric m : {Metric::MSE, Metric::MAE}) {
    out << "dataset averages (" << to_string(m) << ")\n";
    cell("dataset", w0);
    for (const auto& v : variants) cell(v, w);
    out << '\n';
    for (const auto& d : datasets) {
      cell(d, w0);
      for (const auto& v : variants) {
        for (const auto& a : averages)
          if (a.dataset == d && a.variant == v) cell(fmt(m == Metric::MSE ? a.mse : a.mae), w);
      }
      out << '\n';
    }
    out << '\n';
  }
  out << "wins and average ranks\n";
  cell("variant", w);
  for (const char* h : {"mse_wins", "mae_wins", "mse_rank", "mae_rank"}) cell(h, 9);
  out << '\n';
  for (const auto& v : variants) {
    cell(v, w);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", wins_mse.at(v));
    cell(buf, 9);
    std::snprintf(buf, sizeof buf, "%g", wins_mae.at(v));
    cell(buf, 9);
    cell(fmt(rank_mse.at(v)), 9);
    cell(fmt(rank_mae.at(v)), 9);
    out << '\n';
  }
}

}  // namespace frwkv::harness
