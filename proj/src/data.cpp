#include "frwkv/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "frwkv/errors.hpp"

namespace frwkv::data {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (auto& c : out) {
    while (!c.empty() && std::isspace(static_cast<unsigned char>(c.back()))) c.pop_back();
    std::size_t i = 0;
    while (i < c.size() && std::isspace(static_cast<unsigned char>(c[i]))) ++i;
    c.erase(0, i);
  }
  return out;
}

bool parse_number(const std::string& s, double& v) {
  if (s.empty()) return false;
  char* end = nullptr;
  v = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(v);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

void require_segment(const Segment& s, std::size_t t, std::size_t h, const char* name) {
  if (s.size() < t + h) {
    throw DataError(std::string(name) + " segment has " + std::to_string(s.size()) + " rows, needs at least T+H = " +
                    std::to_string(t + h));
  }
}

}  // namespace

SeriesTable load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || split_line(line).empty()) throw DataError(path + " is empty");
  std::vector<std::string> header = split_line(line);

  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_line(line));
  }
  if (rows.empty()) throw DataError(path + " has a header but no data rows");

  double probe = 0.0;
  const bool has_date = lower(header[0]) == "date" || !parse_number(rows[0][0], probe);
  const std::size_t first = has_date ? 1 : 0;
  if (header.size() <= first) throw DataError(path + " has no value columns");

  SeriesTable t;
  t.columns.assign(header.begin() + static_cast<std::ptrdiff_t>(first), header.end());
  const std::size_t n = t.columns.size();
  t.values = Tensor({rows.size(), n});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    // Row numbers in messages are 1-based file lines (header is line 1).
    if (rows[r].size() != header.size()) {
      throw DataError(path + " line " + std::to_string(r + 2) + ": expected " + std::to_string(header.size()) +
                      " cells, got " + std::to_string(rows[r].size()));
    }
    if (has_date) t.timestamps.push_back(rows[r][0]);
    for (std::size_t c = 0; c < n; ++c) {
      double v = 0.0;
      if (!parse_number(rows[r][first + c], v)) {
        throw DataError(path + " line " + std::to_string(r + 2) + " column " + std::to_string(first + c + 1) + " (" +
                        t.columns[c] + "): cannot parse '" + rows[r][first + c] + "'");
      }
      t.values[r * n + c] = v;
    }
  }
  return t;
}

void save_csv(const std::string& path, const SeriesTable& table) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  const bool has_date = !table.timestamps.empty();
  if (has_date) out << "date";
  for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c || has_date ? "," : "") << table.columns[c];
  out << '\n';
  char buf[32];
  const std::size_t n = table.n_vars();
  for (std::size_t r = 0; r < table.length(); ++r) {
    if (has_date) out << table.timestamps[r];
    for (std::size_t c = 0; c < n; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", table.values[r * n + c]);
      out << (c || has_date ? "," : "") << buf;
    }
    out << '\n';
  }
}

DatasetKind parse_kind(const std::string& text) {
  const std::string k = lower(text);
  if (k == "etth") return DatasetKind::ETTh;
  if (k == "ettm") return DatasetKind::ETTm;
  if (k == "custom") return DatasetKind::Custom;
  throw ConfigError("unknown dataset kind '" + text + "' (expected etth, ettm or custom)");
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::ETTh:
      return "etth";
    case DatasetKind::ETTm:
      return "ettm";
    default:
      return "custom";
  }
}

DatasetKind infer_kind(const std::string& path) {
  const std::string stem = lower(std::filesystem::path(path).stem().string());
  if (stem.rfind("etth", 0) == 0) return DatasetKind::ETTh;
  if (stem.rfind("ettm", 0) == 0) return DatasetKind::ETTm;
  return DatasetKind::Custom;
}

SplitSpec split(const SeriesTable& table, DatasetKind kind, std::size_t input_len, std::size_t horizon) {
  const std::size_t len = table.length();
  SplitSpec s;
  s.kind = kind;
  s.input_len = input_len;
  s.horizon = horizon;
  if (kind == DatasetKind::Custom) {
    s.train_len = static_cast<std::size_t>(0.7 * static_cast<double>(len));
    s.test_len = static_cast<std::size_t>(0.2 * static_cast<double>(len));
    s.val_len = len - s.train_len - s.test_len;
  } else {
    // 12/4/4 months of 30 days, hourly or 15-minute sampling.
    const std::size_t per_month = 30 * 24 * (kind == DatasetKind::ETTm ? 4 : 1);
    s.train_len = 12 * per_month;
    s.val_len = 4 * per_month;
    s.test_len = 4 * per_month;
    if (len < s.train_len + s.val_len + s.test_len) {
      throw DataError(to_string(kind) + " split needs " + std::to_string(s.train_len + s.val_len + s.test_len) +
                      " rows, table has " + std::to_string(len));
    }
  }
  const std::size_t val_end = s.train_len + s.val_len;
  const std::size_t test_end = val_end + s.test_len;
  if (s.train_len < input_len) throw DataError("train split shorter than the input length");
  s.train = {0, s.train_len};
  s.val = {s.train_len - input_len, val_end};
  s.test = {val_end - input_len, test_end};
  require_segment(s.train, input_len, horizon, "train");
  require_segment(s.val, input_len, horizon, "val");
  require_segment(s.test, input_len, horizon, "test");

  const std::size_t n = table.n_vars();
  s.mean = Tensor({n});
  s.std = Tensor({n});
  for (std::size_t c = 0; c < n; ++c) {
    double mu = 0.0;
    for (std::size_t r = 0; r < s.train_len; ++r) mu += table.values[r * n + c];
    mu /= static_cast<double>(s.train_len);
    double var = 0.0;
    for (std::size_t r = 0; r < s.train_len; ++r) {
      const double d = table.values[r * n + c] - mu;
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(s.train_len));
    s.mean[c] = mu;
    s.std[c] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Tensor standardize(const Tensor& values, const SplitSpec& spec) {
  const std::size_t n = spec.mean.size();
  if (values.rank() != 2 || values.dim(1) != n) throw DimensionError("standardize: value width does not match split");
  Tensor out(values.shape());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - spec.mean[i % n]) / spec.std[i % n];
  return out;
}

WindowSet::WindowSet(std::shared_ptr<const Tensor> values, Segment segment, std::size_t input_len, std::size_t horizon)
    : values_(std::move(values)), seg_(segment), t_(input_len), h_(horizon) {
  if (!values_ || values_->rank() != 2) throw ContractError("window source must be a [L, N] matrix");
  if (seg_.end > values_->dim(0) || seg_.begin > seg_.end) throw ContractError("window segment out of range");
  require_segment(seg_, t_, h_, "window");
  count_ = seg_.size() - t_ - h_ + 1;
}

void WindowSet::gather(const std::vector<std::size_t>& idx, Tensor& x, Tensor& y) const {
  const std::size_t n = n_vars(), b = idx.size();
  x = Tensor({b, t_, n});
  y = Tensor({b, h_, n});
  const auto src = values_->data();
  for (std::size_t i = 0; i < b; ++i) {
    if (idx[i] >= count_) throw ContractError("window index " + std::to_string(idx[i]) + " out of range");
    const std::size_t start = seg_.begin + idx[i];
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(start * n), t_ * n, x.vec().begin() + static_cast<std::ptrdiff_t>(i * t_ * n));
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>((start + t_) * n), h_ * n,
                y.vec().begin() + static_cast<std::ptrdiff_t>(i * h_ * n));
  }
}

const WindowSet& Dataset::windows(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

Dataset prepare(SeriesTable table, DatasetKind kind, std::size_t input_len, std::size_t horizon) {
  Dataset d;
  d.spec = split(table, kind, input_len, horizon);
  d.scaled = std::make_shared<const Tensor>(standardize(table.values, d.spec));
  d.table = std::move(table);
  d.train = WindowSet(d.scaled, d.spec.train, input_len, horizon);
  d.val = WindowSet(d.scaled, d.spec.val, input_len, horizon);
  d.test = WindowSet(d.scaled, d.spec.test, input_len, horizon);
  return d;
}

SeriesTable synth_periodic(std::size_t n_vars, std::size_t length, double period, double phase_jitter,
                           double noise_std, std::uint64_t seed) {
  if (n_vars == 0 || length == 0 || !(period > 0.0) || phase_jitter < 0.0 || noise_std < 0.0) {
    throw ConfigError("synth_periodic needs positive sizes and period, non-negative jitter and noise");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.5, 1.5), phase(0.0, 2.0 * std::numbers::pi), slope(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SeriesTable t;
  t.values = Tensor({length, n_vars});
  for (std::size_t c = 0; c < n_vars; ++c) t.columns.push_back("v" + std::to_string(c));
  std::vector<double> a(n_vars), phi(n_vars), k(n_vars);
  for (std::size_t c = 0; c < n_vars; ++c) {
    a[c] = amp(rng);
    phi[c] = phase(rng);
    k[c] = 0.5 * slope(rng) / static_cast<double>(length);
  }
  const auto cycles = static_cast<std::size_t>(std::ceil(static_cast<double>(length) / period)) + 1;
  std::vector<double> jitter(cycles * n_vars, 0.0);
  for (auto& j : jitter) j = phase_jitter * gauss(rng);
  for (std::size_t r = 0; r < length; ++r) {
    const auto cycle = static_cast<std::size_t>(std::floor(static_cast<double>(r) / period));
    for (std::size_t c = 0; c < n_vars; ++c) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(r) / period + phi[c] + jitter[cycle * n_vars + c];
      const double noise = noise_std > 0.0 ? noise_std * gauss(rng) : 0.0;
      t.values[r * n_vars + c] = a[c] * std::sin(angle) + k[c] * static_cast<double>(r) + noise;
    }
  }
  return t;
}

}  // namespace frwkv::data
