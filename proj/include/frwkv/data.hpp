#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "frwkv/tensor.hpp"

namespace frwkv::data {

struct SeriesTable {
  std::vector<std::string> timestamps;  // empty when the file has no date column
  std::vector<std::string> columns;     // variable names, file order
  Tensor values;                        // [length, n_vars]

  std::size_t length() const { return values.rank() == 2 ? values.dim(0) : 0; }
  std::size_t n_vars() const { return values.rank() == 2 ? values.dim(1) : 0; }
};

// The first column is taken as a timestamp when its header is "date" or its
// first value is not numeric. Every other cell must parse as a finite number.
SeriesTable load_csv(const std::string& path);
void save_csv(const std::string& path, const SeriesTable& table);

enum class DatasetKind { ETTh, ETTm, Custom };

DatasetKind parse_kind(const std::string& text);
std::string to_string(DatasetKind kind);
// ETTh*/ETTm* file stems map to their calendar splits, everything else to Custom.
DatasetKind infer_kind(const std::string& path);

// Half-open row range; val/test ranges include the T rows of prepended context.
struct Segment {
  std::size_t begin = 0, end = 0;
  std::size_t size() const { return end - begin; }
};

struct SplitSpec {
  DatasetKind kind = DatasetKind::Custom;
  std::size_t input_len = 0, horizon = 0;
  Segment train, val, test;
  std::size_t train_len = 0, val_len = 0, test_len = 0;  // rows owned by each split, without context
  Tensor mean, std;                                       // [N], from train rows only
};

SplitSpec split(const SeriesTable& table, DatasetKind kind, std::size_t input_len, std::size_t horizon);

// (values - mean) / std with the split's train statistics.
Tensor standardize(const Tensor& values, const SplitSpec& spec);

// Lazy stride-1 sliding windows over one segment of a [L, N] matrix.
class WindowSet {
 public:
  WindowSet() = default;
  WindowSet(std::shared_ptr<const Tensor> values, Segment segment, std::size_t input_len, std::size_t horizon);

  std::size_t size() const { return count_; }
  std::size_t input_len() const { return t_; }
  std::size_t horizon() const { return h_; }
  std::size_t n_vars() const { return values_ ? values_->dim(1) : 0; }
  const Segment& segment() const { return seg_; }

  // x [B,T,N], y [B,H,N] for the listed window indices.
  void gather(const std::vector<std::size_t>& idx, Tensor& x, Tensor& y) const;

 private:
  std::shared_ptr<const Tensor> values_;
  Segment seg_;
  std::size_t t_ = 0, h_ = 0, count_ = 0;
};

struct Dataset {
  SeriesTable table;
  SplitSpec spec;
  std::shared_ptr<const Tensor> scaled;
  WindowSet train, val, test;

  const WindowSet& windows(const std::string& name) const;
};

Dataset prepare(SeriesTable table, DatasetKind kind, std::size_t input_len, std::size_t horizon);

// Per variable: A·sin(2π t/period + φ + jitter·ξ_cycle) + slow linear trend + N(0, noise²).
// ξ_cycle is redrawn every period, so phase_jitter > 0 weakens periodicity.
SeriesTable synth_periodic(std::size_t n_vars, std::size_t length, double period, double phase_jitter,
                           double noise_std, std::uint64_t seed);

}  // namespace frwkv::data
