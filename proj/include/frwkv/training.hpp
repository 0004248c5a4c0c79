#pragma once

#include <cstdint>
#include <limits>
#include <ostream>
#include <vector>

#include "frwkv/autograd.hpp"
#include "frwkv/data.hpp"
#include "frwkv/model.hpp"
#include "frwkv/module.hpp"

namespace frwkv::training {

// w_t = (t+1)^(-alpha_w), t = 0..H-1
std::vector<double> horizon_weights(std::size_t horizon, double alpha_w);

// Mean of w_t |pred - target| over every (b, t, n). Subgradient of |0| is 0.
Var weighted_l1_loss(const Var& pred, const Var& target, double alpha_w);

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
};
Metrics mse_mae(const Tensor& pred, const Tensor& target);

struct AdamWConfig {
  double lr = 1e-4;
  double weight_decay = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamW {
 public:
  AdamW(ParamStore& store, const AdamWConfig& cfg);
  // One update with learning rate `lr`; parameters without gradients are left as is.
  void step(double lr);
  std::size_t steps() const { return t_; }

 private:
  ParamStore* store_;
  AdamWConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

// lr0 (1 + cos(π epoch / epochs_max)) / 2 for 0-based epoch.
double cosine_lr(std::size_t epoch, std::size_t epochs_max, double lr0);

struct EarlyStopState {
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t epochs_done = 0;
  std::size_t epochs_max = 30;
  std::size_t patience = 5;
};

struct StopDecision {
  bool improved = false;
  bool stop = false;
};

// `epoch` is 1-based (the count of finished epochs). Stops once at least half
// the schedule has run and no strict improvement was seen for `patience` epochs.
StopDecision early_stop_update(EarlyStopState& state, double val_loss, std::size_t epoch);

struct TrainConfig {
  AdamWConfig optim;
  std::size_t epochs_max = 30;
  std::size_t patience = 5;
  std::size_t batch_size = 32;
  double loss_alpha = 0.5;
  std::uint64_t seed = 2024;
  // Caps per epoch, 0 = no cap. Evenly spaced subsampling for val.
  std::size_t max_train_batches = 0;
  std::size_t max_val_windows = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  bool stopped = false;
};

struct FitResult {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
  double seconds = 0.0;
};

void write_epoch_header(std::ostream& out);
void write_epoch_line(std::ostream& out, const EpochLog& e);

// Trains in place and leaves the best-validation parameters loaded. When `log`
// is given each epoch is appended to it as CSV.
FitResult fit(model::Forecaster& model, const data::WindowSet& train, const data::WindowSet& val,
              const TrainConfig& cfg, std::ostream* log = nullptr);

// Weighted-L1 objective over a window set (no gradients).
double evaluate_loss(const model::Forecaster& model, const data::WindowSet& windows, std::size_t batch_size,
                     double loss_alpha, std::size_t max_windows = 0);

// MSE/MAE over all windows. If `preds` is set it receives the stacked forecasts [W,H,N].
Metrics evaluate(const model::Forecaster& model, const data::WindowSet& windows, std::size_t batch_size,
                 Tensor* preds = nullptr);

// Repeat-last-value forecast metrics on the same windows.
Metrics repeat_last_baseline(const data::WindowSet& windows);

}  // namespace frwkv::training
