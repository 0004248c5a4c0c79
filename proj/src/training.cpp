#include "frwkv/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <random>

#include "frwkv/errors.hpp"

namespace frwkv::training {

std::vector<double> horizon_weights(std::size_t horizon, double alpha_w) {
  std::vector<double> w(horizon);
  for (std::size_t t = 0; t < horizon; ++t) w[t] = std::pow(static_cast<double>(t + 1), -alpha_w);
  return w;
}

Var weighted_l1_loss(const Var& pred, const Var& target, double alpha_w) {
  const Shape& s = pred.shape();
  if (s.size() != 3 || target.shape() != s) {
    throw DimensionError("loss expects matching [B,H,N] tensors, got " + to_string(s) + " and " +
                         to_string(target.shape()));
  }
  const auto w = horizon_weights(s[1], alpha_w);
  Var weights = constant(Tensor({s[1], 1}, w));
  return mean_all(abs(pred - target) * weights);
}

Metrics mse_mae(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) throw DimensionError("metric inputs differ in shape");
  if (pred.size() == 0) return {};
  double se = 0.0, ae = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    se += d * d;
    ae += std::fabs(d);
  }
  const auto n = static_cast<double>(pred.size());
  return {se / n, ae / n};
}

AdamW::AdamW(ParamStore& store, const AdamWConfig& cfg) : store_(&store), cfg_(cfg) {
  for (const auto& p : store.items()) {
    m_.emplace_back(p.var.shape());
    v_.emplace_back(p.var.shape());
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto& items = store_->items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    Var v = items[i].var;
    auto& w = v.mutable_value().vec();
    const double wd = items[i].decay ? cfg_.weight_decay : 0.0;
    if (wd > 0.0)
      for (auto& x : w) x *= 1.0 - lr * wd;
    if (!v.has_grad()) continue;
    const auto& g = v.grad().vec();
    auto& m = m_[i].vec();
    auto& s = v_[i].vec();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
      s[k] = cfg_.beta2 * s[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      w[k] -= lr * (m[k] / bc1) / (std::sqrt(s[k] / bc2) + cfg_.eps);
    }
  }
}

double cosine_lr(std::size_t epoch, std::size_t epochs_max, double lr0) {
  if (epochs_max == 0) throw ContractError("cosine schedule needs epochs_max > 0");
  return lr0 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(epochs_max))) / 2.0;
}

StopDecision early_stop_update(EarlyStopState& state, double val_loss, std::size_t epoch) {
  StopDecision d;
  state.epochs_done = epoch;
  if (val_loss < state.best_val) {
    state.best_val = val_loss;
    state.best_epoch = epoch;
    d.improved = true;
  }
  d.stop = 2 * state.epochs_done >= state.epochs_max && state.epochs_done - state.best_epoch >= state.patience;
  return d;
}

void write_epoch_header(std::ostream& out) { out << "epoch,lr,train_loss,val_loss,stopped\n"; }

void write_epoch_line(std::ostream& out, const EpochLog& e) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%d\n", e.epoch, e.lr, e.train_loss, e.val_loss,
                e.stopped ? 1 : 0);
  out << buf;
}

namespace {

std::vector<std::size_t> subsample(std::size_t count, std::size_t max_windows) {
  std::vector<std::size_t> idx;
  if (max_windows == 0 || max_windows >= count) {
    idx.resize(count);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }
  for (std::size_t i = 0; i < max_windows; ++i) idx.push_back(i * count / max_windows);
  return idx;
}

template <class F>
void for_batches(const std::vector<std::size_t>& idx, std::size_t batch_size, F&& fn) {
  for (std::size_t start = 0; start < idx.size(); start += batch_size) {
    const std::size_t end = std::min(idx.size(), start + batch_size);
    fn(std::vector<std::size_t>(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                idx.begin() + static_cast<std::ptrdiff_t>(end)));
  }
}

}  // namespace

double evaluate_loss(const model::Forecaster& model, const data::WindowSet& windows, std::size_t batch_size,
                     double loss_alpha, std::size_t max_windows) {
  NoGradGuard guard;
  const auto idx = subsample(windows.size(), max_windows);
  double total = 0.0;
  Tensor x, y;
  for_batches(idx, batch_size, [&](const std::vector<std::size_t>& b) {
    windows.gather(b, x, y);
    const double loss = weighted_l1_loss(model.forward(constant(x)), constant(y), loss_alpha).item();
    total += loss * static_cast<double>(b.size());
  });
  return total / static_cast<double>(idx.size());
}

Metrics evaluate(const model::Forecaster& model, const data::WindowSet& windows, std::size_t batch_size,
                 Tensor* preds) {
  NoGradGuard guard;
  const auto idx = subsample(windows.size(), 0);
  const std::size_t h = windows.horizon(), n = windows.n_vars();
  Tensor all_pred({idx.size(), h, n}), all_true({idx.size(), h, n});
  std::size_t offset = 0;
  Tensor x, y;
  for_batches(idx, batch_size, [&](const std::vector<std::size_t>& b) {
    windows.gather(b, x, y);
    const Tensor p = model.forward(constant(x)).value();
    std::copy(p.vec().begin(), p.vec().end(), all_pred.vec().begin() + static_cast<std::ptrdiff_t>(offset));
    std::copy(y.vec().begin(), y.vec().end(), all_true.vec().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.size();
  });
  if (!all_pred.all_finite()) throw NumericError("non-finite forecast during evaluation");
  const Metrics m = mse_mae(all_pred, all_true);
  if (preds) *preds = std::move(all_pred);
  return m;
}

Metrics repeat_last_baseline(const data::WindowSet& windows) {
  const std::size_t t = windows.input_len(), h = windows.horizon(), n = windows.n_vars();
  Tensor pred({windows.size(), h, n}), truth({windows.size(), h, n});
  Tensor x, y;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    windows.gather({w}, x, y);
    for (std::size_t k = 0; k < h; ++k) {
      for (std::size_t c = 0; c < n; ++c) {
        pred[(w * h + k) * n + c] = x[(t - 1) * n + c];
        truth[(w * h + k) * n + c] = y[k * n + c];
      }
    }
  }
  return mse_mae(pred, truth);
}

FitResult fit(model::Forecaster& model, const data::WindowSet& train, const data::WindowSet& val,
              const TrainConfig& cfg, std::ostream* log) {
  if (cfg.epochs_max == 0 || cfg.batch_size == 0) throw ConfigError("epochs and batch size must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  AdamW opt(model.params(), cfg.optim);
  EarlyStopState es{std::numeric_limits<double>::infinity(), 0, 0, cfg.epochs_max, cfg.patience};
  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  std::vector<Tensor> best;
  FitResult result;
  if (log) write_epoch_header(*log);

  std::vector<std::size_t> order;
  for (std::size_t epoch = 0; epoch < cfg.epochs_max; ++epoch) {
    const double lr = cosine_lr(epoch, cfg.epochs_max, cfg.optim.lr);
    order.resize(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    if (cfg.max_train_batches > 0) order.resize(std::min(order.size(), cfg.max_train_batches * cfg.batch_size));

    double loss_sum = 0.0;
    std::size_t batches = 0;
    Tensor x, y;
    for_batches(order, cfg.batch_size, [&](const std::vector<std::size_t>& b) {
      train.gather(b, x, y);
      model.params().zero_grad();
      Var loss = weighted_l1_loss(model.forward(constant(x)), constant(y), cfg.loss_alpha);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                           std::to_string(batches + 1));
      }
      backward(loss);
      opt.step(lr);
      loss_sum += value;
      ++batches;
    });

    EpochLog e;
    e.epoch = epoch + 1;
    e.lr = lr;
    e.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1));
    e.val_loss = evaluate_loss(model, val, cfg.batch_size, cfg.loss_alpha, cfg.max_val_windows);
    if (!std::isfinite(e.val_loss)) throw NumericError("non-finite validation loss at epoch " + std::to_string(e.epoch));
    const StopDecision d = early_stop_update(es, e.val_loss, e.epoch);
    if (d.improved) {
      best.clear();
      for (const auto& p : model.params().items()) best.push_back(p.var.value());
    }
    e.stopped = d.stop;
    result.epochs.push_back(e);
    if (log) {
      write_epoch_line(*log, e);
      log->flush();
    }
    if (d.stop) break;
  }

  auto& items = model.params().items();
  for (std::size_t i = 0; i < best.size(); ++i) items[i].var.mutable_value() = best[i];
  model.params().zero_grad();
  result.best_epoch = es.best_epoch;
  result.best_val = es.best_val;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace frwkv::training
