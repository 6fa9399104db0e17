#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "tlstm/optim.hpp"
#include "tlstm/windowing.hpp"

namespace tlstm {

struct TrainConfig {
  double lr0 = 0.01;
  std::size_t batch_size = 128;
  double plateau_factor = 0.5;
  int plateau_patience = 5;
  double plateau_threshold = 1e-4;
  int early_stop_patience = 15;
  int max_epochs = 500;
  std::uint64_t seed = 7;
  double min_lr = 1e-6;
  double clip_norm = 5.0;
};

enum class StopReason { EarlyStop, MaxEpochs };

inline std::string to_string(StopReason r) { return r == StopReason::EarlyStop ? "early-stop" : "max-epochs"; }

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;  // rate used during this epoch
  int clipped_batches = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  StopReason stop_reason = StopReason::MaxEpochs;
  double wall_time_s = 0.0;
};

struct TrainResult {
  LstmModel best;
  TrainReport report;
};

/// Copies the listed samples into a contiguous batch tensor.
inline Tensor3 gather_samples(const Tensor3& x, const std::vector<std::size_t>& idx, std::size_t first,
                              std::size_t count) {
  const std::size_t stride = x.window() * x.features();
  std::vector<double> data(count * stride);
  for (std::size_t k = 0; k < count; ++k) {
    const auto src = x.data().subspan(idx[first + k] * stride, stride);
    std::copy(src.begin(), src.end(), data.begin() + static_cast<std::ptrdiff_t>(k * stride));
  }
  return Tensor3(count, x.window(), x.features(), std::move(data));
}

/// Eval-mode predictions in fixed-order chunks.
inline Vector predict(const LstmModel& m, const Tensor3& x, std::size_t chunk = 512) {
  Vector out(static_cast<Eigen::Index>(x.samples()));
  for (std::size_t first = 0; first < x.samples(); first += chunk) {
    const std::size_t n = std::min(chunk, x.samples() - first);
    out.segment(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(n)) =
        forward(x.slice_samples(first, n), m, Mode::Eval).predictions;
  }
  return out;
}

inline double eval_mse(const LstmModel& m, const WindowedDataset& ds) {
  const Vector pred = predict(m, ds.x);
  return (pred - ds.y).squaredNorm() / static_cast<double>(ds.size());
}

/// Epoch shuffle: Fisher-Yates driven by Rng(mix_seed(seed, epoch, 1)).
inline std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(epoch), 1));
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

/// Dropout stream for batch `batch` of `epoch`.
inline std::uint64_t dropout_seed(std::uint64_t seed, int epoch, std::size_t batch) {
  return mix_seed(seed ^ 0xD50F5EEDULL, static_cast<std::uint64_t>(epoch), batch);
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch Adam on MSE with plateau LR decay and early stopping on the
/// validation loss. Returns the best-validation checkpoint.
inline TrainResult train(LstmModel model, const SplitDataset& data, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  if (data.train.size() == 0 || data.val.size() == 0) throw Error(Errc::EmptySplit, "train and val splits must be nonempty");
  if (cfg.batch_size == 0) throw Error(Errc::InvalidArgument, "batch_size must be positive");
  if (cfg.max_epochs <= 0) throw Error(Errc::InvalidArgument, "max_epochs must be positive");
  const auto t0 = std::chrono::steady_clock::now();

  PlateauScheduler sched(cfg.lr0, cfg.plateau_factor, cfg.plateau_patience, cfg.min_lr, cfg.plateau_threshold);
  EarlyStopping stopper(cfg.early_stop_patience);
  AdamState adam = AdamState::for_params(model.params);
  TrainResult res{model, {}};
  res.report.stop_reason = StopReason::MaxEpochs;

  const std::size_t n = data.train.size();
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = sched.lr();
    const auto order = epoch_permutation(n, cfg.seed, epoch);
    double sse_weighted = 0.0;
    std::size_t batch_idx = 0;
    for (std::size_t first = 0; first < n; first += cfg.batch_size, ++batch_idx) {
      const std::size_t count = std::min(cfg.batch_size, n - first);
      const Tensor3 xb = gather_samples(data.train.x, order, first, count);
      Vector yb(static_cast<Eigen::Index>(count));
      for (std::size_t k = 0; k < count; ++k) yb(static_cast<Eigen::Index>(k)) = data.train.y(static_cast<Eigen::Index>(order[first + k]));

      ForwardResult fr = forward(xb, model, Mode::Train, dropout_seed(cfg.seed, epoch, batch_idx));
      const LossResult loss = mse_loss(fr.predictions, yb);
      if (!std::isfinite(loss.loss))
        throw Error(Errc::Diverged, "non-finite training loss at epoch " + std::to_string(epoch));
      LstmParams grads = backward(fr.tape, model, loss.grad);
      if (clip_global_norm(grads, cfg.clip_norm)) ++rec.clipped_batches;
      adam_step(model.params, grads, adam, rec.lr);
      sse_weighted += loss.loss * static_cast<double>(count);
    }
    rec.train_loss = sse_weighted / static_cast<double>(n);
    rec.val_loss = eval_mse(model, data.val);
    if (!std::isfinite(rec.val_loss))
      throw Error(Errc::Diverged, "non-finite validation loss at epoch " + std::to_string(epoch));

    res.report.epochs.push_back(rec);
    if (stopper.update(rec.val_loss)) res.best = model;
    sched.step(rec.val_loss);
    if (on_epoch) on_epoch(rec);
    if (stopper.should_stop()) {
      res.report.stop_reason = StopReason::EarlyStop;
      break;
    }
  }
  res.report.best_epoch = stopper.best_epoch();
  res.report.best_val_loss = stopper.best();
  res.report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace tlstm
