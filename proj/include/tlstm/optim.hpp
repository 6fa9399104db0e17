#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "tlstm/lstm.hpp"

namespace tlstm {

struct LossResult {
  double loss = 0.0;
  Vector grad;
};

/// Mean squared error and its gradient 2 (pred - target) / B.
inline LossResult mse_loss(const Vector& pred, const Vector& target) {
  if (pred.size() != target.size()) throw Error(Errc::LengthMismatch, "prediction and target lengths differ");
  if (pred.size() == 0) throw Error(Errc::LengthMismatch, "mse_loss needs at least one sample");
  const Vector diff = pred - target;
  const double n = static_cast<double>(pred.size());
  return {diff.squaredNorm() / n, 2.0 * diff / n};
}

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment accumulators mirroring the model parameters.
struct AdamState {
  LstmParams m;
  LstmParams v;
  std::uint64_t t = 0;
  AdamConfig cfg;

  static AdamState for_params(const LstmParams& p, AdamConfig cfg = {}) {
    return {p.zeros_like(), p.zeros_like(), 0, cfg};
  }
};

/// Bias-corrected Adam update of one flat block at step `t` (t >= 1).
inline void adam_update(Eigen::Ref<Vector> theta, const Eigen::Ref<const Vector>& g, Eigen::Ref<Vector> m,
                        Eigen::Ref<Vector> v, std::uint64_t t, double lr, const AdamConfig& cfg) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
  theta.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
}

namespace detail {

inline std::vector<Eigen::Map<Vector>> blocks(LstmParams& p) {
  std::vector<Eigen::Map<Vector>> out;
  p.for_each_block([&](Eigen::Map<Vector> b) { out.push_back(b); });
  return out;
}

inline std::vector<Eigen::Map<const Vector>> blocks(const LstmParams& p) {
  std::vector<Eigen::Map<const Vector>> out;
  p.for_each_block([&](Eigen::Map<const Vector> b) { out.push_back(b); });
  return out;
}

}  // namespace detail

inline void adam_step(LstmParams& params, const LstmParams& grads, AdamState& state, double lr) {
  auto p = detail::blocks(params);
  const auto g = detail::blocks(grads);
  auto m = detail::blocks(state.m);
  auto v = detail::blocks(state.v);
  if (p.size() != g.size() || p.size() != m.size()) throw Error(Errc::DimMismatch, "adam block count mismatch");
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i].size() != g[i].size() || p[i].size() != m[i].size())
      throw Error(Errc::DimMismatch, "adam block shape mismatch");
  ++state.t;
  for (std::size_t i = 0; i < p.size(); ++i) adam_update(p[i], g[i], m[i], v[i], state.t, lr, state.cfg);
}

inline double global_norm(const LstmParams& g) {
  double s = 0.0;
  g.for_each_block([&](const auto& b) { s += b.squaredNorm(); });
  return std::sqrt(s);
}

/// Rescales `g` to `max_norm` if its global L2 norm exceeds it. Returns true when clipped.
inline bool clip_global_norm(LstmParams& g, double max_norm) {
  const double n = global_norm(g);
  if (!(max_norm > 0.0) || n <= max_norm) return false;
  const double scale = max_norm / n;
  g.for_each_block([&](auto b) { b *= scale; });
  return true;
}

/// Halves (by `factor`) the learning rate once the monitored loss has gone
/// `patience` consecutive epochs without beating the best value by more than
/// the relative threshold. The counter resets on improvement and after each cut.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr0, double factor = 0.5, int patience = 5, double min_lr = 1e-6,
                   double rel_threshold = 1e-4)
      : lr_(lr0), factor_(factor), patience_(patience), min_lr_(min_lr), threshold_(rel_threshold) {
    if (!(factor > 0.0 && factor < 1.0)) throw Error(Errc::InvalidArgument, "plateau factor must be in (0, 1)");
    if (patience <= 0) throw Error(Errc::InvalidArgument, "plateau patience must be positive");
  }

  /// Records one epoch's loss and returns the learning rate for the next epoch.
  double step(double loss) {
    if (loss < best_ * (1.0 - threshold_)) {
      best_ = loss;
      bad_epochs_ = 0;
    } else if (++bad_epochs_ >= patience_) {
      lr_ = std::max(lr_ * factor_, min_lr_);
      bad_epochs_ = 0;
    }
    return lr_;
  }

  double lr() const noexcept { return lr_; }
  int bad_epochs() const noexcept { return bad_epochs_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double min_lr_;
  double threshold_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

/// Tracks the best (strictly lowest) validation loss; signals a stop once
/// `patience` epochs pass without a new best.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {
    if (patience < 0) throw Error(Errc::InvalidArgument, "early-stop patience must be non-negative");
  }

  /// Returns true when this epoch's loss is a new best.
  bool update(double loss) {
    ++epoch_;
    if (loss < best_) {
      best_ = loss;
      best_epoch_ = epoch_;
      return true;
    }
    return false;
  }

  bool should_stop() const noexcept { return epoch_ - best_epoch_ >= patience_; }
  double best() const noexcept { return best_; }
  int best_epoch() const noexcept { return best_epoch_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

}  // namespace tlstm
