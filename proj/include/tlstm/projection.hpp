#pragma once

#include <cstddef>
#include <optional>

#include "tlstm/sym_eig.hpp"
#include "tlstm/tensor.hpp"

namespace tlstm {

/// Per-feature z-score statistics (population std; constant features keep scale 1).
struct FeatureStats {
  Vector means;
  Vector scales;
};

/// Feature-mode truncated eigenbasis fit on standardized training data.
struct ProjectionModel {
  Matrix u_reduced;             // F x k, orthonormal columns
  Vector retained_eigenvalues;  // k largest Gram eigenvalues, non-increasing
  Vector all_eigenvalues;       // all F eigenvalues, non-increasing
  Vector feature_means;         // F
  Vector feature_scales;        // F
  std::size_t k = 0;

  std::size_t input_features() const noexcept { return static_cast<std::size_t>(u_reduced.rows()); }

  /// Share of the Gram trace captured by the retained eigenvectors.
  double retained_variance_fraction() const {
    const double total = all_eigenvalues.sum();
    return total > 0.0 ? retained_eigenvalues.sum() / total : 1.0;
  }
};

/// Flips each column so its largest-magnitude entry is positive. The first
/// index wins when magnitudes tie.
inline void canonicalize_signs(Matrix& u) {
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      if (std::abs(u(i, j)) > best) {
        best = std::abs(u(i, j));
        arg = i;
      }
    }
    if (u(arg, j) < 0.0) u.col(j) = -u.col(j);
  }
}

/// Fits the leading-k feature eigenbasis of the (already standardized)
/// training tensor. `stats` only travel with the model for persistence; the
/// tensor itself is not re-standardized here.
inline ProjectionModel fit_projection(const Tensor3& train, std::size_t k,
                                      const std::optional<FeatureStats>& stats = std::nullopt) {
  const std::size_t f = train.features();
  if (k == 0) throw Error(Errc::InvalidArgument, "n_components must be positive");
  if (k > f) throw Error(Errc::RankTooLarge, "n_components exceeds the feature count");
  if (train.samples() == 0) throw Error(Errc::InvalidArgument, "cannot fit a projection on an empty tensor");

  const Matrix gram = gram_covariance(unfold_feature_mode(train));
  SymEig eig = sym_eig(gram);

  ProjectionModel p;
  const auto kk = static_cast<Eigen::Index>(k);
  p.k = k;
  p.u_reduced = eig.eigenvectors.leftCols(kk);
  canonicalize_signs(p.u_reduced);
  p.retained_eigenvalues = eig.eigenvalues.head(kk);
  p.all_eigenvalues = eig.eigenvalues;
  if (stats) {
    if (static_cast<std::size_t>(stats->means.size()) != f ||
        static_cast<std::size_t>(stats->scales.size()) != f)
      throw Error(Errc::DimMismatch, "standardization stats do not match the feature count");
    p.feature_means = stats->means;
    p.feature_scales = stats->scales;
  } else {
    p.feature_means = Vector::Zero(static_cast<Eigen::Index>(f));
    p.feature_scales = Vector::Ones(static_cast<Eigen::Index>(f));
  }
  return p;
}

/// X_2d * U_reduced, refolded to (S, W, k).
inline Tensor3 project(const Tensor3& t, const ProjectionModel& p) {
  if (t.features() != p.input_features())
    throw Error(Errc::DimMismatch, "tensor feature dim does not match the projection");
  if (t.samples() == 0) return Tensor3(0, t.window(), p.k);
  const Matrix reduced = p.u_reduced.transpose() * unfold_feature_mode(t);
  return refold_feature_mode(reduced, t.samples(), t.window());
}

}  // namespace tlstm
