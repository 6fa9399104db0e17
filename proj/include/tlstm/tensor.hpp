#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tlstm/error.hpp"

namespace tlstm {

/// Dense three-way tensor laid out as samples x window x features, row-major
/// (feature index fastest). Every entry must be finite.
template <typename Scalar>
class BasicTensor3 {
 public:
  using value_type = Scalar;

  BasicTensor3() = default;

  BasicTensor3(std::size_t samples, std::size_t window, std::size_t features)
      : dims_{samples, window, features}, data_(samples * window * features, Scalar(0)) {
    check_dims();
  }

  BasicTensor3(std::size_t samples, std::size_t window, std::size_t features,
               std::vector<Scalar> data)
      : dims_{samples, window, features}, data_(std::move(data)) {
    check_dims();
    if (data_.size() != samples * window * features)
      throw Error(Errc::DimMismatch, "tensor data length does not match dims");
    for (const Scalar v : data_)
      if (!std::isfinite(v)) throw Error(Errc::InvalidArgument, "tensor entry is not finite");
  }

  std::size_t samples() const noexcept { return dims_[0]; }
  std::size_t window() const noexcept { return dims_[1]; }
  std::size_t features() const noexcept { return dims_[2]; }
  const std::array<std::size_t, 3>& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t offset(std::size_t s, std::size_t w, std::size_t f) const noexcept {
    return (s * dims_[1] + w) * dims_[2] + f;
  }
  Scalar& operator()(std::size_t s, std::size_t w, std::size_t f) { return data_[offset(s, w, f)]; }
  Scalar operator()(std::size_t s, std::size_t w, std::size_t f) const {
    return data_[offset(s, w, f)];
  }

  std::span<const Scalar> data() const noexcept { return data_; }
  std::span<Scalar> data() noexcept { return data_; }

  /// Contiguous block of whole samples [first, first + count).
  BasicTensor3 slice_samples(std::size_t first, std::size_t count) const {
    if (first + count > samples()) throw Error(Errc::DimMismatch, "sample slice out of range");
    const std::size_t stride = dims_[1] * dims_[2];
    std::vector<Scalar> out(data_.begin() + static_cast<std::ptrdiff_t>(first * stride),
                            data_.begin() + static_cast<std::ptrdiff_t>((first + count) * stride));
    BasicTensor3 t;
    t.dims_ = {count, dims_[1], dims_[2]};
    t.data_ = std::move(out);
    return t;
  }

  friend bool operator==(const BasicTensor3&, const BasicTensor3&) = default;

 private:
  void check_dims() const {
    if (dims_[1] == 0 || dims_[2] == 0)
      throw Error(Errc::InvalidArgument, "tensor window and feature dims must be positive");
  }

  std::array<std::size_t, 3> dims_{0, 0, 0};
  std::vector<Scalar> data_;
};

using Tensor3 = BasicTensor3<double>;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1>;

/// Mode-3 (feature) matricization: an F x (S*W) matrix whose column
/// j = s*W + w holds the feature fiber t(s, w, :).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> unfold_feature_mode(
    const BasicTensor3<Scalar>& t) {
  const auto cols = static_cast<Eigen::Index>(t.samples() * t.window());
  return Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>(
      t.data().data(), static_cast<Eigen::Index>(t.features()), cols);
}

/// Inverse of unfold_feature_mode for the given sample/window extents.
template <typename Derived>
BasicTensor3<typename Derived::Scalar> refold_feature_mode(const Eigen::MatrixBase<Derived>& m,
                                                           std::size_t samples,
                                                           std::size_t window) {
  using Scalar = typename Derived::Scalar;
  if (static_cast<std::size_t>(m.cols()) != samples * window)
    throw Error(Errc::DimMismatch, "unfolded column count does not match samples*window");
  const auto features = static_cast<std::size_t>(m.rows());
  std::vector<Scalar> data(samples * window * features);
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>(
      data.data(), m.rows(), m.cols()) = m;
  return BasicTensor3<Scalar>(samples, window, features, std::move(data));
}

/// Uncentered Gram matrix M * M^T. The result is exactly symmetric.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> gram_covariance(
    const Eigen::MatrixBase<Derived>& m) {
  using Mat = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (m.cols() < 1) throw Error(Errc::InvalidArgument, "gram_covariance needs at least one column");
  Mat c = Mat::Zero(m.rows(), m.rows());
  c.template selfadjointView<Eigen::Lower>().rankUpdate(m.derived());
  c.template triangularView<Eigen::StrictlyUpper>() = c.transpose();
  return c;
}

}  // namespace tlstm
