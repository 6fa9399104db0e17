#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "tlstm/projection.hpp"
#include "tlstm/telemetry.hpp"

namespace tlstm {

inline constexpr std::size_t kFeatureCount = 14;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "charge_status", "speed",    "sum_mileage",    "sum_voltage", "sum_current",
    "max_cell_volt", "min_cell_volt", "max_temp",  "min_temp",    "cell_volt_diff",
    "temp_diff",     "delta_t",  "hour_sin",       "hour_cos"};

/// T x 14 model inputs with the SOC target series alongside. SOC is never an input.
struct FeatureFrame {
  Matrix features;  // T x 14
  Vector targets;   // SOC percent, length T
  std::vector<std::int64_t> timestamps;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(features.rows()); }

  FeatureFrame head(std::size_t n) const {
    const auto nn = static_cast<Eigen::Index>(n);
    return {features.topRows(nn), targets.head(nn),
            std::vector<std::int64_t>(timestamps.begin(), timestamps.begin() + nn)};
  }
};

inline FeatureFrame engineer_features(const std::vector<TelemetryRecord>& records) {
  const std::size_t n = records.size();
  if (n < 2) throw Error(Errc::TooFewRecords, "feature engineering needs at least 2 records");

  std::vector<double> gaps(n - 1);
  for (std::size_t i = 1; i < n; ++i)
    gaps[i - 1] = static_cast<double>(records[i].time - records[i - 1].time);

  FeatureFrame fr{Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kFeatureCount)),
                  Vector(static_cast<Eigen::Index>(n)), std::vector<std::int64_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[i];
    const auto row = static_cast<Eigen::Index>(i);
    // Fractional hour of day (UTC) mapped onto the unit circle.
    const std::int64_t sod = ((r.time % 86400) + 86400) % 86400;
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(sod) / 86400.0;
    const std::array<double, kFeatureCount> v = {
        static_cast<double>(r.charge_status), r.speed, r.sum_mileage, r.sum_voltage,
        r.sum_current, r.max_cell_volt, r.min_cell_volt, r.max_temp, r.min_temp,
        r.cell_volt_diff, r.max_temp - r.min_temp, gaps[i == 0 ? 0 : i - 1],
        std::sin(angle), std::cos(angle)};
    for (std::size_t c = 0; c < kFeatureCount; ++c) fr.features(row, static_cast<Eigen::Index>(c)) = v[c];
    fr.targets(row) = r.soc;
    fr.timestamps[i] = r.time;
  }
  return fr;
}

inline FeatureStats fit_feature_stats(const Matrix& x) {
  if (x.rows() == 0) throw Error(Errc::InvalidArgument, "cannot fit standardization on zero rows");
  FeatureStats s{x.colwise().mean().transpose(), Vector(x.cols())};
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    if ((x.col(c).array() == x(0, c)).all()) {
      s.means(c) = x(0, c);
      s.scales(c) = 1.0;
      continue;
    }
    const double var = (x.col(c).array() - s.means(c)).square().mean();
    const double sd = std::sqrt(var);
    s.scales(c) = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

inline Matrix apply_feature_stats(const Matrix& x, const FeatureStats& s) {
  if (x.cols() != s.means.size()) throw Error(Errc::DimMismatch, "stats width does not match features");
  return (x.rowwise() - s.means.transpose()).array().rowwise() / s.scales.transpose().array();
}

/// z-scores every feature. Without `stats` the frame is treated as the
/// fitting (training) set; with `stats` they are applied unchanged.
inline std::pair<FeatureFrame, FeatureStats> standardize(const FeatureFrame& frame,
                                                         const std::optional<FeatureStats>& stats = std::nullopt) {
  FeatureStats s = stats ? *stats : fit_feature_stats(frame.features);
  FeatureFrame out{apply_feature_stats(frame.features, s), frame.targets, frame.timestamps};
  return {std::move(out), std::move(s)};
}

}  // namespace tlstm
