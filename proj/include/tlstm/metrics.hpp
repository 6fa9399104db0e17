#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tlstm/telemetry.hpp"
#include "tlstm/tensor.hpp"

namespace tlstm {

/// Regression error summary in SOC units (MSE in %^2, RMSE and MAE in %).
/// `r2` is empty when the truth vector is constant.
struct MetricsReport {
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  std::optional<double> r2;
  std::size_t n = 0;
  std::string split;
};

inline MetricsReport compute_metrics(const Vector& pred, const Vector& truth, std::string split = "test") {
  if (pred.size() != truth.size()) throw Error(Errc::LengthMismatch, "prediction and truth lengths differ");
  if (pred.size() == 0) throw Error(Errc::LengthMismatch, "metrics need at least one sample");
  const double n = static_cast<double>(pred.size());
  const Vector err = pred - truth;
  MetricsReport r;
  r.n = static_cast<std::size_t>(pred.size());
  r.split = std::move(split);
  r.mse = err.squaredNorm() / n;
  r.rmse = std::sqrt(r.mse);
  r.mae = err.cwiseAbs().sum() / n;
  const double mean = truth.mean();
  const double ss_tot = (truth.array() - mean).square().sum();
  if (ss_tot > 0.0) r.r2 = 1.0 - err.squaredNorm() / ss_tot;
  return r;
}

inline nlohmann::ordered_json to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["split"] = r.split;
  j["n"] = r.n;
  j["mse"] = r.mse;
  j["rmse"] = r.rmse;
  j["mae"] = r.mae;
  if (r.r2)
    j["r2"] = *r.r2;
  else
    j["r2"] = nullptr;
  return j;
}

struct ComparisonReport {
  MetricsReport baseline;
  MetricsReport tucker;
  double delta_mse_pct = 0.0;  // (1 - tucker/baseline) * 100
  double delta_mae_pct = 0.0;
};

inline double relative_reduction_pct(double baseline, double candidate) {
  return baseline != 0.0 ? (1.0 - candidate / baseline) * 100.0 : 0.0;
}

inline ComparisonReport comparison_report(const MetricsReport& baseline, const MetricsReport& tucker) {
  if (baseline.n != tucker.n || baseline.split != tucker.split)
    throw Error(Errc::InvalidArgument, "comparison requires reports on the same split");
  return {baseline, tucker, relative_reduction_pct(baseline.mse, tucker.mse),
          relative_reduction_pct(baseline.mae, tucker.mae)};
}

/// Aligned text table with the columns Model, MSE, RMSE(%), MAE(%), R2.
inline std::string to_text(const ComparisonReport& c) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  auto row = [&](const std::string& name, const MetricsReport& m) {
    os << std::left << std::setw(14) << name << std::right << std::setw(10) << m.mse << std::setw(10) << m.rmse
       << std::setw(10) << m.mae << std::setw(10);
    if (m.r2)
      os << *m.r2;
    else
      os << "undefined";
    os << '\n';
  };
  os << std::left << std::setw(14) << "Model" << std::right << std::setw(10) << "MSE" << std::setw(10) << "RMSE(%)"
     << std::setw(10) << "MAE(%)" << std::setw(10) << "R2" << '\n';
  row("LSTM", c.baseline);
  row("Tucker-LSTM", c.tucker);
  os << std::setprecision(1) << "MSE reduction: " << c.delta_mse_pct << "%\n"
     << "MAE reduction: " << c.delta_mae_pct << "%\n"
     << "split: " << c.baseline.split << ", n = " << c.baseline.n << '\n';
  return os.str();
}

inline nlohmann::ordered_json to_json(const ComparisonReport& c) {
  nlohmann::ordered_json j;
  j["columns"] = {"Model", "MSE", "RMSE(%)", "MAE(%)", "R2"};
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& [name, m] : {std::pair<std::string, const MetricsReport*>{"LSTM", &c.baseline},
                                {"Tucker-LSTM", &c.tucker}}) {
    nlohmann::ordered_json r = to_json(*m);
    r["model"] = name;
    j["rows"].push_back(r);
  }
  j["delta_mse_pct"] = c.delta_mse_pct;
  j["delta_mae_pct"] = c.delta_mae_pct;
  return j;
}

struct Histogram {
  std::vector<double> edges;  // bins + 1, increasing
  std::vector<std::size_t> counts;
};

/// Equal-width histogram over [lo, hi]. Bins are right-open except the last,
/// which also includes hi. A degenerate range is widened to [lo - 0.5, lo + 0.5].
inline Histogram histogram(const std::vector<double>& values, std::size_t bins, double lo, double hi) {
  if (bins == 0) throw Error(Errc::InvalidArgument, "histogram needs at least one bin");
  if (!(hi > lo)) {
    lo -= 0.5;
    hi = lo + 1.0;
  }
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  h.edges.back() = hi;
  h.counts.assign(bins, 0);
  for (const double v : values) {
    if (v < lo || v > hi) continue;
    auto it = std::upper_bound(h.edges.begin(), h.edges.end(), v);
    std::size_t b = static_cast<std::size_t>(it - h.edges.begin());
    b = b == 0 ? 0 : b - 1;
    if (b >= bins) b = bins - 1;
    ++h.counts[b];
  }
  return h;
}

inline Histogram residual_histogram(const Vector& pred, const Vector& truth, std::size_t bins = 50) {
  std::vector<double> r(static_cast<std::size_t>(pred.size()));
  for (Eigen::Index i = 0; i < pred.size(); ++i) r[static_cast<std::size_t>(i)] = pred(i) - truth(i);
  if (r.empty()) return histogram(r, bins, 0.0, 0.0);
  const auto [mn, mx] = std::minmax_element(r.begin(), r.end());
  return histogram(r, bins, *mn, *mx);
}

struct ResidualArtifactPaths {
  std::filesystem::path timeseries;
  std::filesystem::path histogram;
  std::filesystem::path scatter;
};

/// Writes the data behind the three diagnostic panels: time series
/// (t,truth,pred), residual histogram (bin_lo,bin_hi,count) over 50 bins, and
/// scatter (truth,pred). Residual = pred - truth.
inline ResidualArtifactPaths residual_artifacts(const Vector& pred, const Vector& truth,
                                                const std::vector<std::int64_t>& timestamps,
                                                const std::filesystem::path& dir, const std::string& prefix) {
  if (pred.size() != truth.size() || static_cast<std::size_t>(pred.size()) != timestamps.size())
    throw Error(Errc::LengthMismatch, "residual artifacts need aligned vectors");
  ResidualArtifactPaths p{dir / (prefix + "timeseries.csv"), dir / (prefix + "residual_hist.csv"),
                          dir / (prefix + "scatter.csv")};
  auto open = [](const std::filesystem::path& f) {
    std::ofstream o(f, std::ios::binary);
    if (!o) throw Error(Errc::IoError, "cannot write " + f.string());
    return o;
  };
  {
    auto o = open(p.timeseries);
    o << "t,truth,pred\n";
    for (Eigen::Index i = 0; i < pred.size(); ++i)
      o << timestamps[static_cast<std::size_t>(i)] << ',' << format_double(truth(i)) << ',' << format_double(pred(i)) << '\n';
  }
  {
    const Histogram h = residual_histogram(pred, truth, 50);
    auto o = open(p.histogram);
    o << "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < h.counts.size(); ++b)
      o << format_double(h.edges[b]) << ',' << format_double(h.edges[b + 1]) << ',' << h.counts[b] << '\n';
  }
  {
    auto o = open(p.scatter);
    o << "truth,pred\n";
    for (Eigen::Index i = 0; i < pred.size(); ++i) o << format_double(truth(i)) << ',' << format_double(pred(i)) << '\n';
  }
  return p;
}

}  // namespace tlstm
