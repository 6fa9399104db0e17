#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tlstm/features.hpp"
#include "tlstm/tensor.hpp"

namespace tlstm {

/// samples x window x features inputs and one SOC target per sample.
/// `target_times[i]` is the timestamp of the target row and
/// `input_end_times[i]` the timestamp of the last input row.
struct WindowedDataset {
  Tensor3 x;
  Vector y;
  std::vector<std::int64_t> target_times;
  std::vector<std::int64_t> input_end_times;

  std::size_t size() const noexcept { return x.samples(); }

  WindowedDataset slice(std::size_t first, std::size_t count) const {
    const auto f = static_cast<std::ptrdiff_t>(first);
    const auto c = static_cast<std::ptrdiff_t>(count);
    return {x.slice_samples(first, count), y.segment(f, c),
            {target_times.begin() + f, target_times.begin() + f + c},
            {input_end_times.begin() + f, input_end_times.begin() + f + c}};
  }
};

struct WindowSpec {
  std::size_t window_size = 10;
  std::size_t stride = 1;
  std::size_t horizon = 1;
};

inline std::size_t window_count(std::size_t rows, const WindowSpec& spec) {
  if (rows < spec.window_size + spec.horizon) return 0;
  return (rows - spec.window_size - spec.horizon) / spec.stride + 1;
}

/// Sample i covers rows [i*stride, i*stride + window_size); its target is the
/// SOC at row i*stride + window_size + horizon - 1.
inline WindowedDataset window(const FeatureFrame& frame, const WindowSpec& spec = {}) {
  if (spec.window_size == 0 || spec.stride == 0 || spec.horizon == 0)
    throw Error(Errc::InvalidArgument, "window_size, stride and horizon must be positive");
  const std::size_t n = window_count(frame.rows(), spec);
  if (n == 0) throw Error(Errc::SeriesTooShort, "series shorter than window_size + horizon");

  const std::size_t f = static_cast<std::size_t>(frame.features.cols());
  WindowedDataset ds{Tensor3(n, spec.window_size, f), Vector(static_cast<Eigen::Index>(n)),
                     std::vector<std::int64_t>(n), std::vector<std::int64_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t start = i * spec.stride;
    for (std::size_t w = 0; w < spec.window_size; ++w)
      for (std::size_t c = 0; c < f; ++c)
        ds.x(i, w, c) = frame.features(static_cast<Eigen::Index>(start + w), static_cast<Eigen::Index>(c));
    const std::size_t target_row = start + spec.window_size + spec.horizon - 1;
    ds.y(static_cast<Eigen::Index>(i)) = frame.targets(static_cast<Eigen::Index>(target_row));
    ds.target_times[i] = frame.timestamps[target_row];
    ds.input_end_times[i] = frame.timestamps[start + spec.window_size - 1];
  }
  return ds;
}

struct SplitFractions {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// Floor the train count, floor the val count, test takes the remainder.
inline SplitCounts split_counts(std::size_t n, const SplitFractions& fr = {}) {
  if (fr.train < 0 || fr.val < 0 || fr.test < 0 || std::abs(fr.train + fr.val + fr.test - 1.0) > 1e-9)
    throw Error(Errc::InvalidArgument, "split fractions must be non-negative and sum to 1");
  // The small epsilon keeps exact products such as 0.7 * 100 from flooring to 69.
  SplitCounts c;
  c.train = static_cast<std::size_t>(std::floor(fr.train * static_cast<double>(n) + 1e-9));
  c.val = static_cast<std::size_t>(std::floor(fr.val * static_cast<double>(n) + 1e-9));
  c.test = n - c.train - c.val;
  if (c.train == 0 || c.val == 0 || c.test == 0)
    throw Error(Errc::EmptySplit, "a split fraction yields zero windows for n = " + std::to_string(n));
  return c;
}

struct SplitDataset {
  WindowedDataset train;
  WindowedDataset val;
  WindowedDataset test;
  SplitCounts counts;
};

/// Contiguous chronological split on window indices.
inline SplitDataset chrono_split(const WindowedDataset& ds, const SplitFractions& fr = {}) {
  if (ds.size() == 0) throw Error(Errc::EmptySplit, "cannot split an empty dataset");
  const SplitCounts c = split_counts(ds.size(), fr);
  return {ds.slice(0, c.train), ds.slice(c.train, c.val), ds.slice(c.train + c.val, c.test), c};
}

}  // namespace tlstm
