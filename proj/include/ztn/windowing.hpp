#pragma once

// Min-max scaling and sliding-window datasets for one-step-ahead forecasting.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ztn/errors.hpp"

namespace ztn {

class MinMaxScaler {
 public:
  MinMaxScaler(double min, double max) : min_(min), max_(max) {
    if (!std::isfinite(min_) || !std::isfinite(max_) || !(max_ > min_))
      throw DataError("degenerate scaler: max must exceed min");
  }

  static MinMaxScaler fit(std::span<const double> series) {
    if (series.empty()) throw DataError("cannot fit a scaler on an empty series");
    const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
    if (!(*hi > *lo)) throw DataError("degenerate scaler: series is constant");
    return MinMaxScaler(*lo, *hi);
  }

  double min() const noexcept { return min_; }
  double max() const noexcept { return max_; }

  double transform(double x) const { return (x - min_) / (max_ - min_); }
  double inverse(double x) const { return x * (max_ - min_) + min_; }

  std::vector<double> transform(std::span<const double> xs) const {
    std::vector<double> out(xs.size());
    std::transform(xs.begin(), xs.end(), out.begin(), [this](double x) { return transform(x); });
    return out;
  }
  std::vector<double> inverse(std::span<const double> xs) const {
    std::vector<double> out(xs.size());
    std::transform(xs.begin(), xs.end(), out.begin(), [this](double x) { return inverse(x); });
    return out;
  }

 private:
  double min_, max_;
};

/// Window i holds series[i .. i+w) and targets series[i+w]. Inputs are stored
/// contiguously, row-major.
class WindowedDataset {
 public:
  WindowedDataset(std::size_t window, std::vector<double> inputs, std::vector<double> targets)
      : window_(window), inputs_(std::move(inputs)), targets_(std::move(targets)) {
    if (window_ == 0 || inputs_.size() != window_ * targets_.size()) throw DataError("malformed windowed dataset");
  }

  std::size_t window_size() const noexcept { return window_; }
  std::size_t size() const noexcept { return targets_.size(); }
  bool empty() const noexcept { return targets_.empty(); }

  std::span<const double> input(std::size_t i) const { return {inputs_.data() + i * window_, window_}; }
  double target(std::size_t i) const { return targets_[i]; }
  const std::vector<double>& targets() const noexcept { return targets_; }

  /// Windows [first, first + count).
  WindowedDataset slice(std::size_t first, std::size_t count) const {
    if (first + count > size()) throw DataError("dataset slice out of range");
    return WindowedDataset(window_,
                           std::vector<double>(inputs_.begin() + static_cast<std::ptrdiff_t>(first * window_),
                                               inputs_.begin() + static_cast<std::ptrdiff_t>((first + count) * window_)),
                           std::vector<double>(targets_.begin() + static_cast<std::ptrdiff_t>(first),
                                               targets_.begin() + static_cast<std::ptrdiff_t>(first + count)));
  }

 private:
  std::size_t window_;
  std::vector<double> inputs_;
  std::vector<double> targets_;
};

inline WindowedDataset make_windows(std::span<const double> series, std::size_t window) {
  if (window == 0) throw DataError("window size must be >= 1");
  if (series.size() <= window)
    throw DataError("insufficient data: series of length " + std::to_string(series.size()) +
                    " needs more than " + std::to_string(window) + " samples");
  const std::size_t count = series.size() - window;
  std::vector<double> inputs;
  inputs.reserve(count * window);
  std::vector<double> targets;
  targets.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    inputs.insert(inputs.end(), series.begin() + static_cast<std::ptrdiff_t>(i),
                  series.begin() + static_cast<std::ptrdiff_t>(i + window));
    targets.push_back(series[i + window]);
  }
  return WindowedDataset(window, std::move(inputs), std::move(targets));
}

}  // namespace ztn
