#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "wavesynth/error.hpp"

namespace wavesynth {

/// Uniformly sampled real-valued series. Length and spacing are fixed at
/// construction; values are always finite.
class TimeSeries {
 public:
  TimeSeries(std::vector<double> values, double dt, double t0 = 0.0)
      : values_(std::move(values)), dt_(dt), t0_(t0) {
    detail::require(values_.size() >= 2, ErrorKind::Size, "time series needs at least 2 samples");
    detail::require(std::isfinite(dt_) && dt_ > 0.0, ErrorKind::Parameter, "time step must be positive");
    detail::require(std::isfinite(t0_), ErrorKind::Parameter, "start time must be finite");
    for (double v : values_) {
      detail::require(std::isfinite(v), ErrorKind::Data, "time series contains non-finite values");
    }
  }

  std::size_t size() const noexcept { return values_.size(); }
  double dt() const noexcept { return dt_; }
  double t0() const noexcept { return t0_; }
  double time(std::size_t i) const noexcept { return t0_ + static_cast<double>(i) * dt_; }

  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

 private:
  std::vector<double> values_;
  double dt_;
  double t0_;
};

}  // namespace wavesynth
