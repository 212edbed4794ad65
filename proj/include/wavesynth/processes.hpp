#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wavesynth/error.hpp"
#include "wavesynth/random.hpp"
#include "wavesynth/time_series.hpp"

namespace wavesynth {

enum class ProcessKind { WienerProcess, BrownianBridge, DriftedBrownianMotion };

inline std::string_view to_string(ProcessKind kind) {
  switch (kind) {
    case ProcessKind::WienerProcess: return "WienerProcess";
    case ProcessKind::BrownianBridge: return "BrownianBridge";
    case ProcessKind::DriftedBrownianMotion: return "DriftedBrownianMotion";
  }
  return "unknown";
}

/// Accepts the canonical names plus the short forms `wiener`, `bridge`,
/// `drifted`.
inline std::optional<ProcessKind> parse_process_kind(std::string_view name) {
  if (name == "WienerProcess" || name == "wiener") return ProcessKind::WienerProcess;
  if (name == "BrownianBridge" || name == "bridge") return ProcessKind::BrownianBridge;
  if (name == "DriftedBrownianMotion" || name == "drifted") return ProcessKind::DriftedBrownianMotion;
  return std::nullopt;
}

struct ProcessSpec {
  ProcessKind kind = ProcessKind::WienerProcess;
  double drift = 2.0;       // mu, DriftedBrownianMotion only
  double volatility = 1.0;  // sigma
  double terminal = 0.0;    // BrownianBridge only
  double horizon = 1.0;     // T

  void validate() const {
    detail::require(std::isfinite(volatility) && volatility > 0.0, ErrorKind::Parameter,
                    "volatility must be positive");
    detail::require(std::isfinite(horizon) && horizon > 0.0, ErrorKind::Parameter, "horizon must be positive");
    detail::require(std::isfinite(drift), ErrorKind::Parameter, "drift must be finite");
    detail::require(std::isfinite(terminal), ErrorKind::Parameter, "bridge terminal must be finite");
  }

  static ProcessSpec defaults(ProcessKind kind) {
    ProcessSpec spec;
    spec.kind = kind;
    return spec;
  }

  /// e.g. `WienerProcess(mu=2,sigma=1,terminal=0,T=1)`
  std::string label() const {
    std::ostringstream os;
    os << to_string(kind) << "(mu=" << drift << ",sigma=" << volatility << ",terminal=" << terminal
       << ",T=" << horizon << ")";
    return os.str();
  }
};

/// Equal-length, equal-spacing collection of simulated paths.
struct Dataset {
  std::vector<TimeSeries> series;
  std::string label;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return series.size(); }
  std::size_t length() const noexcept { return series.empty() ? 0 : series.front().size(); }
  double dt() const noexcept { return series.empty() ? 0.0 : series.front().dt(); }

  void validate() const {
    for (const auto& s : series) {
      detail::require(s.size() == length() && s.dt() == dt(), ErrorKind::Shape,
                      "dataset members must share length and time step");
    }
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// One path on t_i = i * T / (L - 1), i = 0..L-1.
///
/// All three processes are driven by the same Gaussian increment stream for
/// a given seed, so e.g. a drifted path minus its zero-drift twin is the
/// deterministic drift line.
inline TimeSeries simulate(const ProcessSpec& spec, std::size_t length, std::uint64_t seed) {
  spec.validate();
  detail::require(length >= 2, ErrorKind::Size, "path length must be at least 2");

  const std::size_t last = length - 1;
  const double dt = spec.horizon / static_cast<double>(last);
  const double step_sd = spec.volatility * std::sqrt(dt);

  std::vector<double> w(length, 0.0);
  GaussianStream gauss(seed);
  for (std::size_t i = 1; i < length; ++i) w[i] = w[i - 1] + step_sd * gauss();

  switch (spec.kind) {
    case ProcessKind::WienerProcess:
      break;
    case ProcessKind::DriftedBrownianMotion:
      for (std::size_t i = 0; i < length; ++i) w[i] += spec.drift * (static_cast<double>(i) * dt);
      break;
    case ProcessKind::BrownianBridge: {
      const double gap = w[last] - spec.terminal;
      for (std::size_t i = 1; i < last; ++i) {
        w[i] -= (static_cast<double>(i) / static_cast<double>(last)) * gap;
      }
      // endpoints are pinned exactly rather than left to rounding
      w[0] = 0.0;
      w[last] = spec.terminal;
      break;
    }
  }
  return TimeSeries(std::move(w), dt);
}

/// Path i uses seed derive_seed(seed, i).
inline Dataset simulate_dataset(const ProcessSpec& spec, std::size_t count, std::size_t length,
                                std::uint64_t seed) {
  detail::require(count >= 1, ErrorKind::Size, "dataset needs at least one path");
  Dataset ds;
  ds.label = spec.label();
  ds.seed = seed;
  ds.series.reserve(count);
  for (std::size_t i = 0; i < count; ++i) ds.series.push_back(simulate(spec, length, derive_seed(seed, i)));
  return ds;
}

}  // namespace wavesynth
