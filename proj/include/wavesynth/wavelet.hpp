#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "wavesynth/error.hpp"
#include "wavesynth/time_series.hpp"

namespace wavesynth {

/// Original coefficient range before the affine map to [0, 1].
struct NormParams {
  double lo = 0.0;
  double hi = 1.0;
  friend bool operator==(const NormParams&, const NormParams&) = default;
};

struct WaveletConfig {
  double omega0 = 5.0;
  std::vector<double> scales{2, 4, 8, 16, 32, 64, 128, 256};
  double kernel_truncation = 8.0;  // half-support, in units of scale
  double ridge = 1e-6;

  void validate() const {
    detail::require(std::isfinite(omega0) && omega0 > 0.0, ErrorKind::Parameter, "omega0 must be positive");
    detail::require(!scales.empty(), ErrorKind::Parameter, "scale list is empty");
    for (std::size_t i = 0; i < scales.size(); ++i) {
      detail::require(std::isfinite(scales[i]) && scales[i] > 0.0, ErrorKind::Parameter, "scales must be positive");
      if (i > 0) {
        detail::require(scales[i] > scales[i - 1], ErrorKind::Parameter, "scales must be strictly increasing");
      }
    }
    detail::require(std::isfinite(kernel_truncation) && kernel_truncation > 0.0, ErrorKind::Parameter,
                    "kernel truncation must be positive");
    detail::require(std::isfinite(ridge) && ridge >= 0.0, ErrorKind::Parameter, "ridge must be nonnegative");
  }

  friend bool operator==(const WaveletConfig&, const WaveletConfig&) = default;
};

/// Scales x time grid of signed (or, with `norm`, min-max normalized) wavelet
/// coefficients.
struct Scalogram {
  Eigen::MatrixXd coeffs;  // row i = scales[i], column j = time index
  std::vector<double> scales;
  std::optional<NormParams> norm;

  Eigen::Index height() const noexcept { return coeffs.rows(); }
  Eigen::Index width() const noexcept { return coeffs.cols(); }

  void validate() const {
    detail::require(static_cast<std::size_t>(coeffs.rows()) == scales.size(), ErrorKind::Shape,
                    "scalogram row count must equal the number of scales");
    for (std::size_t i = 1; i < scales.size(); ++i) {
      detail::require(scales[i] > scales[i - 1], ErrorKind::Parameter, "scales must be strictly increasing");
    }
    detail::require(coeffs.allFinite(), ErrorKind::Data, "scalogram contains non-finite values");
    if (norm) {
      detail::require(norm->hi > norm->lo, ErrorKind::Parameter, "norm range must satisfy hi > lo");
      detail::require(coeffs.size() == 0 || (coeffs.minCoeff() >= 0.0 && coeffs.maxCoeff() <= 1.0),
                      ErrorKind::Data, "normalized coefficients must lie in [0, 1]");
    }
  }
};

/// Half-width of the sampled kernel at `scale`.
inline std::ptrdiff_t kernel_half_width(double scale, const WaveletConfig& cfg) {
  return static_cast<std::ptrdiff_t>(std::ceil(cfg.kernel_truncation * scale));
}

/// psi_s(t) = s^{-1/2} exp(-(t/s)^2 / 2) cos(omega0 t / s) sampled at integer
/// t in [-h, h]. Index h is t = 0.
inline std::vector<double> morlet_kernel(double scale, const WaveletConfig& cfg) {
  detail::require(std::isfinite(scale) && scale > 0.0, ErrorKind::Parameter, "scale must be positive");
  const std::ptrdiff_t half = kernel_half_width(scale, cfg);
  const double amp = 1.0 / std::sqrt(scale);
  std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
  for (std::ptrdiff_t k = 0; k <= half; ++k) {
    const double u = static_cast<double>(k) / scale;
    const double v = amp * std::exp(-0.5 * u * u) * std::cos(cfg.omega0 * u);
    // mirror so that symmetry is exact
    kernel[static_cast<std::size_t>(half + k)] = v;
    kernel[static_cast<std::size_t>(half - k)] = v;
  }
  return kernel;
}

/// coeffs(i, j) = sum_k x[k] psi_{s_i}(k - j), zero-padded outside the series.
inline Scalogram cwt(std::span<const double> x, const WaveletConfig& cfg) {
  cfg.validate();
  for (double v : x) detail::require(std::isfinite(v), ErrorKind::Data, "cwt input contains non-finite values");
  const auto length = static_cast<std::ptrdiff_t>(x.size());

  Scalogram sc;
  sc.scales = cfg.scales;
  sc.coeffs.resize(static_cast<Eigen::Index>(cfg.scales.size()), length);
  for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
    const auto kernel = morlet_kernel(cfg.scales[i], cfg);
    const std::ptrdiff_t half = kernel_half_width(cfg.scales[i], cfg);
    for (std::ptrdiff_t j = 0; j < length; ++j) {
      const std::ptrdiff_t k0 = std::max<std::ptrdiff_t>(0, j - half);
      const std::ptrdiff_t k1 = std::min<std::ptrdiff_t>(length - 1, j + half);
      double acc = 0.0;
      for (std::ptrdiff_t k = k0; k <= k1; ++k) acc += x[static_cast<std::size_t>(k)] * kernel[static_cast<std::size_t>(k - j + half)];
      sc.coeffs(static_cast<Eigen::Index>(i), j) = acc;
    }
  }
  return sc;
}

inline Scalogram cwt(const TimeSeries& series, const WaveletConfig& cfg) { return cwt(series.values(), cfg); }

/// Global min-max map of the whole grid onto [0, 1].
inline Scalogram normalize(const Scalogram& sc) {
  detail::require(!sc.norm.has_value(), ErrorKind::State, "scalogram is already normalized");
  detail::require(sc.coeffs.size() > 0, ErrorKind::Size, "empty scalogram");
  const double lo = sc.coeffs.minCoeff();
  const double hi = sc.coeffs.maxCoeff();
  detail::require(hi > lo, ErrorKind::DegenerateRange, "scalogram is constant");
  Scalogram out;
  out.scales = sc.scales;
  out.norm = NormParams{lo, hi};
  out.coeffs = ((sc.coeffs.array() - lo) / (hi - lo)).matrix();
  // guard against 1-ulp excursions of the affine map
  out.coeffs = out.coeffs.cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

inline Scalogram denormalize(const Scalogram& sc) {
  detail::require(sc.norm.has_value(), ErrorKind::State, "scalogram carries no normalization parameters");
  Scalogram out;
  out.scales = sc.scales;
  out.coeffs = (sc.coeffs.array() * (sc.norm->hi - sc.norm->lo) + sc.norm->lo).matrix();
  return out;
}

/// The dense linear operator A behind cwt for one (config, length) pair,
/// together with a Cholesky factorization of A^T A + ridge I.
///
/// Rows of A are ordered scale-major: row i * L + j is coefficient (i, j).
class InverseOperator {
 public:
  InverseOperator(const WaveletConfig& cfg, std::size_t length) : cfg_(cfg), length_(length) {
    cfg_.validate();
    detail::require(length >= 2, ErrorKind::Size, "operator length must be at least 2");
    const auto len = static_cast<std::ptrdiff_t>(length);
    const auto num_scales = static_cast<Eigen::Index>(cfg_.scales.size());
    op_.setZero(num_scales * len, len);
    for (Eigen::Index i = 0; i < num_scales; ++i) {
      const auto kernel = morlet_kernel(cfg_.scales[static_cast<std::size_t>(i)], cfg_);
      const std::ptrdiff_t half = kernel_half_width(cfg_.scales[static_cast<std::size_t>(i)], cfg_);
      for (std::ptrdiff_t j = 0; j < len; ++j) {
        const std::ptrdiff_t k0 = std::max<std::ptrdiff_t>(0, j - half);
        const std::ptrdiff_t k1 = std::min<std::ptrdiff_t>(len - 1, j + half);
        for (std::ptrdiff_t k = k0; k <= k1; ++k) op_(i * len + j, k) = kernel[static_cast<std::size_t>(k - j + half)];
      }
    }
    Eigen::MatrixXd gram = op_.transpose() * op_;
    gram.diagonal().array() += cfg_.ridge;
    llt_.compute(gram);
    detail::require(llt_.info() == Eigen::Success, ErrorKind::Numeric,
                    "normal equations are not positive definite; increase ridge");
  }

  const Eigen::MatrixXd& matrix() const noexcept { return op_; }
  std::size_t length() const noexcept { return length_; }
  const WaveletConfig& config() const noexcept { return cfg_; }

  /// argmin_x ||A x - vec(coeffs)||^2 + ridge ||x||^2
  Eigen::VectorXd solve(const Eigen::MatrixXd& coeffs) const {
    detail::require(coeffs.rows() == static_cast<Eigen::Index>(cfg_.scales.size()) &&
                        coeffs.cols() == static_cast<Eigen::Index>(length_),
                    ErrorKind::Shape, "scalogram does not match operator dimensions");
    // scale-major flattening
    const Eigen::MatrixXd row_major = coeffs.transpose();
    const Eigen::Map<const Eigen::VectorXd> rhs(row_major.data(), row_major.size());
    Eigen::VectorXd x = llt_.solve(op_.transpose() * rhs);
    detail::require(x.allFinite(), ErrorKind::Numeric, "inverse transform produced non-finite values");
    return x;
  }

 private:
  WaveletConfig cfg_;
  std::size_t length_;
  Eigen::MatrixXd op_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// Process-wide cache of inverse operators; entries are immutable once built.
inline std::shared_ptr<const InverseOperator> inverse_operator(const WaveletConfig& cfg, std::size_t length) {
  using Key = std::tuple<double, std::vector<double>, double, double, std::size_t>;
  static std::mutex mutex;
  static std::map<Key, std::shared_ptr<const InverseOperator>> cache;
  Key key{cfg.omega0, cfg.scales, cfg.kernel_truncation, cfg.ridge, length};
  std::lock_guard lock(mutex);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, std::make_shared<const InverseOperator>(cfg, length)).first;
  return it->second;
}

/// Ridge-regularized least-squares inverse of cwt.
inline TimeSeries icwt(const Scalogram& sc, std::size_t target_length, const WaveletConfig& cfg, double dt = 1.0) {
  detail::require(!sc.norm.has_value(), ErrorKind::State, "icwt expects signed (denormalized) coefficients");
  detail::require(sc.coeffs.rows() == static_cast<Eigen::Index>(cfg.scales.size()), ErrorKind::Shape,
                  "scalogram rows do not match the configured scales");
  detail::require(sc.coeffs.cols() == static_cast<Eigen::Index>(target_length), ErrorKind::Shape,
                  "scalogram width does not match target length");
  const auto op = inverse_operator(cfg, target_length);
  const Eigen::VectorXd x = op->solve(sc.coeffs);
  return TimeSeries(std::vector<double>(x.data(), x.data() + x.size()), dt);
}

}  // namespace wavesynth
