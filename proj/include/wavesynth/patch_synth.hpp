#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wavesynth/error.hpp"
#include "wavesynth/random.hpp"
#include "wavesynth/wavelet.hpp"

namespace wavesynth {

using Grid = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SynthConfig {
  int patch_size = 7;
  int stride = 1;
  double pyramid_ratio = 0.75;
  int min_width = 24;
  int num_projections = 8;
  int steps_per_level = 60;
  double noise_sigma = 0.75;
  double retarget_factor = 1.0;

  void validate() const {
    detail::require(patch_size >= 2, ErrorKind::Parameter, "patch size must be at least 2");
    detail::require(stride >= 1, ErrorKind::Parameter, "stride must be positive");
    detail::require(min_width >= 1, ErrorKind::Parameter, "min width must be positive");
    detail::require(patch_size <= min_width, ErrorKind::Parameter, "patch size must not exceed min width");
    detail::require(pyramid_ratio > 0.0 && pyramid_ratio < 1.0, ErrorKind::Parameter,
                    "pyramid ratio must lie in (0, 1)");
    detail::require(num_projections >= 1, ErrorKind::Parameter, "need at least one projection");
    detail::require(steps_per_level >= 0, ErrorKind::Parameter, "steps per level must be nonnegative");
    detail::require(std::isfinite(noise_sigma) && noise_sigma >= 0.0, ErrorKind::Parameter,
                    "noise sigma must be nonnegative");
    detail::require(std::isfinite(retarget_factor) && retarget_factor > 0.0, ErrorKind::Parameter,
                    "retarget factor must be positive");
  }

  /// Canonical `key=value` list, comma separated, used in file headers.
  std::string canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "patch_size=" << patch_size << ",stride=" << stride << ",pyramid_ratio=" << pyramid_ratio
       << ",min_width=" << min_width << ",num_projections=" << num_projections
       << ",steps_per_level=" << steps_per_level << ",noise_sigma=" << noise_sigma
       << ",retarget_factor=" << retarget_factor;
    return os.str();
  }

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

// ---------------------------------------------------------------------------
// Time-axis resampling

namespace detail {

// Weighted mean written as base + sum w (v - base) / sum w so that constant
// inputs come back bit-exact.
inline double stable_weighted_mean(const double* values, const double* weights, std::size_t n) {
  const double base = values[0];
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += weights[i] * (values[i] - base);
    den += weights[i];
  }
  return base + num / den;
}

}  // namespace detail

/// Resize along columns only. Shrinking uses area averaging (box filter over
/// each output pixel's footprint); growing uses linear interpolation on
/// pixel centers with edge clamping.
inline Grid resize_time(const Grid& grid, Eigen::Index new_width) {
  detail::require(new_width >= 1, ErrorKind::Size, "target width must be positive");
  const Eigen::Index width = grid.cols();
  detail::require(width >= 1, ErrorKind::Size, "cannot resize an empty grid");
  if (new_width == width) return grid;

  Grid out(grid.rows(), new_width);
  const double scale = static_cast<double>(width) / static_cast<double>(new_width);

  if (new_width < width) {
    std::vector<double> weights;
    std::vector<double> values;
    for (Eigen::Index j = 0; j < new_width; ++j) {
      const double begin = static_cast<double>(j) * scale;
      const double end = static_cast<double>(j + 1) * scale;
      const auto k0 = static_cast<Eigen::Index>(std::floor(begin));
      const auto k1 = std::min<Eigen::Index>(width - 1, static_cast<Eigen::Index>(std::ceil(end)) - 1);
      weights.clear();
      for (Eigen::Index k = k0; k <= k1; ++k) {
        const double overlap = std::min(end, static_cast<double>(k + 1)) - std::max(begin, static_cast<double>(k));
        weights.push_back(std::max(overlap, 0.0));
      }
      values.resize(weights.size());
      for (Eigen::Index r = 0; r < grid.rows(); ++r) {
        for (Eigen::Index k = k0; k <= k1; ++k) values[static_cast<std::size_t>(k - k0)] = grid(r, k);
        out(r, j) = detail::stable_weighted_mean(values.data(), weights.data(), weights.size());
      }
    }
    return out;
  }

  for (Eigen::Index j = 0; j < new_width; ++j) {
    double src = (static_cast<double>(j) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(width - 1));
    const auto left = static_cast<Eigen::Index>(std::floor(src));
    const Eigen::Index right = std::min<Eigen::Index>(left + 1, width - 1);
    const double frac = src - static_cast<double>(left);
    for (Eigen::Index r = 0; r < grid.rows(); ++r) {
      const double a = grid(r, left);
      out(r, j) = a + frac * (grid(r, right) - a);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pyramid

struct Pyramid {
  std::vector<Grid> levels;  // coarsest first
  std::vector<Eigen::Index> widths;

  std::size_t size() const noexcept { return levels.size(); }
};

/// Level widths round(W * ratio^(K-1-k)), k = 0..K-1, keeping every width
/// that is at least min_width. Duplicate widths (ratio near 1, tiny W) are
/// dropped.
inline std::vector<Eigen::Index> pyramid_widths(Eigen::Index width, const SynthConfig& cfg) {
  detail::require(width >= cfg.min_width, ErrorKind::Size, "grid width is below the pyramid minimum width");
  std::vector<Eigen::Index> widths;
  for (int k = 0;; ++k) {
    const auto w = static_cast<Eigen::Index>(std::lround(static_cast<double>(width) * std::pow(cfg.pyramid_ratio, k)));
    if (w < cfg.min_width) break;
    if (widths.empty() || w < widths.back()) widths.push_back(w);
  }
  std::reverse(widths.begin(), widths.end());
  return widths;
}

/// Each level is resampled directly from the full-resolution grid; the scale
/// axis is never decimated.
inline Pyramid build_pyramid(const Grid& target, const SynthConfig& cfg) {
  cfg.validate();
  Pyramid pyr;
  pyr.widths = pyramid_widths(target.cols(), cfg);
  pyr.levels.reserve(pyr.widths.size());
  for (auto w : pyr.widths) pyr.levels.push_back(resize_time(target, w));
  return pyr;
}

// ---------------------------------------------------------------------------
// Patches

/// Flattened overlapping patches plus the geometry needed to fold them back.
/// Patch height adapts to short grids: patch_h = min(p, grid_height).
struct PatchSet {
  RowMatrix patches;  // num_patches x (patch_h * patch_w), each row row-major
  Eigen::Index grid_height = 0;
  Eigen::Index grid_width = 0;
  Eigen::Index patch_h = 0;
  Eigen::Index patch_w = 0;
  Eigen::Index stride = 1;

  Eigen::Index count() const noexcept { return patches.rows(); }
  Eigen::Index dim() const noexcept { return patches.cols(); }
  Eigen::Index rows_of_offsets() const noexcept { return (grid_height - patch_h) / stride + 1; }
  Eigen::Index cols_of_offsets() const noexcept { return (grid_width - patch_w) / stride + 1; }
};

inline PatchSet extract_patches(const Grid& grid, int p, int stride) {
  detail::require(p >= 1 && stride >= 1, ErrorKind::Parameter, "patch size and stride must be positive");
  PatchSet ps;
  ps.grid_height = grid.rows();
  ps.grid_width = grid.cols();
  ps.patch_h = std::min<Eigen::Index>(p, grid.rows());
  ps.patch_w = p;
  ps.stride = stride;
  detail::require(ps.patch_h >= 1 && ps.patch_w <= ps.grid_width, ErrorKind::Size, "patch larger than grid");

  const Eigen::Index oy = ps.rows_of_offsets();
  const Eigen::Index ox = ps.cols_of_offsets();
  ps.patches.resize(oy * ox, ps.patch_h * ps.patch_w);
  Eigen::Index n = 0;
  for (Eigen::Index by = 0; by < oy; ++by) {
    for (Eigen::Index bx = 0; bx < ox; ++bx, ++n) {
      const Eigen::Index y0 = by * stride;
      const Eigen::Index x0 = bx * stride;
      for (Eigen::Index dy = 0; dy < ps.patch_h; ++dy) {
        for (Eigen::Index dx = 0; dx < ps.patch_w; ++dx) ps.patches(n, dy * ps.patch_w + dx) = grid(y0 + dy, x0 + dx);
      }
    }
  }
  return ps;
}

/// Each pixel becomes the mean of every patch entry covering it. The mean is
/// taken relative to the first covering entry, so identical copies fold back
/// bit-exact.
inline Grid fold_patches(const PatchSet& ps) {
  detail::require(ps.count() == ps.rows_of_offsets() * ps.cols_of_offsets() && ps.dim() == ps.patch_h * ps.patch_w,
                  ErrorKind::Shape, "patch set geometry is inconsistent");
  const Eigen::Index oy = ps.rows_of_offsets();
  const Eigen::Index ox = ps.cols_of_offsets();

  Grid base(ps.grid_height, ps.grid_width);
  Grid delta = Grid::Zero(ps.grid_height, ps.grid_width);
  Eigen::MatrixXi hits = Eigen::MatrixXi::Zero(ps.grid_height, ps.grid_width);

  Eigen::Index n = 0;
  for (Eigen::Index by = 0; by < oy; ++by) {
    for (Eigen::Index bx = 0; bx < ox; ++bx, ++n) {
      const Eigen::Index y0 = by * ps.stride;
      const Eigen::Index x0 = bx * ps.stride;
      for (Eigen::Index dy = 0; dy < ps.patch_h; ++dy) {
        for (Eigen::Index dx = 0; dx < ps.patch_w; ++dx) {
          const double v = ps.patches(n, dy * ps.patch_w + dx);
          const Eigen::Index y = y0 + dy;
          const Eigen::Index x = x0 + dx;
          if (hits(y, x)++ == 0) {
            base(y, x) = v;
          } else {
            delta(y, x) += v - base(y, x);
          }
        }
      }
    }
  }
  detail::require((hits.array() > 0).all(), ErrorKind::Coverage, "patch geometry leaves pixels uncovered");
  return (base.array() + delta.array() / hits.cast<double>().array()).matrix();
}

// ---------------------------------------------------------------------------
// Sliced optimal transport

/// dim x count matrix of unit directions (normalized Gaussian draws).
inline Eigen::MatrixXd random_directions(Eigen::Index dim, int count, std::uint64_t seed) {
  detail::require(dim >= 1 && count >= 1, ErrorKind::Parameter, "directions need positive dimension and count");
  GaussianStream gauss(seed);
  Eigen::MatrixXd dirs(dim, count);
  for (int c = 0; c < count; ++c) {
    double norm2 = 0.0;
    do {
      for (Eigen::Index d = 0; d < dim; ++d) dirs(d, c) = gauss();
      norm2 = dirs.col(c).squaredNorm();
    } while (norm2 == 0.0);
    dirs.col(c) /= std::sqrt(norm2);
  }
  return dirs;
}

namespace detail {

// Index into a sorted sample of size n for quantile rank r of total ranks.
inline Eigen::Index quantile_index(Eigen::Index r, Eigen::Index total, Eigen::Index n) {
  if (total == n) return r;
  // (r + 1/2) / total, scaled to n samples
  return std::min<Eigen::Index>(n - 1, ((2 * r + 1) * n) / (2 * total));
}

inline void check_pair(const PatchSet& a, const PatchSet& b) {
  require(a.count() > 0 && b.count() > 0, ErrorKind::Data, "patch sets must be nonempty");
  require(a.dim() == b.dim(), ErrorKind::Shape, "patch sets have different dimensions");
}

}  // namespace detail

/// n x P matrix of patch projections. Each entry is summed in the same
/// order no matter where its row sits, so equal patches project equally.
inline RowMatrix project(const RowMatrix& patches, const Eigen::MatrixXd& directions) {
  const RowMatrix dirs = directions;  // dim x P, row-major
  const Eigen::Index n = patches.rows();
  const Eigen::Index dim = patches.cols();
  const Eigen::Index count = dirs.cols();
  RowMatrix out = RowMatrix::Zero(n, count);
  for (Eigen::Index i = 0; i < n; ++i) {
    double* o = out.row(i).data();
    const double* p = patches.row(i).data();
    for (Eigen::Index d = 0; d < dim; ++d) {
      const double v = p[d];
      const double* u = dirs.row(d).data();
      for (Eigen::Index c = 0; c < count; ++c) o[c] += v * u[c];
    }
  }
  return out;
}

/// Mean over projections of the squared 1D 2-Wasserstein distance between
/// the projected patch multisets. Unequal counts are aligned on
/// max(|a|, |b|) equispaced quantiles. `directions` is dim x P, unit columns.
inline double swd(const PatchSet& a, const PatchSet& b, const Eigen::MatrixXd& directions) {
  detail::check_pair(a, b);
  detail::require(directions.rows() == a.dim() && directions.cols() >= 1, ErrorKind::Shape,
                  "directions do not match the patch dimension");
  const RowMatrix pa = project(a.patches, directions);
  const RowMatrix pb = project(b.patches, directions);
  const Eigen::Index total = std::max(a.count(), b.count());
  std::vector<double> qa(static_cast<std::size_t>(a.count()));
  std::vector<double> qb(static_cast<std::size_t>(b.count()));
  double sum = 0.0;
  for (Eigen::Index c = 0; c < directions.cols(); ++c) {
    for (Eigen::Index i = 0; i < a.count(); ++i) qa[static_cast<std::size_t>(i)] = pa(i, c);
    for (Eigen::Index i = 0; i < b.count(); ++i) qb[static_cast<std::size_t>(i)] = pb(i, c);
    std::sort(qa.begin(), qa.end());
    std::sort(qb.begin(), qb.end());
    double acc = 0.0;
    for (Eigen::Index r = 0; r < total; ++r) {
      const double d = qa[static_cast<std::size_t>(detail::quantile_index(r, total, a.count()))] -
                       qb[static_cast<std::size_t>(detail::quantile_index(r, total, b.count()))];
      acc += d * d;
    }
    sum += acc / static_cast<double>(total);
  }
  return sum / static_cast<double>(directions.cols());
}

inline double swd(const PatchSet& a, const PatchSet& b, int num_projections, std::uint64_t seed) {
  detail::check_pair(a, b);
  return swd(a, b, random_directions(a.dim(), num_projections, seed));
}

/// One sliced-OT step: along every direction, each synth patch moves by the
/// gap between the target quantile at its rank and its own projection; the
/// per-direction moves are averaged.
inline PatchSet ot_patch_update(PatchSet synth, const PatchSet& target, const Eigen::MatrixXd& directions) {
  detail::check_pair(synth, target);
  detail::require(directions.rows() == synth.dim() && directions.cols() >= 1, ErrorKind::Shape,
                  "directions do not match the patch dimension");
  const Eigen::Index count = directions.cols();
  const Eigen::Index n = synth.count();
  const RowMatrix ps = project(synth.patches, directions);
  const RowMatrix pt = project(target.patches, directions);

  Eigen::MatrixXd displacement(n, count);
  std::vector<double> sorted_target(static_cast<std::size_t>(target.count()));
  std::vector<std::pair<double, Eigen::Index>> order(static_cast<std::size_t>(n));
  for (Eigen::Index c = 0; c < count; ++c) {
    for (Eigen::Index i = 0; i < target.count(); ++i) sorted_target[static_cast<std::size_t>(i)] = pt(i, c);
    std::sort(sorted_target.begin(), sorted_target.end());
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = {ps(i, c), i};
    std::sort(order.begin(), order.end());
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto [value, i] = order[static_cast<std::size_t>(r)];
      displacement(i, c) = sorted_target[static_cast<std::size_t>(detail::quantile_index(r, n, target.count()))] - value;
    }
  }

  displacement /= static_cast<double>(count);
  synth.patches.noalias() += displacement * directions.transpose();
  return synth;
}

inline PatchSet ot_patch_update(PatchSet synth, const PatchSet& target, int num_projections, std::uint64_t seed) {
  detail::check_pair(synth, target);
  const auto dim = synth.dim();
  return ot_patch_update(std::move(synth), target, random_directions(dim, num_projections, seed));
}

// ---------------------------------------------------------------------------
// Coarse-to-fine synthesis

/// Output width ladder: every pyramid width scaled by the retarget factor.
inline std::vector<Eigen::Index> output_widths(const std::vector<Eigen::Index>& widths, double factor) {
  std::vector<Eigen::Index> out;
  out.reserve(widths.size());
  for (auto w : widths) out.push_back(std::max<Eigen::Index>(1, std::lround(static_cast<double>(w) * factor)));
  return out;
}

/// Seeds used inside synthesize(): noise is child 0 of `seed`, projections
/// of level l / step t are derive_seed(derive_seed(seed, l + 1), t).
inline std::uint64_t projection_seed(std::uint64_t seed, std::size_t level, int step) {
  return derive_seed(seed, level + 1, static_cast<std::uint64_t>(step));
}

/// Reshuffles (retarget_factor = 1) or retargets a normalized scalogram.
inline Scalogram synthesize(const Scalogram& target, const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  detail::require(target.norm.has_value(), ErrorKind::State, "synthesis expects a normalized scalogram");
  detail::require(target.coeffs.allFinite(), ErrorKind::Data, "target contains non-finite values");

  const Pyramid pyr = build_pyramid(target.coeffs, cfg);
  const auto out_widths = output_widths(pyr.widths, cfg.retarget_factor);
  detail::require(out_widths.front() >= cfg.patch_size, ErrorKind::Size,
                  "coarsest output width is smaller than the patch size");

  Grid synth = resize_time(pyr.levels.front(), out_widths.front());
  if (cfg.noise_sigma > 0.0) {
    GaussianStream gauss(derive_seed(seed, 0));
    for (Eigen::Index j = 0; j < synth.cols(); ++j) {
      for (Eigen::Index i = 0; i < synth.rows(); ++i) synth(i, j) += cfg.noise_sigma * gauss();
    }
  }

  for (std::size_t level = 0; level < pyr.size(); ++level) {
    if (level > 0) synth = resize_time(synth, out_widths[level]);
    if (cfg.steps_per_level > 0) {
      const PatchSet target_patches = extract_patches(pyr.levels[level], cfg.patch_size, cfg.stride);
      for (int step = 0; step < cfg.steps_per_level; ++step) {
        PatchSet current = ot_patch_update(extract_patches(synth, cfg.patch_size, cfg.stride), target_patches, cfg.num_projections, projection_seed(seed, level, step));
        synth = fold_patches(current).cwiseMax(0.0).cwiseMin(1.0);
      }
    }
    synth = synth.cwiseMax(0.0).cwiseMin(1.0);
  }

  Scalogram out;
  out.coeffs = std::move(synth);
  out.scales = target.scales;
  out.norm = target.norm;
  return out;
}

}  // namespace wavesynth
