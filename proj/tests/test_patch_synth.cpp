#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "wavesynth/patch_synth.hpp"
#include "wavesynth/processes.hpp"
#include "wavesynth/wavelet.hpp"

namespace wavesynth {
namespace {

Grid random_grid(Eigen::Index rows, Eigen::Index cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return Grid::NullaryExpr(rows, cols, [&] { return u(rng); });
}

PatchSet patch_set(const std::vector<std::vector<double>>& rows) {
  PatchSet ps;
  ps.patches.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      ps.patches(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  ps.patch_h = 1;
  ps.patch_w = ps.patches.cols();
  ps.grid_height = 1;
  ps.grid_width = ps.patches.cols();
  return ps;
}

PatchSet random_patches(Eigen::Index n, Eigen::Index dim, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(dim)));
  for (auto& r : rows)
    for (auto& v : r) v = g(rng);
  return patch_set(rows);
}

// Sorted projections sampled at (r + 1/2) / total quantiles, squared gaps
// averaged, then averaged over directions.
double swd_oracle(const PatchSet& a, const PatchSet& b, const Eigen::MatrixXd& dirs) {
  const auto na = static_cast<std::size_t>(a.count());
  const auto nb = static_cast<std::size_t>(b.count());
  const std::size_t total = std::max(na, nb);
  double sum = 0.0;
  for (Eigen::Index c = 0; c < dirs.cols(); ++c) {
    std::vector<double> pa, pb;
    for (std::size_t i = 0; i < na; ++i) {
      double s = 0.0;
      for (Eigen::Index d = 0; d < a.dim(); ++d) s += a.patches(static_cast<Eigen::Index>(i), d) * dirs(d, c);
      pa.push_back(s);
    }
    for (std::size_t i = 0; i < nb; ++i) {
      double s = 0.0;
      for (Eigen::Index d = 0; d < b.dim(); ++d) s += b.patches(static_cast<Eigen::Index>(i), d) * dirs(d, c);
      pb.push_back(s);
    }
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    double acc = 0.0;
    for (std::size_t r = 0; r < total; ++r) {
      const double q = (static_cast<double>(r) + 0.5) / static_cast<double>(total);
      const auto ia = std::min(na - 1, static_cast<std::size_t>(q * static_cast<double>(na)));
      const auto ib = std::min(nb - 1, static_cast<std::size_t>(q * static_cast<double>(nb)));
      acc += (pa[ia] - pb[ib]) * (pa[ia] - pb[ib]);
    }
    sum += acc / static_cast<double>(total);
  }
  return sum / static_cast<double>(dirs.cols());
}

// Reference time-axis resize: box filter when shrinking, linear
// interpolation of pixel centers when growing.
Grid resize_oracle(const Grid& g, Eigen::Index w) {
  const Eigen::Index n = g.cols();
  if (w == n) return g;
  Grid out(g.rows(), w);
  const double s = static_cast<double>(n) / static_cast<double>(w);
  for (Eigen::Index j = 0; j < w; ++j) {
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      if (w < n) {
        double num = 0.0, den = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double ov = std::min(s * static_cast<double>(j + 1), static_cast<double>(k + 1)) -
                            std::max(s * static_cast<double>(j), static_cast<double>(k));
          if (ov > 0.0) num += ov * g(r, k), den += ov;
        }
        out(r, j) = num / den;
      } else {
        const double x = std::clamp((static_cast<double>(j) + 0.5) * s - 0.5, 0.0, static_cast<double>(n - 1));
        const auto k = static_cast<Eigen::Index>(x);
        const Eigen::Index k1 = std::min(k + 1, n - 1);
        out(r, j) = (1.0 - (x - static_cast<double>(k))) * g(r, k) + (x - static_cast<double>(k)) * g(r, k1);
      }
    }
  }
  return out;
}

Scalogram normalized_target(Eigen::Index rows, Eigen::Index cols, unsigned seed) {
  Scalogram sc;
  sc.coeffs = random_grid(rows, cols, seed);
  for (Eigen::Index r = 0; r < rows; ++r) sc.scales.push_back(std::pow(2.0, static_cast<double>(r + 1)));
  sc.norm = NormParams{-1.0, 1.0};
  return sc;
}

// ---------------------------------------------------------------------------

TEST(ResizeTime, MatchesOracle) {
  const Grid g = random_grid(8, 256, 1);
  for (Eigen::Index w : {24, 26, 100, 192, 255, 256, 257, 300, 512}) {
    EXPECT_LE((resize_time(g, w) - resize_oracle(g, w)).cwiseAbs().maxCoeff(), 1e-12) << "width " << w;
  }
}

TEST(ResizeTime, ConstantsSurviveRoundTrip) {
  const Grid g = Grid::Constant(8, 256, 0.3);
  EXPECT_EQ(resize_time(resize_time(g, 61), 256), g);
  EXPECT_EQ(resize_time(resize_time(g, 512), 256), g);
}

TEST(Pyramid, WidthsForDefaultLadder) {
  std::vector<Eigen::Index> oracle;
  for (int k = 0;; ++k) {
    const auto w = static_cast<Eigen::Index>(std::lround(256.0 * std::pow(0.75, k)));
    if (w < 24) break;
    oracle.insert(oracle.begin(), w);
  }
  const std::vector<Eigen::Index> frozen{26, 34, 46, 61, 81, 108, 144, 192, 256};
  EXPECT_EQ(oracle, frozen);
  SynthConfig cfg;
  cfg.min_width = 24;
  cfg.pyramid_ratio = 0.75;
  EXPECT_EQ(pyramid_widths(256, cfg), frozen);
}

TEST(Pyramid, LevelsAreResizedTargets) {
  SynthConfig cfg;
  const Grid g = random_grid(8, 256, 2);
  const auto pyr = build_pyramid(g, cfg);
  ASSERT_EQ(pyr.size(), pyr.widths.size());
  EXPECT_EQ(pyr.levels.back(), g);
  for (std::size_t k = 0; k < pyr.size(); ++k) {
    EXPECT_EQ(pyr.levels[k].rows(), 8);
    EXPECT_EQ(pyr.levels[k].cols(), pyr.widths[k]);
    if (k > 0) {
      EXPECT_LT(pyr.widths[k - 1], pyr.widths[k]);
    }
  }
  EXPECT_GE(pyr.widths.front(), cfg.min_width);
}

TEST(Pyramid, MinimumWidthGivesSingleLevel) {
  SynthConfig cfg;
  const Grid g = random_grid(8, cfg.min_width, 3);
  const auto pyr = build_pyramid(g, cfg);
  ASSERT_EQ(pyr.size(), 1u);
  EXPECT_EQ(pyr.levels.front(), g);
}

TEST(Pyramid, TooNarrowIsSizeError) {
  SynthConfig cfg;
  try {
    build_pyramid(random_grid(8, cfg.min_width - 1, 4), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Size);
  }
}

TEST(Patches, WholeGridIsOnePatch) {
  const Grid g = random_grid(4, 4, 5);
  const auto ps = extract_patches(g, 4, 1);
  ASSERT_EQ(ps.count(), 1);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) EXPECT_EQ(ps.patches(0, i * 4 + j), g(i, j));
}

TEST(Patches, CountsAndShortGridHeight) {
  const Grid g = random_grid(8, 50, 6);
  const auto ps = extract_patches(g, 7, 1);
  EXPECT_EQ(ps.count(), (8 - 7 + 1) * (50 - 7 + 1));
  EXPECT_EQ(ps.dim(), 49);
  const auto tall = extract_patches(random_grid(3, 20, 7), 5, 1);
  EXPECT_EQ(tall.patch_h, 3);
  EXPECT_EQ(tall.count(), 16);
  EXPECT_EQ(extract_patches(g, 4, 2).count(), 3 * 24);
}

TEST(Patches, FoldRoundTripIsExact) {
  for (unsigned seed = 0; seed < 5; ++seed) {
    const Grid g = random_grid(8, 64 + seed, seed);
    EXPECT_EQ(fold_patches(extract_patches(g, 7, 1)), g);
  }
}

TEST(Patches, FoldAveragesOverlaps) {
  const Grid g = random_grid(2, 3, 8);
  auto ps = extract_patches(g, 2, 1);  // two 2x2 patches sharing column 1
  ps.patches.row(0).setConstant(1.0);
  ps.patches.row(1).setConstant(3.0);
  const Grid out = fold_patches(ps);
  EXPECT_EQ(out(0, 0), 1.0);
  EXPECT_EQ(out(1, 1), 2.0);
  EXPECT_EQ(out(0, 2), 3.0);
}

TEST(Patches, ConstantPatchesFoldToConstant) {
  auto ps = extract_patches(random_grid(8, 40, 9), 7, 1);
  ps.patches.setConstant(0.42);
  EXPECT_TRUE((fold_patches(ps).array() == 0.42).all());
}

TEST(Patches, UncoveredPixelsAreCoverageError) {
  auto ps = extract_patches(random_grid(8, 21, 10), 7, 1);
  ps.stride = 8;
  ps.patches = ps.patches.topRows(ps.rows_of_offsets() * ps.cols_of_offsets()).eval();
  try {
    fold_patches(ps);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Coverage);
  }
}

TEST(Patches, TooLargeIsSizeError) {
  try {
    extract_patches(random_grid(8, 5, 11), 7, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Size);
  }
}

TEST(Directions, UnitNormAndDeterministic) {
  const auto d = random_directions(49, 16, 123);
  for (Eigen::Index c = 0; c < d.cols(); ++c) EXPECT_NEAR(d.col(c).norm(), 1.0, 1e-14);
  EXPECT_EQ(d, random_directions(49, 16, 123));
  EXPECT_NE(d, random_directions(49, 16, 124));
}

TEST(Swd, SelfDistanceIsZero) {
  const auto a = random_patches(30, 49, 12);
  EXPECT_EQ(swd(a, a, 64, 1), 0.0);
}

TEST(Swd, AxisAlignedSinglePatches) {
  const auto v = patch_set({{0.5, -1.0, 2.0}});
  const auto w = patch_set({{-1.0, -1.0, 2.0}});
  Eigen::MatrixXd e1 = Eigen::MatrixXd::Zero(3, 1);
  e1(0, 0) = 1.0;
  EXPECT_EQ(swd(v, w, e1), 2.25);
}

TEST(Swd, SinglePatchesAverageSquaredProjections) {
  const auto v = random_patches(1, 6, 13);
  const auto w = random_patches(1, 6, 14);
  const auto dirs = random_directions(6, 10, 15);
  const Eigen::RowVectorXd diff = v.patches.row(0) - w.patches.row(0);
  const double expected = (diff * dirs).array().square().mean();
  EXPECT_NEAR(swd(v, w, dirs), expected, 1e-14);
}

TEST(Swd, MatchesBruteForceOracle) {
  const auto a = random_patches(5, 4, 16);
  const auto b = random_patches(5, 4, 17);
  const auto dirs = random_directions(4, 3, 18);
  EXPECT_NEAR(swd(a, b, 3, 18), swd_oracle(a, b, dirs), 1e-13);
}

TEST(Swd, UnequalCountsMatchQuantileOracle) {
  const auto a = random_patches(7, 4, 19);
  const auto b = random_patches(12, 4, 20);
  const auto dirs = random_directions(4, 5, 21);
  EXPECT_NEAR(swd(a, b, dirs), swd_oracle(a, b, dirs), 1e-13);
  EXPECT_NEAR(swd(b, a, dirs), swd_oracle(a, b, dirs), 1e-13);
}

TEST(Swd, SymmetricAndNonnegative) {
  for (unsigned s = 0; s < 10; ++s) {
    const auto a = random_patches(20, 9, 100 + s);
    const auto b = random_patches(20, 9, 200 + s);
    const double ab = swd(a, b, 8, s);
    EXPECT_EQ(ab, swd(b, a, 8, s));
    EXPECT_GE(ab, 0.0);
  }
}

TEST(Swd, InvariantToRowOrder) {
  const auto a = random_patches(25, 9, 22);
  auto shuffled = a;
  std::mt19937_64 rng(5);
  std::vector<Eigen::Index> perm(25);
  for (Eigen::Index i = 0; i < 25; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  for (Eigen::Index i = 0; i < 25; ++i) shuffled.patches.row(i) = a.patches.row(perm[static_cast<std::size_t>(i)]);
  EXPECT_EQ(swd(a, shuffled, 16, 3), 0.0);
}

TEST(Swd, EmptyOrMismatchedSetsAreErrors) {
  PatchSet empty;
  empty.patches.resize(0, 4);
  const auto a = random_patches(3, 4, 23);
  try {
    swd(a, empty, 4, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Data);
  }
  EXPECT_THROW(swd(a, random_patches(3, 5, 24), 4, 0), Error);
}

TEST(OtUpdate, IdenticalMultisetsAreFixedPoint) {
  const auto a = random_patches(30, 49, 25);
  auto permuted = a;
  permuted.patches.row(0).swap(permuted.patches.row(29));
  EXPECT_EQ(ot_patch_update(a, a, 64, 7).patches, a.patches);
  EXPECT_EQ(ot_patch_update(a, permuted, 64, 7).patches, a.patches);
}

TEST(OtUpdate, SingleProjectionRankOneStep) {
  const auto v = random_patches(1, 5, 26);
  const auto w = random_patches(1, 5, 27);
  const auto dirs = random_directions(5, 1, 28);
  const Eigen::VectorXd u = dirs.col(0);
  const Eigen::RowVectorXd diff = w.patches.row(0) - v.patches.row(0);
  const Eigen::RowVectorXd expected = v.patches.row(0) + diff.dot(u.transpose()) * u.transpose();
  const auto out = ot_patch_update(v, w, dirs);
  EXPECT_LE((out.patches.row(0) - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(OtUpdate, SinglePatchConvergesToTarget) {
  auto v = random_patches(1, 4, 29);
  const auto w = random_patches(1, 4, 30);
  const double start = (v.patches - w.patches).norm();
  for (int it = 0; it < 50; ++it) v = ot_patch_update(v, w, 256, static_cast<std::uint64_t>(it));
  EXPECT_LE((v.patches - w.patches).norm(), 1e-3 * start);
}

TEST(OtUpdate, PreservesGeometry) {
  const auto synth = extract_patches(random_grid(8, 40, 31), 7, 1);
  const auto target = extract_patches(random_grid(8, 30, 32), 7, 1);
  const auto out = ot_patch_update(synth, target, 8, 1);
  EXPECT_EQ(out.grid_width, 40);
  EXPECT_EQ(out.count(), synth.count());
  EXPECT_NO_THROW(fold_patches(out));
}

// Reference loop for the small convergence instance: own projections, own
// sort, own update.
PatchSet ot_step_oracle(const PatchSet& s, const PatchSet& t, const Eigen::MatrixXd& dirs) {
  PatchSet out = s;
  const Eigen::Index n = s.count();
  for (Eigen::Index c = 0; c < dirs.cols(); ++c) {
    std::vector<std::pair<double, Eigen::Index>> ps, pt;
    for (Eigen::Index i = 0; i < n; ++i) ps.emplace_back(s.patches.row(i).dot(dirs.col(c).transpose()), i);
    for (Eigen::Index i = 0; i < t.count(); ++i) pt.emplace_back(t.patches.row(i).dot(dirs.col(c).transpose()), i);
    std::sort(ps.begin(), ps.end());
    std::sort(pt.begin(), pt.end());
    for (Eigen::Index r = 0; r < n; ++r) {
      const double delta = pt[static_cast<std::size_t>(r)].first - ps[static_cast<std::size_t>(r)].first;
      out.patches.row(ps[static_cast<std::size_t>(r)].second) +=
          delta / static_cast<double>(dirs.cols()) * dirs.col(c).transpose();
    }
  }
  return out;
}

TEST(OtUpdate, SmallInstanceConvergesMonotonically) {
  const auto target = patch_set({{0.0, 0.0}, {1.0, 0.5}, {-0.5, 1.0}});
  const auto start = patch_set({{2.0, -1.0}, {1.5, 1.5}, {-1.0, -2.0}});
  const auto probe = random_directions(2, 64, 999);

  auto iterations = [&](auto step) {
    PatchSet s = start;
    double prev = swd(s, target, probe);
    for (int it = 1; it <= 200; ++it) {
      s = step(s, random_directions(2, 32, static_cast<std::uint64_t>(it)));
      const double cur = swd(s, target, probe);
      EXPECT_LE(cur, prev * (1.0 + 1e-9)) << "iteration " << it;
      prev = cur;
      if (cur < 1e-3) return it;
    }
    return -1;
  };

  const int oracle_its = iterations([&](const PatchSet& s, const Eigen::MatrixXd& d) { return ot_step_oracle(s, target, d); });
  const int impl_its = iterations([&](const PatchSet& s, const Eigen::MatrixXd& d) { return ot_patch_update(s, target, d); });
  EXPECT_EQ(oracle_its, 9);
  EXPECT_EQ(impl_its, oracle_its);
}

TEST(Synthesize, OutputWidths) {
  const auto target = normalized_target(8, 256, 33);
  SynthConfig cfg;
  cfg.steps_per_level = 1;
  cfg.num_projections = 4;
  EXPECT_EQ(synthesize(target, cfg, 1).width(), 256);
  cfg.retarget_factor = 2.0;
  const auto wide = synthesize(target, cfg, 1);
  EXPECT_EQ(wide.width(), 512);
  EXPECT_EQ(wide.height(), 8);
}

TEST(Synthesize, IdentityScheduleReproducesResizeChain) {
  const auto target = normalized_target(8, 256, 34);
  SynthConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.steps_per_level = 0;
  const auto out = synthesize(target, cfg, 5);

  const auto widths = pyramid_widths(256, cfg);
  Grid chain = resize_oracle(target.coeffs, widths.front());
  for (std::size_t k = 1; k < widths.size(); ++k) chain = resize_oracle(chain, widths[k]);
  EXPECT_LE((out.coeffs - chain).cwiseAbs().maxCoeff(), 1e-12);
  ASSERT_TRUE(out.norm.has_value());
  EXPECT_EQ(*out.norm, *target.norm);
}

TEST(Synthesize, SingleLevelIdentityIsExact) {
  const auto target = normalized_target(8, 24, 35);
  SynthConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.steps_per_level = 0;
  EXPECT_EQ(synthesize(target, cfg, 5).coeffs, target.coeffs);
}

TEST(Synthesize, DeterministicAndSeedSensitive) {
  const auto target = normalized_target(8, 64, 36);
  const SynthConfig cfg;
  const auto a = synthesize(target, cfg, 77);
  EXPECT_EQ(a.coeffs, synthesize(target, cfg, 77).coeffs);
  EXPECT_NE(a.coeffs, synthesize(target, cfg, 78).coeffs);
}

TEST(Synthesize, OutputStaysInUnitInterval) {
  const auto target = normalized_target(8, 96, 37);
  SynthConfig cfg;
  cfg.noise_sigma = 3.0;
  for (double factor : {1.0, 2.0}) {
    cfg.retarget_factor = factor;
    const auto out = synthesize(target, cfg, 3);
    EXPECT_GE(out.coeffs.minCoeff(), 0.0);
    EXPECT_LE(out.coeffs.maxCoeff(), 1.0);
  }
}

TEST(Synthesize, DefaultScheduleConverges) {
  // 8x64 scalogram of a Wiener path; compare the finished synthesis with the
  // noisy starting point (same seed, no update steps) in patch distribution.
  const auto target = normalize(cwt(simulate(ProcessSpec{}, 64, 5), WaveletConfig{}));
  const SynthConfig cfg;
  SynthConfig frozen = cfg;
  frozen.steps_per_level = 0;
  const auto tp = extract_patches(target.coeffs, cfg.patch_size, cfg.stride);
  const auto dirs = random_directions(tp.dim(), 128, 2024);
  for (std::uint64_t seed : {9u, 10u, 11u}) {
    const auto initial = synthesize(target, frozen, seed);
    const auto final_grid = synthesize(target, cfg, seed);
    const double before = swd(extract_patches(initial.coeffs, cfg.patch_size, cfg.stride), tp, dirs);
    const double after = swd(extract_patches(final_grid.coeffs, cfg.patch_size, cfg.stride), tp, dirs);
    EXPECT_LE(after, 0.2 * before) << "seed " << seed << " before " << before << " after " << after;
  }
}

TEST(Synthesize, RequiresNormalizedTarget) {
  auto target = normalized_target(8, 64, 39);
  target.norm.reset();
  try {
    synthesize(target, SynthConfig{}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::State);
  }
}

TEST(SynthConfigTest, Validation) {
  SynthConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.patch_size = 1;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.patch_size = 30;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.pyramid_ratio = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.noise_sigma = -0.1;
  EXPECT_THROW(cfg.validate(), Error);
}

}  // namespace
}  // namespace wavesynth
