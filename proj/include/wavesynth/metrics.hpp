#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "wavesynth/error.hpp"
#include "wavesynth/processes.hpp"

namespace wavesynth {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// m x d matrix of raw feature vectors, one sample per row.
struct FeatureSet {
  FeatureMatrix vectors;
  std::string label;

  Eigen::Index count() const noexcept { return vectors.rows(); }
  Eigen::Index dim() const noexcept { return vectors.cols(); }
};

inline FeatureSet to_features(const Dataset& ds) {
  ds.validate();
  FeatureSet fs;
  fs.label = ds.label;
  fs.vectors.resize(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(ds.length()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto v = ds.series[i].values();
    std::copy(v.begin(), v.end(), fs.vectors.row(static_cast<Eigen::Index>(i)).data());
  }
  return fs;
}

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  int k = 3;
  Eigen::Index m_real = 0;
  Eigen::Index m_fake = 0;
  std::string config;
};

namespace detail {

inline double euclidean(const FeatureMatrix& a, Eigen::Index i, const FeatureMatrix& b, Eigen::Index j) {
  const double* x = a.row(i).data();
  const double* y = b.row(j).data();
  double acc = 0.0;
  for (Eigen::Index d = 0; d < a.cols(); ++d) {
    const double diff = x[d] - y[d];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

inline void check_features(const FeatureSet& fs, int k) {
  require(k >= 1, ErrorKind::Parameter, "k must be positive");
  require(fs.count() > k, ErrorKind::Size, "feature set needs more than k vectors");
  require(fs.vectors.allFinite(), ErrorKind::Data, "feature set contains non-finite values");
}

}  // namespace detail

/// Distance from each vector to its k-th nearest neighbour, self excluded.
inline std::vector<double> knn_radii(const FeatureSet& fs, int k) {
  detail::check_features(fs, k);
  const Eigen::Index m = fs.count();
  std::vector<double> radii(static_cast<std::size_t>(m));
  std::vector<double> row(static_cast<std::size_t>(m - 1));
  for (Eigen::Index i = 0; i < m; ++i) {
    std::size_t n = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j != i) row[n++] = detail::euclidean(fs.vectors, i, fs.vectors, j);
    }
    std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
    radii[static_cast<std::size_t>(i)] = row[static_cast<std::size_t>(k - 1)];
  }
  return radii;
}

/// Fraction of `queries` inside the union of balls B(ref_i, radii_i);
/// boundary counts as inside.
inline double manifold_coverage(const FeatureSet& ref, const std::vector<double>& radii, const FeatureSet& queries) {
  Eigen::Index inside = 0;
  for (Eigen::Index q = 0; q < queries.count(); ++q) {
    for (Eigen::Index i = 0; i < ref.count(); ++i) {
      if (detail::euclidean(queries.vectors, q, ref.vectors, i) <= radii[static_cast<std::size_t>(i)]) {
        ++inside;
        break;
      }
    }
  }
  return static_cast<double>(inside) / static_cast<double>(queries.count());
}

/// Improved precision (fake inside the real manifold) and recall (real
/// inside the fake manifold) with k-NN ball manifolds.
inline EvalReport precision_recall(const FeatureSet& real, const FeatureSet& fake, int k) {
  detail::check_features(real, k);
  detail::check_features(fake, k);
  detail::require(real.dim() == fake.dim(), ErrorKind::Shape, "real and fake feature dimensions differ");

  EvalReport report;
  report.k = k;
  report.m_real = real.count();
  report.m_fake = fake.count();
  report.precision = manifold_coverage(real, knn_radii(real, k), fake);
  report.recall = manifold_coverage(fake, knn_radii(fake, k), real);
  return report;
}

}  // namespace wavesynth
