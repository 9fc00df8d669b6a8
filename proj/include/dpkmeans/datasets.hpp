// Copyright 2026 The dpkmeans Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPKMEANS_DATASETS_HPP_
#define DPKMEANS_DATASETS_HPP_

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpkmeans/core.hpp"
#include "dpkmeans/error.hpp"
#include "dpkmeans/kmeans.hpp"
#include "dpkmeans/rng.hpp"

namespace dpkmeans {

struct MixtureData {
  Eigen::MatrixXd points;  // n x d
  std::vector<int> labels;  // generating component per point
  Eigen::MatrixXd means;    // k x d
};

// Gaussian mixture with k equally likely unit-covariance components. Means
// are placed by rejection sampling in the [-spread, spread]^d box with a
// minimum pairwise separation of 0.6*spread; the separation requirement is
// relaxed by 5% after every 1000 failed attempts so placement always
// terminates, deterministically in the seed.
inline MixtureData generate_mixture(Eigen::Index n, int k, Eigen::Index d, double spread,
                                    std::uint64_t seed) {
  require(k >= 1, "mixture needs k >= 1");
  require(d >= 1, "mixture needs d >= 1");
  require(n >= 0, "mixture needs n >= 0");
  require(spread > 0.0, "mixture spread must be positive");
  Rng rng = Rng(seed).split(streams::kMixture);

  Eigen::MatrixXd means(k, d);
  double min_sep = 0.6 * spread;
  for (int j = 0; j < k; ++j) {
    int attempts = 0;
    for (;;) {
      Eigen::VectorXd cand(d);
      for (Eigen::Index c = 0; c < d; ++c) cand[c] = spread * (2.0 * rng.uniform() - 1.0);
      bool ok = true;
      for (int j2 = 0; j2 < j; ++j2) {
        if ((means.row(j2).transpose() - cand).norm() < min_sep) {
          ok = false;
          break;
        }
      }
      if (ok) {
        means.row(j) = cand.transpose();
        break;
      }
      if (++attempts % 1000 == 0) min_sep *= 0.95;
    }
  }

  Eigen::MatrixXd pts(n, d);
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int comp = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k)));
    labels[static_cast<std::size_t>(i)] = comp;
    for (Eigen::Index c = 0; c < d; ++c) pts(i, c) = means(comp, c) + rng.gaussian();
  }
  return MixtureData{std::move(pts), std::move(labels), std::move(means)};
}

// Smooth synthetic daily load curve (kW) sampled at n points over one day;
// used by the noise-filtering demonstration.
inline Eigen::VectorXd smooth_daily_profile(Eigen::Index n) {
  require(n >= 2, "profile needs at least 2 samples");
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n);
    out[i] = 1.6 + 0.9 * std::sin(t - 2.1) + 0.45 * std::sin(2.0 * t + 0.6) +
             0.2 * std::sin(3.0 * t + 1.9);
  }
  return out;
}

// Bundled synthetic stand-in for a metered-load dataset: 1416 daily profiles
// (d = 25 hourly values, kW, all positive), six consumption classes with
// log-normal spread around smooth class shapes, and 7 planted far outliers
// (large commercial-style profiles appended last). Deterministic in the seed.
inline Dataset generate_load_like(std::uint64_t seed) {
  constexpr int kClasses = 6;
  constexpr Eigen::Index kDim = 25;
  const int class_sizes[kClasses] = {400, 350, 300, 200, 90, 69};  // totals 1409
  constexpr int kOutliers = 7;

  Rng rng = Rng(seed).split(streams::kMixture).split(77);
  const double base[kClasses] = {0.9, 1.4, 2.0, 1.1, 2.8, 0.6};
  const double amp1[kClasses] = {0.5, 0.8, 1.1, 0.3, 1.3, 0.25};
  const double ph1[kClasses] = {-2.0, -1.2, -2.6, 0.4, -1.8, -0.7};
  const double amp2[kClasses] = {0.2, 0.35, 0.4, 0.1, 0.5, 0.08};
  const double ph2[kClasses] = {0.7, 1.5, -0.4, 2.2, 0.9, -1.3};

  Eigen::MatrixXd pts(1409 + kOutliers, kDim);
  std::vector<std::string> ids;
  ids.reserve(1416);
  Eigen::Index row = 0;
  for (int cls = 0; cls < kClasses; ++cls) {
    for (int i = 0; i < class_sizes[cls]; ++i, ++row) {
      const double scale = std::exp(0.18 * rng.gaussian());
      for (Eigen::Index t = 0; t < kDim; ++t) {
        const double h = 2.0 * M_PI * static_cast<double>(t) / 24.0;
        const double shape = base[cls] + amp1[cls] * std::sin(h + ph1[cls]) +
                             amp2[cls] * std::sin(2.0 * h + ph2[cls]);
        const double v = shape * scale * std::exp(0.06 * rng.gaussian());
        pts(row, t) = std::max(v, 0.05);
      }
      ids.push_back("h" + std::to_string(row));
    }
  }
  for (int i = 0; i < kOutliers; ++i, ++row) {
    const double scale = 18.0 + 2.0 * static_cast<double>(i);
    for (Eigen::Index t = 0; t < kDim; ++t) {
      const double h = 2.0 * M_PI * static_cast<double>(t) / 24.0;
      const double shape = 2.2 + 1.0 * std::sin(h - 1.5) + 0.3 * std::sin(2.0 * h + 0.2);
      pts(row, t) = shape * scale * std::exp(0.04 * rng.gaussian());
    }
    ids.push_back("c" + std::to_string(i));
  }
  return Dataset{std::move(pts), std::move(ids)};
}

}  // namespace dpkmeans

#endif  // DPKMEANS_DATASETS_HPP_
