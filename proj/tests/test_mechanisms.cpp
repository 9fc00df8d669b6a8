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

#include "dpkmeans/mechanisms.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "dpkmeans/datasets.hpp"
#include "dpkmeans/error.hpp"
#include "oracles.hpp"

namespace dpkmeans {
namespace {

TEST(WhiteSigma, PinnedValue) {
  // sigma = (sens / eps) * sqrt(2 log(2 / delta)) at sens 2.13, (30, 0.2).
  EXPECT_DOUBLE_EQ(white_sigma(2.13, {30.0, 0.2}).sigma, 0.15236358786654364);
}

TEST(WhiteSigma, FormulaAndScaling) {
  const double s1 = white_sigma(1.0, {2.0, 0.1}).sigma;
  EXPECT_DOUBLE_EQ(s1, std::sqrt(2.0 * std::log(20.0)) / 2.0);
  // Linear in sensitivity, inverse in epsilon.
  EXPECT_DOUBLE_EQ(white_sigma(3.0, {2.0, 0.1}).sigma, 3.0 * s1);
  EXPECT_DOUBLE_EQ(white_sigma(1.0, {4.0, 0.1}).sigma, s1 / 2.0);
  EXPECT_DOUBLE_EQ(white_sigma(0.0, {1.0, 0.1}).sigma, 0.0);
  EXPECT_THROW(white_sigma(1.0, {0.0, 0.1}), Error);
  EXPECT_THROW(white_sigma(1.0, {1.0, 0.0}), Error);
  EXPECT_THROW(white_sigma(-1.0, {1.0, 0.1}), Error);
}

TEST(LabelDelta, MatchesEnumerationAcrossGrid) {
  for (const int k : {2, 3, 4, 5, 6}) {
    for (const int dl : {1, 2, 3, 4}) {
      for (const double rho : {0.05, 0.1, 0.25, 0.4}) {
        const double unit = std::log((1.0 / rho - 1.0) * (k - 1));
        for (const double f : {0.137, 0.291, 0.433, 0.577, 0.719, 0.861, 1.049, 1.23}) {
          const double eps = f * unit * dl;
          if (eps <= 0.0) continue;
          const double got = label_delta(rho, k, dl, eps);
          const double want = testutil::enumerate_label_delta(rho, k, dl, eps);
          ASSERT_NEAR(got, want, 1e-12)
              << "k=" << k << " dl=" << dl << " rho=" << rho << " f=" << f;
        }
      }
    }
  }
}

TEST(LabelDelta, ZeroAboveWorstCaseLeakage) {
  for (const int k : {2, 3, 5}) {
    for (const int dl : {1, 2, 4}) {
      for (const double rho : {0.05, 0.25, 0.4}) {
        const double unit = std::log((1.0 / rho - 1.0) * (k - 1));
        EXPECT_EQ(label_delta(rho, k, dl, dl * unit * (1.0 + 1e-9)), 0.0);
        EXPECT_GT(label_delta(rho, k, dl, dl * unit * (1.0 - 1e-9)), 0.0);
      }
    }
  }
}

TEST(LabelDelta, KnownClosedFormsAtSmallCases) {
  // delta_l = 1, eps below the unit leakage: delta = P(M0 = 1) = 1 - rho.
  EXPECT_NEAR(label_delta(0.2, 4, 1, 0.5), 0.8, 1e-15);
  // delta_l = 2, threshold between 1 and 2 units: P(M0 - Mc = 2) = (1-rho)^2.
  const double unit = std::log((1.0 / 0.2 - 1.0) * 3);
  EXPECT_NEAR(label_delta(0.2, 4, 2, 1.5 * unit), 0.64, 1e-15);
  EXPECT_EQ(label_delta(0.2, 4, 0, 1.0), 0.0);
}

TEST(LabelDelta, MonotoneInEpsilonAndDeltaL) {
  double prev = 1.0;
  for (const double eps : {0.1, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    const double cur = label_delta(0.25, 4, 3, eps);
    EXPECT_LE(cur, prev + 1e-15);
    prev = cur;
  }
  for (int dl = 1; dl < 6; ++dl)
    EXPECT_LE(label_delta(0.25, 4, dl, 3.0), label_delta(0.25, 4, dl + 1, 3.0) + 1e-15);
}

TEST(SolveRho, AchievesExactlyZeroDelta) {
  for (const int k : {2, 3, 4, 6}) {
    for (const int dl : {1, 2, 3, 5}) {
      const double eps = (std::log(static_cast<double>(k - 1)) + 0.8) * dl;
      const double rho = solve_rho(k, dl, eps);
      ASSERT_GT(rho, 0.0);
      ASSERT_LT(rho, 0.5);
      EXPECT_EQ(label_delta(rho, k, dl, eps), 0.0) << "k=" << k << " dl=" << dl;
      // Just below the solved point the guarantee must break.
      EXPECT_GT(label_delta(rho * (1.0 - 1e-6), k, dl, eps), 0.0);
    }
  }
  EXPECT_THROW(solve_rho(4, 2, 2.0 * std::log(3.0) * 0.99), Error);
  EXPECT_THROW(solve_rho(4, 0, 1.0), Error);
}

TEST(PerturbCentroids, WhiteZeroSigmaIsIdentity) {
  ClusteringResult res{Eigen::MatrixXd::Random(3, 2), {0, 1, 2}, 3};
  Rng rng(1);
  const ClusteringResult out = perturb_centroids(res, WhiteNoiseSpec{0.0}, rng);
  EXPECT_EQ(out.centroids, res.centroids);
  EXPECT_EQ(out.labels, res.labels);
}

TEST(PerturbCentroids, WhiteNoiseMomentsMatchSigma) {
  ClusteringResult res{Eigen::MatrixXd::Zero(2, 3), {0, 1}, 2};
  const double sigma = 0.7;
  const int n = 20000;
  double s2 = 0.0;
  Rng rng(5);
  for (int t = 0; t < n; ++t) {
    const ClusteringResult out = perturb_centroids(res, WhiteNoiseSpec{sigma}, rng);
    s2 += out.stacked().squaredNorm();
  }
  // E||noise||^2 = 6 sigma^2; se = sigma^2 sqrt(2 * 6 / n).
  EXPECT_NEAR(s2 / n, 6.0 * sigma * sigma,
              4.0 * sigma * sigma * std::sqrt(12.0 / static_cast<double>(n)));
}

TEST(PerturbCentroids, ColoredNoiseCovarianceIsGammaInverse) {
  Eigen::MatrixXd gamma(2, 2);
  gamma << 4.0, 1.0, 1.0, 2.0;
  ColoredNoiseSpec spec;
  spec.gamma = gamma;
  ClusteringResult res{Eigen::MatrixXd::Zero(1, 2), {0}, 1};
  const Eigen::MatrixXd want_cov = gamma.inverse();

  const int n = 200000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(2, 2);
  Rng rng(9);
  for (int t = 0; t < n; ++t) {
    const Eigen::VectorXd eta = perturb_centroids(res, spec, rng).stacked();
    acc += eta * eta.transpose();
  }
  acc /= static_cast<double>(n);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double se = std::sqrt((want_cov(i, i) * want_cov(j, j) +
                                   want_cov(i, j) * want_cov(i, j)) /
                                  static_cast<double>(n));
      EXPECT_NEAR(acc(i, j), want_cov(i, j), 4.0 * se) << i << "," << j;
    }
}

TEST(PerturbCentroids, ColoredRequiresPositiveDefinite) {
  ColoredNoiseSpec spec;
  spec.gamma = Eigen::MatrixXd::Zero(2, 2);
  ClusteringResult res{Eigen::MatrixXd::Zero(1, 2), {0}, 1};
  Rng rng(1);
  EXPECT_THROW(perturb_centroids(res, spec, rng), Error);
}

TEST(PerturbLabels, OnlySensitiveSetChanges) {
  ClusteringResult res{Eigen::MatrixXd::Zero(4, 1), {0, 1, 2, 3, 0, 1, 2, 3}, 4};
  LabelNoiseSpec spec{0.49, 4, {1, 5}, 2};
  std::set<std::size_t> touched;
  Rng rng(3);
  for (int t = 0; t < 2000; ++t) {
    const ClusteringResult out = perturb_labels(res, spec, rng);
    ASSERT_EQ(out.labels.size(), res.labels.size());
    for (std::size_t i = 0; i < out.labels.size(); ++i) {
      ASSERT_GE(out.labels[i], 0);
      ASSERT_LT(out.labels[i], 4);
      if (out.labels[i] != res.labels[i]) touched.insert(i);
    }
  }
  EXPECT_EQ(touched, (std::set<std::size_t>{1, 5}));
}

TEST(PerturbLabels, FlipFrequencyAndUniformity) {
  const int k = 5;
  ClusteringResult res{Eigen::MatrixXd::Zero(k, 1), {2}, k};
  const double rho = 0.3;
  LabelNoiseSpec spec{rho, k, {0}, 1};
  const int n = 200000;
  int flips = 0;
  std::vector<int> landed(static_cast<std::size_t>(k), 0);
  Rng rng(13);
  for (int t = 0; t < n; ++t) {
    const ClusteringResult out = perturb_labels(res, spec, rng);
    if (out.labels[0] != 2) {
      ++flips;
      ++landed[static_cast<std::size_t>(out.labels[0])];
    }
  }
  const double se_flip = std::sqrt(rho * (1.0 - rho) / n);
  EXPECT_NEAR(static_cast<double>(flips) / n, rho, 4.0 * se_flip);
  // Flips spread uniformly over the k - 1 other labels.
  const double per = rho / (k - 1);
  for (int j = 0; j < k; ++j) {
    if (j == 2) continue;
    const double se = std::sqrt(per * (1.0 - per) / n);
    EXPECT_NEAR(static_cast<double>(landed[static_cast<std::size_t>(j)]) / n, per, 4.0 * se)
        << j;
  }
}

TEST(PerturbLabels, Validates) {
  ClusteringResult res{Eigen::MatrixXd::Zero(2, 1), {0, 1}, 2};
  Rng rng(1);
  EXPECT_THROW(perturb_labels(res, LabelNoiseSpec{0.0, 2, {0}, 1}, rng), Error);
  EXPECT_THROW(perturb_labels(res, LabelNoiseSpec{0.5, 2, {0}, 1}, rng), Error);
  EXPECT_THROW(perturb_labels(res, LabelNoiseSpec{0.1, 1, {0}, 1}, rng), Error);
  EXPECT_THROW(perturb_labels(res, LabelNoiseSpec{0.1, 2, {7}, 1}, rng), Error);
}

TEST(DpKmeans, EndToEndBudgetsAndStreams) {
  const MixtureData mix = generate_mixture(400, 4, 2, 5.0, 17);
  const Dataset data = make_dataset(mix.points);
  const KmeansConfig cfg{4, 300, 1e-9, 17};
  Rng rng(17);
  const DpKmeansOutput out = dp_kmeans(data, cfg, {2.0, 0.05}, {6.0, 0.0},
                                       NoiseKind::kColored,
                                       std::numeric_limits<double>::quiet_NaN(), rng);
  EXPECT_EQ(out.achieved_delta_l, 0.0);
  EXPECT_DOUBLE_EQ(out.total_budget.epsilon, 8.0);
  EXPECT_DOUBLE_EQ(out.total_budget.delta, 0.05);
  ASSERT_EQ(out.ledger.entries().size(), 2u);
  EXPECT_EQ(out.ledger.entries()[0].first, "centroids");
  EXPECT_EQ(out.ledger.entries()[1].first, "labels");
  EXPECT_EQ(out.private_result.k, 4);
  EXPECT_EQ(out.private_result.labels.size(), 400u);
  // Private centroids differ from the base ones.
  EXPECT_GT((out.private_result.centroids - out.base_result.centroids).norm(), 0.0);

  // Reproducible from the same seed.
  Rng rng2(17);
  const DpKmeansOutput out2 = dp_kmeans(data, cfg, {2.0, 0.05}, {6.0, 0.0},
                                        NoiseKind::kColored,
                                        std::numeric_limits<double>::quiet_NaN(), rng2);
  EXPECT_EQ(out.private_result.centroids, out2.private_result.centroids);
  EXPECT_EQ(out.private_result.labels, out2.private_result.labels);
}

TEST(DpKmeans, WhiteAndColoredShareBaseClustering) {
  const MixtureData mix = generate_mixture(300, 3, 2, 5.0, 23);
  const Dataset data = make_dataset(mix.points);
  const KmeansConfig cfg{3, 300, 1e-9, 23};
  Rng rng_w(23), rng_c(23);
  const DpKmeansOutput w =
      dp_kmeans(data, cfg, {2.0, 0.1}, {5.0, 0.0}, NoiseKind::kWhite, 0.2, rng_w);
  const DpKmeansOutput c =
      dp_kmeans(data, cfg, {2.0, 0.1}, {5.0, 0.0}, NoiseKind::kColored, 0.2, rng_c);
  EXPECT_EQ(w.base_result.centroids, c.base_result.centroids);
  EXPECT_GT(w.white.sigma, 0.0);
  EXPECT_GT(c.colored.trace_inv, 0.0);
  // The white spec on the colored run stays default and vice versa.
  EXPECT_EQ(c.white.sigma, 0.0);
}

TEST(GaussianTail, MatchesErfcValues) {
  EXPECT_NEAR(gaussian_tail(0.0), 0.5, 1e-15);
  EXPECT_NEAR(gaussian_tail(1.6448536269514722), 0.05, 1e-10);
  EXPECT_NEAR(gaussian_tail(-1e9), 1.0, 1e-15);
}

}  // namespace
}  // namespace dpkmeans
