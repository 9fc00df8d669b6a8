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

#include "dpkmeans/kmeans.hpp"

#include <algorithm>
#include <vector>

#include <gtest/gtest.h>

#include "dpkmeans/datasets.hpp"
#include "dpkmeans/error.hpp"
#include "oracles.hpp"

namespace dpkmeans {
namespace {

Dataset mixture_dataset(Eigen::Index n, int k, Eigen::Index d, double spread,
                        std::uint64_t seed, MixtureData* mix_out = nullptr) {
  MixtureData mix = generate_mixture(n, k, d, spread, seed);
  if (mix_out) *mix_out = mix;
  return make_dataset(mix.points);
}

// Fraction of points whose cluster label agrees with ground truth after the
// best centroid matching.
double accuracy_vs_truth(const MixtureData& mix, const ClusteringResult& got,
                         const Eigen::MatrixXd& true_means) {
  ClusteringResult truth;
  truth.k = got.k;
  truth.centroids = true_means;
  truth.labels = mix.labels;
  const ClusteringResult aligned = align_to(truth, got);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < aligned.labels.size(); ++i)
    hits += aligned.labels[i] == mix.labels[i];
  return static_cast<double>(hits) / static_cast<double>(aligned.labels.size());
}

TEST(Kmeans, RecoversWellSeparatedMixture) {
  MixtureData mix;
  const Dataset data = mixture_dataset(1000, 6, 2, 8.0, 3, &mix);
  const ClusteringResult res = cluster(data, {6, 300, 1e-9, 3});
  EXPECT_GE(accuracy_vs_truth(mix, res, mix.means), 0.95);
}

TEST(Kmeans, DeterministicForFixedSeed) {
  const Dataset data = mixture_dataset(400, 4, 3, 6.0, 9);
  const ClusteringResult a = cluster(data, {4, 300, 1e-9, 77});
  const ClusteringResult b = cluster(data, {4, 300, 1e-9, 77});
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.centroids, b.centroids);
}

TEST(Kmeans, LloydNeverIncreasesLoss) {
  const Dataset data = mixture_dataset(500, 5, 2, 4.0, 21);
  Rng rng = Rng(21).split(streams::kKmeansInit);
  const Eigen::MatrixXd init = detail::kmeanspp_init(data.points, 5, rng);
  ClusteringResult at_init;
  at_init.k = 5;
  at_init.centroids = init;
  at_init.labels = detail::assign_labels(data.points, init);
  const ClusteringResult final = detail::lloyd(data.points, init, 5, 300, 1e-9);
  EXPECT_LE(clustering_loss(data, final), clustering_loss(data, at_init) + 1e-12);
}

TEST(Kmeans, SinglePointClustersConverge) {
  Eigen::MatrixXd pts(3, 1);
  pts << 0.0, 10.0, 20.0;
  const Dataset data = make_dataset(pts);
  const ClusteringResult res = cluster(data, {3, 100, 0.0, 1});
  EXPECT_DOUBLE_EQ(clustering_loss(data, res), 0.0);
  std::vector<int> sorted_labels = res.labels;
  std::sort(sorted_labels.begin(), sorted_labels.end());
  EXPECT_EQ(sorted_labels, (std::vector<int>{0, 1, 2}));
}

TEST(Kmeans, KOneIsGrandMean) {
  const Dataset data = mixture_dataset(100, 2, 3, 3.0, 5);
  const ClusteringResult res = cluster(data, {1, 100, 1e-12, 5});
  const Eigen::RowVectorXd mean = data.points.colwise().mean();
  EXPECT_LT((res.centroids.row(0) - mean).norm(), 1e-12);
  for (const int l : res.labels) EXPECT_EQ(l, 0);
}

TEST(Kmeans, EmptyClusterIsReseeded) {
  // Two far groups and k = 3: one centroid must end up empty mid-run and be
  // re-seeded; the final result must still have 3 nonempty clusters of
  // 0 loss is impossible here, but every centroid must own >= 1 point.
  Eigen::MatrixXd pts(6, 1);
  pts << 0.0, 0.1, 0.2, 100.0, 100.1, 100.2;
  const Dataset data = make_dataset(pts);
  const ClusteringResult res = cluster(data, {3, 200, 0.0, 2});
  std::vector<int> counts(3, 0);
  for (const int l : res.labels) ++counts[static_cast<std::size_t>(l)];
  for (int j = 0; j < 3; ++j) EXPECT_GE(counts[static_cast<std::size_t>(j)], 1) << j;
}

TEST(Kmeans, ValidatesArguments) {
  const Dataset data = mixture_dataset(10, 2, 2, 3.0, 1);
  EXPECT_THROW(cluster(data, {0, 100, 1e-9, 1}), Error);
  EXPECT_THROW(cluster(data, {11, 100, 1e-9, 1}), Error);
  EXPECT_THROW(cluster(data, {2, 100, -1.0, 1}), Error);
}

TEST(Kmeans, AssignLabelsBreaksTiesLow) {
  Eigen::MatrixXd x(1, 1);
  x << 5.0;
  Eigen::MatrixXd c(2, 1);
  c << 4.0, 6.0;  // equidistant
  EXPECT_EQ(detail::assign_labels(x, c)[0], 0);
}

TEST(Kmeans, LossMatchesHandComputation) {
  Eigen::MatrixXd pts(2, 2);
  pts << 0, 0, 2, 0;
  const Dataset data = make_dataset(pts);
  ClusteringResult res;
  res.k = 1;
  res.centroids.resize(1, 2);
  res.centroids << 1, 0;
  res.labels = {0, 0};
  EXPECT_DOUBLE_EQ(clustering_loss(data, res), 1.0);
}

TEST(Kmeans, AccuracyLossRelativeAndGuarded) {
  Eigen::MatrixXd pts(2, 1);
  pts << 0, 2;
  const Dataset data = make_dataset(pts);
  ClusteringResult base{Eigen::MatrixXd::Constant(1, 1, 1.0), {0, 0}, 1};
  ClusteringResult shifted{Eigen::MatrixXd::Constant(1, 1, 2.0), {0, 0}, 1};
  // base loss 1, shifted loss (4 + 0)/2 = 2 -> relative increase 1.
  EXPECT_DOUBLE_EQ(dp_accuracy_loss(data, base, shifted), 1.0);

  ClusteringResult exact{Eigen::MatrixXd::Constant(1, 1, 0.0), {0, 0}, 1};
  Eigen::MatrixXd same(2, 1);
  same << 0, 0;
  const Dataset degenerate = make_dataset(same);
  EXPECT_THROW(dp_accuracy_loss(degenerate, exact, exact), Error);
}

TEST(Kmeans, HungarianMatchesBruteForce) {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_int(5));  // 2..6
    ClusteringResult a, b;
    a.k = b.k = k;
    a.centroids = Eigen::MatrixXd::NullaryExpr(k, 3, [&]() { return rng.gaussian(); });
    b.centroids = Eigen::MatrixXd::NullaryExpr(k, 3, [&]() { return rng.gaussian(); });
    Eigen::MatrixXd cost(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        cost(i, j) = (a.centroids.row(i) - b.centroids.row(j)).squaredNorm();
    const std::vector<int> got = match_clusters(a, b);
    const std::vector<int> want = testutil::brute_force_match(cost);
    double got_cost = 0.0, want_cost = 0.0;
    for (int i = 0; i < k; ++i) {
      got_cost += cost(i, got[static_cast<std::size_t>(i)]);
      want_cost += cost(i, want[static_cast<std::size_t>(i)]);
    }
    ASSERT_NEAR(got_cost, want_cost, 1e-12 * std::max(1.0, want_cost)) << "trial " << trial;
  }
}

TEST(Kmeans, AlignToRecoversPermutation) {
  Rng rng(23);
  ClusteringResult a;
  a.k = 4;
  a.centroids = Eigen::MatrixXd::NullaryExpr(4, 2, [&]() { return 3.0 * rng.gaussian(); });
  a.labels = {0, 1, 2, 3, 0, 1};

  // b is a with clusters renamed by a fixed permutation.
  const std::vector<int> perm{2, 0, 3, 1};  // new index of old cluster i
  ClusteringResult b;
  b.k = 4;
  b.centroids.resize(4, 2);
  for (int i = 0; i < 4; ++i)
    b.centroids.row(perm[static_cast<std::size_t>(i)]) = a.centroids.row(i);
  b.labels.resize(a.labels.size());
  for (std::size_t i = 0; i < a.labels.size(); ++i)
    b.labels[i] = perm[static_cast<std::size_t>(a.labels[i])];

  const ClusteringResult aligned = align_to(a, b);
  EXPECT_EQ(aligned.labels, a.labels);
  EXPECT_LT((aligned.centroids - a.centroids).norm(), 1e-15);
}

TEST(Kmeans, KmeansppSpreadsInitialCentroids) {
  // On k well-separated tight blobs, kmeans++ must pick one seed per blob.
  MixtureData mix;
  const Dataset data = mixture_dataset(600, 4, 2, 12.0, 31, &mix);
  Rng rng = Rng(31).split(streams::kKmeansInit);
  const Eigen::MatrixXd init = detail::kmeanspp_init(data.points, 4, rng);
  std::vector<bool> blob_hit(4, false);
  for (int j = 0; j < 4; ++j) {
    Eigen::Index best = 0;
    (init.row(j).replicate(mix.means.rows(), 1) - mix.means)
        .rowwise()
        .norm()
        .minCoeff(&best);
    blob_hit[static_cast<std::size_t>(best)] = true;
  }
  EXPECT_EQ(std::count(blob_hit.begin(), blob_hit.end(), true), 4);
}

}  // namespace
}  // namespace dpkmeans
