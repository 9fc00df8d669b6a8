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

#ifndef DPKMEANS_KMEANS_HPP_
#define DPKMEANS_KMEANS_HPP_

#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "dpkmeans/core.hpp"
#include "dpkmeans/error.hpp"
#include "dpkmeans/rng.hpp"

namespace dpkmeans {

namespace streams {
// Fixed labels for per-subsystem rng streams split off the global seed.
inline constexpr std::uint64_t kKmeansInit = 1;
inline constexpr std::uint64_t kCentroidNoise = 2;
inline constexpr std::uint64_t kLabelNoise = 3;
inline constexpr std::uint64_t kSynth = 4;
inline constexpr std::uint64_t kAudit = 5;
inline constexpr std::uint64_t kMixture = 6;
}  // namespace streams

struct KmeansConfig {
  int k = 1;
  int max_iters = 300;
  double tol = 1e-9;
  std::uint64_t seed = 0;
};

namespace detail {

// Nearest centroid per point, squared Euclidean, ties to the lowest index.
inline std::vector<int> assign_labels(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c) {
  const Eigen::Index p = x.rows();
  const int k = static_cast<int>(c.rows());
  std::vector<int> labels(static_cast<std::size_t>(p), 0);
  for (Eigen::Index i = 0; i < p; ++i) {
    double best = (x.row(i) - c.row(0)).squaredNorm();
    int arg = 0;
    for (int j = 1; j < k; ++j) {
      const double d2 = (x.row(i) - c.row(j)).squaredNorm();
      if (d2 < best) {
        best = d2;
        arg = j;
      }
    }
    labels[static_cast<std::size_t>(i)] = arg;
  }
  return labels;
}

// Means of assigned points; an emptied cluster is re-seeded at the point
// farthest from its previous centroid (ties to the lowest index).
inline Eigen::MatrixXd update_centroids(const Eigen::MatrixXd& x, const Eigen::MatrixXd& prev,
                                        const std::vector<int>& labels, int k) {
  const Eigen::Index d = x.cols();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, d);
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    sums.row(l) += x.row(i);
    ++counts[static_cast<std::size_t>(l)];
  }
  Eigen::MatrixXd next(k, d);
  for (int j = 0; j < k; ++j) {
    if (counts[static_cast<std::size_t>(j)] > 0) {
      next.row(j) = sums.row(j) / static_cast<double>(counts[static_cast<std::size_t>(j)]);
    } else {
      Eigen::Index far = 0;
      double best = -1.0;
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double d2 = (x.row(i) - prev.row(j)).squaredNorm();
        if (d2 > best) {
          best = d2;
          far = i;
        }
      }
      next.row(j) = x.row(far);
    }
  }
  return next;
}

inline Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& x, int k, Rng& rng) {
  const Eigen::Index p = x.rows();
  Eigen::MatrixXd c(k, x.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(p), false);
  const Eigen::Index first = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(p)));
  c.row(0) = x.row(first);
  chosen[static_cast<std::size_t>(first)] = true;
  Eigen::VectorXd d2(p);
  for (Eigen::Index i = 0; i < p; ++i) d2[i] = (x.row(i) - c.row(0)).squaredNorm();
  for (int j = 1; j < k; ++j) {
    const double total = d2.sum();
    Eigen::Index pick = -1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < p; ++i) {
        acc += d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
      if (pick < 0) pick = p - 1;
    } else {
      // All remaining distances zero (duplicate points): lowest unchosen index.
      for (Eigen::Index i = 0; i < p; ++i) {
        if (!chosen[static_cast<std::size_t>(i)]) {
          pick = i;
          break;
        }
      }
      if (pick < 0) pick = 0;
    }
    c.row(j) = x.row(pick);
    chosen[static_cast<std::size_t>(pick)] = true;
    for (Eigen::Index i = 0; i < p; ++i) {
      const double nd = (x.row(i) - c.row(j)).squaredNorm();
      if (nd < d2[i]) d2[i] = nd;
    }
  }
  return c;
}

// Lloyd iterations from given starting centroids. Stops at a fixed point:
// assignment stable and centroid movement <= tol, capped by max_iters.
inline ClusteringResult lloyd(const Eigen::MatrixXd& x, Eigen::MatrixXd c, int k,
                              int max_iters, double tol) {
  std::vector<int> labels = assign_labels(x, c);
  for (int iter = 0; iter < max_iters; ++iter) {
    const Eigen::MatrixXd next = update_centroids(x, c, labels, k);
    double moved = 0.0;
    for (int j = 0; j < k; ++j)
      moved = std::max(moved, (next.row(j) - c.row(j)).norm());
    c = next;
    std::vector<int> relabeled = assign_labels(x, c);
    const bool stable = (relabeled == labels);
    labels = std::move(relabeled);
    if (stable && moved <= tol) break;
  }
  return ClusteringResult{std::move(c), std::move(labels), k};
}

}  // namespace detail

inline ClusteringResult cluster(const Dataset& data, const KmeansConfig& cfg) {
  require(cfg.k >= 1, "k must be >= 1");
  require(cfg.k <= data.p(), "k exceeds the number of points");
  require(cfg.tol >= 0.0, "tol must be >= 0");
  Rng rng = Rng(cfg.seed).split(streams::kKmeansInit);
  Eigen::MatrixXd init = detail::kmeanspp_init(data.points, cfg.k, rng);
  return detail::lloyd(data.points, std::move(init), cfg.k, cfg.max_iters, cfg.tol);
}

// Mean squared distance of each point to its assigned centroid.
inline double clustering_loss(const Dataset& data, const ClusteringResult& result) {
  require(static_cast<Eigen::Index>(result.labels.size()) == data.p(),
          "labels length does not match dataset");
  require(result.centroids.cols() == data.d(), "centroid dimension mismatch");
  double s = 0.0;
  for (Eigen::Index i = 0; i < data.p(); ++i) {
    const int l = result.labels[static_cast<std::size_t>(i)];
    require(l >= 0 && l < result.k, "label out of range");
    s += (data.points.row(i) - result.centroids.row(l)).squaredNorm();
  }
  return s / static_cast<double>(data.p());
}

// Relative excess loss of a perturbed answer over the converged one.
inline double dp_accuracy_loss(const Dataset& data, const ClusteringResult& q,
                               const ClusteringResult& q_tilde) {
  const double r = clustering_loss(data, q);
  require(r > 0.0, "relative loss undefined: base clustering loss is 0");
  return (clustering_loss(data, q_tilde) - r) / r;
}

// Permutation pi minimizing sum_k ||a.centroids[k] - b.centroids[pi[k]]||^2,
// by the Hungarian algorithm on the squared-distance cost matrix.
inline std::vector<int> match_clusters(const ClusteringResult& a, const ClusteringResult& b) {
  require(a.k == b.k, "cluster counts differ");
  const int n = a.k;
  Eigen::MatrixXd cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cost(i, j) = (a.centroids.row(i) - b.centroids.row(j)).squaredNorm();

  // Hungarian algorithm with row/column potentials, O(n^3).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<int> match(static_cast<std::size_t>(n + 1), 0);  // column -> row (1-based)
  std::vector<int> way(static_cast<std::size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = match[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> perm(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) perm[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return perm;
}

// Applies match_clusters output: reorders b's centroids and re-indexes its
// labels so cluster identities line up with a's.
inline ClusteringResult align_to(const ClusteringResult& a, const ClusteringResult& b) {
  const std::vector<int> perm = match_clusters(a, b);
  ClusteringResult out;
  out.k = b.k;
  out.centroids.resize(b.centroids.rows(), b.centroids.cols());
  std::vector<int> inv(static_cast<std::size_t>(b.k), 0);
  for (int i = 0; i < b.k; ++i) {
    out.centroids.row(i) = b.centroids.row(perm[static_cast<std::size_t>(i)]);
    inv[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = i;
  }
  out.labels.resize(b.labels.size());
  for (std::size_t i = 0; i < b.labels.size(); ++i)
    out.labels[i] = inv[static_cast<std::size_t>(b.labels[i])];
  return out;
}

}  // namespace dpkmeans

#endif  // DPKMEANS_KMEANS_HPP_
