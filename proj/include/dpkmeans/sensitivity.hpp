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

#ifndef DPKMEANS_SENSITIVITY_HPP_
#define DPKMEANS_SENSITIVITY_HPP_

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <set>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "dpkmeans/core.hpp"
#include "dpkmeans/error.hpp"
#include "dpkmeans/kmeans.hpp"

namespace dpkmeans {

// Leave-one-out sensitivity summary. Column p of neighbor_diffs is the
// stacked centroid difference c(X) - c(X \ {x_p}) after cluster matching.
struct SensitivityReport {
  double delta_c = 0.0;              // max column norm of neighbor_diffs
  int delta_l = 0;                   // max per-removal changed-label count
  std::vector<int> sensitive_set;    // sorted union of changed-label points
  Eigen::MatrixXd neighbor_diffs;    // Kd x P
};

// Re-clusters X \ {x_removed}: Lloyd warm-started from base.centroids, run to
// the given tolerance, then aligned to base's cluster identities.
inline ClusteringResult neighbor_clustering(const Dataset& data, const ClusteringResult& base,
                                            Eigen::Index removed, double tol = 1e-9,
                                            int max_iters = 300) {
  require(base.k < data.p(), "removal would leave fewer points than clusters");
  const Dataset reduced = remove_point(data, removed);
  ClusteringResult refit =
      detail::lloyd(reduced.points, base.centroids, base.k, max_iters, tol);
  return align_to(base, refit);
}

namespace detail {

// Indices of surviving points whose label changed when `removed` was dropped.
inline std::vector<int> changed_labels(const ClusteringResult& base,
                                       const ClusteringResult& neighbor, Eigen::Index removed) {
  std::vector<int> changed;
  for (std::size_t q = 0; q < neighbor.labels.size(); ++q) {
    const std::size_t orig = q < static_cast<std::size_t>(removed) ? q : q + 1;
    if (neighbor.labels[q] != base.labels[orig]) changed.push_back(static_cast<int>(orig));
  }
  return changed;
}

}  // namespace detail

// Runs neighbor_clustering for every removal p in [P]. The P runs are
// independent; they are distributed over n_threads workers writing to
// disjoint slots, so the report is identical for any thread count.
inline SensitivityReport analyze(const Dataset& data, const ClusteringResult& base,
                                 double tol = 1e-9, int max_iters = 300,
                                 unsigned n_threads = std::thread::hardware_concurrency()) {
  const Eigen::Index p_count = data.p();
  const Eigen::Index kd = static_cast<Eigen::Index>(base.k) * data.d();
  require(static_cast<Eigen::Index>(base.labels.size()) == p_count,
          "base clustering does not match dataset");

  Eigen::MatrixXd diffs(kd, p_count);
  std::vector<std::vector<int>> changed(static_cast<std::size_t>(p_count));
  const Eigen::VectorXd base_stacked = base.stacked();

  std::atomic<Eigen::Index> next{0};
  auto worker = [&]() {
    for (;;) {
      const Eigen::Index p = next.fetch_add(1);
      if (p >= p_count) return;
      const ClusteringResult nb = neighbor_clustering(data, base, p, tol, max_iters);
      diffs.col(p) = base_stacked - nb.stacked();
      changed[static_cast<std::size_t>(p)] = detail::changed_labels(base, nb, p);
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const unsigned n = std::min<unsigned>(n_threads, static_cast<unsigned>(p_count));
    pool.reserve(n);
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SensitivityReport report;
  report.neighbor_diffs = std::move(diffs);
  for (Eigen::Index p = 0; p < p_count; ++p)
    report.delta_c = std::max(report.delta_c, report.neighbor_diffs.col(p).norm());
  std::set<int> sensitive;
  for (const auto& ch : changed) {
    report.delta_l = std::max(report.delta_l, static_cast<int>(ch.size()));
    sensitive.insert(ch.begin(), ch.end());
  }
  report.sensitive_set.assign(sensitive.begin(), sensitive.end());
  return report;
}

// Removes points whose mean distance to their k_nn nearest neighbors exceeds
// the given quantile (linear-interpolation sample quantile) of that statistic.
inline std::pair<Dataset, std::vector<Eigen::Index>> filter_outliers(const Dataset& data,
                                                                     int k_nn = 20,
                                                                     double threshold = 0.995) {
  require(threshold > 0.0 && threshold <= 1.0, "threshold quantile must be in (0, 1]");
  require(k_nn >= 1, "k_nn must be >= 1");
  require(k_nn < data.p(), "k_nn must be smaller than the number of points");

  const Eigen::Index p = data.p();
  Eigen::VectorXd stat(p);
  std::vector<double> dists(static_cast<std::size_t>(p - 1));
  for (Eigen::Index i = 0; i < p; ++i) {
    std::size_t w = 0;
    for (Eigen::Index j = 0; j < p; ++j)
      if (j != i) dists[w++] = (data.points.row(i) - data.points.row(j)).norm();
    std::nth_element(dists.begin(), dists.begin() + (k_nn - 1), dists.end());
    double s = 0.0;
    for (int m = 0; m < k_nn; ++m) s += dists[static_cast<std::size_t>(m)];
    stat[i] = s / static_cast<double>(k_nn);
  }

  std::vector<double> sorted(stat.data(), stat.data() + p);
  std::sort(sorted.begin(), sorted.end());
  const double h = threshold * static_cast<double>(p - 1);
  const auto lo = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(lo);
  const double cut = lo + 1 < sorted.size()
                         ? sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
                         : sorted.back();

  std::vector<Eigen::Index> removed;
  for (Eigen::Index i = 0; i < p; ++i)
    if (stat[i] > cut) removed.push_back(i);
  require(p - static_cast<Eigen::Index>(removed.size()) >= 2,
          "outlier filter would leave fewer than 2 points");

  Eigen::MatrixXd kept(p - static_cast<Eigen::Index>(removed.size()), data.d());
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(kept.rows()));
  Eigen::Index r = 0;
  std::size_t next_removed = 0;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (next_removed < removed.size() && removed[next_removed] == i) {
      ++next_removed;
      continue;
    }
    kept.row(r++) = data.points.row(i);
    ids.push_back(data.ids[static_cast<std::size_t>(i)]);
  }
  return {Dataset{std::move(kept), std::move(ids)}, std::move(removed)};
}

}  // namespace dpkmeans

#endif  // DPKMEANS_SENSITIVITY_HPP_
