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

#ifndef DPKMEANS_CORE_HPP_
#define DPKMEANS_CORE_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dpkmeans/error.hpp"

namespace dpkmeans {

// Immutable P x d matrix of feature vectors plus opaque per-row ids.
struct Dataset {
  Eigen::MatrixXd points;        // P x d
  std::vector<std::string> ids;  // length P

  Eigen::Index p() const { return points.rows(); }
  Eigen::Index d() const { return points.cols(); }
};

inline Dataset make_dataset(Eigen::MatrixXd points, std::vector<std::string> ids = {}) {
  require(points.rows() >= 2, "dataset needs at least 2 rows");
  require(points.cols() >= 1, "dataset needs at least 1 feature column");
  require(points.allFinite(), "dataset contains non-finite values");
  if (ids.empty()) {
    ids.resize(static_cast<std::size_t>(points.rows()));
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = "r" + std::to_string(i);
  }
  require(static_cast<Eigen::Index>(ids.size()) == points.rows(),
          "id count does not match row count");
  return Dataset{std::move(points), std::move(ids)};
}

// Dataset with row `removed` dropped; ids preserved for the survivors.
inline Dataset remove_point(const Dataset& data, Eigen::Index removed) {
  require(removed >= 0 && removed < data.p(), "removed index out of range");
  require(data.p() >= 3, "cannot remove a point from a 2-row dataset");
  Eigen::MatrixXd pts(data.p() - 1, data.d());
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(data.p() - 1));
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < data.p(); ++i) {
    if (i == removed) continue;
    pts.row(r++) = data.points.row(i);
    ids.push_back(data.ids[static_cast<std::size_t>(i)]);
  }
  return Dataset{std::move(pts), std::move(ids)};
}

// K centroids plus a label per point. The stacked form lays centroid k at
// rows [k*d, (k+1)*d) of a Kd vector.
struct ClusteringResult {
  Eigen::MatrixXd centroids;  // K x d
  std::vector<int> labels;    // length P, entries in [0, K)
  int k = 0;

  Eigen::VectorXd stacked() const {
    const Eigen::Index d = centroids.cols();
    Eigen::VectorXd out(static_cast<Eigen::Index>(k) * d);
    for (int c = 0; c < k; ++c) out.segment(c * d, d) = centroids.row(c).transpose();
    return out;
  }
};

// (epsilon, delta) privacy budget, composable by addition with delta
// clamped at 1 (delta is a probability bound).
struct PrivacyBudget {
  double epsilon = 0.0;
  double delta = 0.0;
};

inline void validate(const PrivacyBudget& b) {
  require(std::isfinite(b.epsilon) && b.epsilon >= 0.0, "budget epsilon must be >= 0");
  require(std::isfinite(b.delta) && b.delta >= 0.0 && b.delta <= 1.0,
          "budget delta must be in [0, 1]");
}

inline PrivacyBudget compose(const std::vector<PrivacyBudget>& budgets) {
  PrivacyBudget total;
  for (const auto& b : budgets) {
    validate(b);
    total.epsilon += b.epsilon;
    total.delta += b.delta;
  }
  total.delta = std::min(total.delta, 1.0);
  return total;
}

// Named budget components, composed exactly; serialized into run manifests.
class BudgetLedger {
 public:
  void charge(const std::string& name, const PrivacyBudget& b) {
    validate(b);
    entries_.emplace_back(name, b);
  }
  const std::vector<std::pair<std::string, PrivacyBudget>>& entries() const {
    return entries_;
  }
  PrivacyBudget total() const {
    std::vector<PrivacyBudget> bs;
    bs.reserve(entries_.size());
    for (const auto& e : entries_) bs.push_back(e.second);
    return compose(bs);
  }

 private:
  std::vector<std::pair<std::string, PrivacyBudget>> entries_;
};

}  // namespace dpkmeans

#endif  // DPKMEANS_CORE_HPP_
