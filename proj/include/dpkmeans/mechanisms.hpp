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

#ifndef DPKMEANS_MECHANISMS_HPP_
#define DPKMEANS_MECHANISMS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dpkmeans/core.hpp"
#include "dpkmeans/error.hpp"
#include "dpkmeans/gamma.hpp"
#include "dpkmeans/kmeans.hpp"
#include "dpkmeans/rng.hpp"
#include "dpkmeans/sensitivity.hpp"

namespace dpkmeans {

// Gaussian upper tail Q(x) = P(N(0,1) > x).
inline double gaussian_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

struct WhiteNoiseSpec {
  double sigma = 0.0;
};

// Minimal standard deviation of isotropic Gaussian noise that keeps the
// centroid query (epsilon, delta)-private at the given L2 sensitivity.
inline WhiteNoiseSpec white_sigma(double delta_c_sens, const PrivacyBudget& budget) {
  validate(budget);
  require(delta_c_sens >= 0.0 && std::isfinite(delta_c_sens), "sensitivity must be >= 0");
  require(budget.epsilon > 0.0, "white mechanism needs epsilon > 0");
  require(budget.delta > 0.0 && budget.delta < 1.0, "white mechanism needs delta in (0, 1)");
  return WhiteNoiseSpec{delta_c_sens / budget.epsilon *
                        std::sqrt(2.0 * std::log(2.0 / budget.delta))};
}

// c + i.i.d. N(0, sigma^2) per coordinate; labels untouched. Coordinates are
// drawn row by row over centroids so the stream layout is stable.
inline ClusteringResult perturb_centroids(const ClusteringResult& result,
                                          const WhiteNoiseSpec& spec, Rng& rng) {
  require(spec.sigma >= 0.0 && std::isfinite(spec.sigma), "sigma must be >= 0");
  ClusteringResult out = result;
  if (spec.sigma == 0.0) return out;
  for (Eigen::Index i = 0; i < out.centroids.rows(); ++i)
    for (Eigen::Index j = 0; j < out.centroids.cols(); ++j)
      out.centroids(i, j) += spec.sigma * rng.gaussian();
  return out;
}

// c + one draw of N(0, Gamma^{-1}) over the stacked Kd vector, via the
// eigenfactorization Gamma^{-1/2}; labels untouched.
inline ClusteringResult perturb_centroids(const ClusteringResult& result,
                                          const ColoredNoiseSpec& spec, Rng& rng) {
  const Eigen::Index d = result.centroids.cols();
  const Eigen::Index kd = static_cast<Eigen::Index>(result.k) * d;
  require(spec.gamma.rows() == kd && spec.gamma.cols() == kd,
          "gamma dimension does not match stacked centroids");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(spec.gamma);
  require(es.eigenvalues().minCoeff() > 0.0, "gamma must be positive definite");
  const Eigen::VectorXd noise = es.eigenvectors() *
                                es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                                es.eigenvectors().transpose() * rng.gaussian_vector(kd);
  ClusteringResult out = result;
  for (int c = 0; c < out.k; ++c)
    out.centroids.row(c) += noise.segment(static_cast<Eigen::Index>(c) * d, d).transpose();
  return out;
}

struct LabelNoiseSpec {
  double rho = 0.0;                // flip probability, in (0, 0.5)
  int k = 2;                       // label alphabet size
  std::vector<int> sensitive_set;  // points whose labels are randomized
  int delta_l = 0;                 // label sensitivity used for accounting
};

namespace detail {

inline void validate_label_params(double rho, int k) {
  require(k >= 2, "label mechanism needs k >= 2");
  require(rho > 0.0 && rho < 0.5, "label mechanism needs rho in (0, 0.5)");
}

}  // namespace detail

// Exact delta for the modulo-k label mechanism at privacy level epsilon_l.
//
// The leakage statistic between worst-case neighbors whose labels differ in
// delta_l positions is (M0 - Mc) * log((1/rho - 1)(k-1)), where M0 counts
// noise draws equal to 0 and Mc counts draws that cancel the label
// difference. (M0, Mc) is multinomial with cell probabilities
// (1 - rho, rho/(k-1), rho(k-2)/(k-1)) over delta_l draws, so
//   delta = P(M0 - Mc >= l),  l = epsilon_l / log((1/rho - 1)(k-1)),
// which is 0 exactly when l > delta_l. Evaluated in log-space so factorials
// survive delta_l of several hundred. For k = 2 the third cell has
// probability 0 and the sum collapses to a binomial over m0 with
// mc = delta_l - m0.
inline double label_delta(double rho, int k, int delta_l, double epsilon_l) {
  detail::validate_label_params(rho, k);
  require(delta_l >= 0, "delta_l must be >= 0");
  require(epsilon_l >= 0.0 && std::isfinite(epsilon_l), "epsilon_l must be >= 0");
  if (delta_l == 0) return 0.0;

  const double base = std::log((1.0 / rho - 1.0) * static_cast<double>(k - 1));
  const double l = epsilon_l / base;
  if (l > static_cast<double>(delta_l)) return 0.0;

  const double log_p0 = std::log1p(-rho);
  const double log_fact_n = std::lgamma(static_cast<double>(delta_l) + 1.0);
  double total = 0.0;

  if (k == 2) {
    const double log_pc = std::log(rho);
    for (int m0 = 0; m0 <= delta_l; ++m0) {
      const int mc = delta_l - m0;
      if (static_cast<double>(m0 - mc) < l) continue;
      const double lp = log_fact_n - std::lgamma(m0 + 1.0) - std::lgamma(mc + 1.0) +
                        m0 * log_p0 + mc * log_pc;
      total += std::exp(lp);
    }
    return std::min(total, 1.0);
  }

  const double log_pc = std::log(rho / static_cast<double>(k - 1));
  const double log_pr = std::log(rho * static_cast<double>(k - 2) / static_cast<double>(k - 1));
  for (int m0 = 0; m0 <= delta_l; ++m0) {
    for (int mc = 0; mc + m0 <= delta_l; ++mc) {
      if (static_cast<double>(m0 - mc) < l) continue;
      const int rest = delta_l - m0 - mc;
      const double lp = log_fact_n - std::lgamma(m0 + 1.0) - std::lgamma(mc + 1.0) -
                        std::lgamma(rest + 1.0) + m0 * log_p0 + mc * log_pc + rest * log_pr;
      total += std::exp(lp);
    }
  }
  return std::min(total, 1.0);
}

// Smallest rho at which the label mechanism satisfies (epsilon_l, 0), from
// inverting epsilon_l = delta_l * log((1-rho)(k-1)/rho). delta = 0 needs the
// worst-case leakage delta_l * log((1/rho - 1)(k-1)) strictly below
// epsilon_l, so the threshold value is pushed up by 1e-9 relative to hold
// under floating-point rounding. Requires epsilon_l/delta_l > log(k-1), the
// range where the solution satisfies rho < 0.5.
inline double solve_rho(int k, int delta_l, double epsilon_l) {
  require(k >= 2, "label mechanism needs k >= 2");
  require(delta_l >= 1, "solve_rho needs delta_l >= 1");
  require(epsilon_l > 0.0 && std::isfinite(epsilon_l), "epsilon_l must be positive");
  const double ratio = epsilon_l / static_cast<double>(delta_l);
  require(ratio > std::log(static_cast<double>(k - 1)),
          "epsilon_l too small for delta = 0 at this delta_l and k: needs "
          "epsilon_l/delta_l > log(k-1)");
  const double t = std::exp(ratio) / static_cast<double>(k - 1);
  const double rho = (1.0 + 1e-9) / (1.0 + t);
  require(rho < 0.5, "epsilon_l margin too thin: solved rho reached 0.5");
  return rho;
}

// Labels of points in the sensitive set are shifted by i.i.d. modulo-k noise
// with P(0) = 1 - rho and P(j) = rho/(k-1) for j != 0; all other labels and
// the centroids are untouched.
inline ClusteringResult perturb_labels(const ClusteringResult& result,
                                       const LabelNoiseSpec& spec, Rng& rng) {
  detail::validate_label_params(spec.rho, spec.k);
  require(spec.k == result.k, "label alphabet must match the clustering");
  ClusteringResult out = result;
  for (const int p : spec.sensitive_set) {
    require(p >= 0 && p < static_cast<int>(out.labels.size()), "sensitive index out of range");
    const double u = rng.uniform();
    if (u < 1.0 - spec.rho) continue;  // noise draw 0
    // Remaining mass is uniform over the k-1 nonzero shifts.
    const double rescaled = (u - (1.0 - spec.rho)) / spec.rho;
    int shift = 1 + static_cast<int>(rescaled * static_cast<double>(spec.k - 1));
    shift = std::min(shift, spec.k - 1);
    out.labels[static_cast<std::size_t>(p)] = (out.labels[static_cast<std::size_t>(p)] + shift) % spec.k;
  }
  return out;
}

enum class NoiseKind { kWhite, kColored };

// Full private clustering pipeline output. The composed budget charges
// (epsilon_c + epsilon_l, delta_c + delta_l) with delta_l computed exactly
// from (rho, k, label sensitivity).
struct DpKmeansOutput {
  ClusteringResult private_result;
  PrivacyBudget total_budget;
  SensitivityReport sensitivity;

  ClusteringResult base_result;
  WhiteNoiseSpec white;     // set when noise == kWhite
  ColoredNoiseSpec colored; // set when noise == kColored
  LabelNoiseSpec label;
  double achieved_delta_l = 0.0;
  BudgetLedger ledger;
};

// Pass rho = NaN to solve for the smallest rho with delta_l = 0 at the given
// label epsilon (when no labels are sensitive, any rho works and a nominal
// 0.25 is used).
inline DpKmeansOutput dp_kmeans(const Dataset& data, const KmeansConfig& cfg,
                                const PrivacyBudget& budget_c, const PrivacyBudget& budget_l,
                                NoiseKind noise, double rho, Rng& rng) {
  DpKmeansOutput out;
  out.base_result = cluster(data, cfg);
  out.sensitivity = analyze(data, out.base_result, cfg.tol, cfg.max_iters);
  if (std::isnan(rho)) {
    rho = out.sensitivity.delta_l >= 1
              ? solve_rho(cfg.k, out.sensitivity.delta_l, budget_l.epsilon)
              : 0.25;
  }

  Rng centroid_rng = rng.split(streams::kCentroidNoise);
  if (noise == NoiseKind::kWhite) {
    out.white = white_sigma(out.sensitivity.delta_c, budget_c);
    out.private_result = perturb_centroids(out.base_result, out.white, centroid_rng);
  } else {
    out.colored = optimize_gamma(out.sensitivity.neighbor_diffs, budget_c);
    out.private_result = perturb_centroids(out.base_result, out.colored, centroid_rng);
  }

  out.label = LabelNoiseSpec{rho, cfg.k, out.sensitivity.sensitive_set,
                             out.sensitivity.delta_l};
  out.achieved_delta_l = label_delta(rho, cfg.k, out.sensitivity.delta_l, budget_l.epsilon);
  Rng label_rng = rng.split(streams::kLabelNoise);
  out.private_result = perturb_labels(out.private_result, out.label, label_rng);

  out.ledger.charge("centroids", budget_c);
  out.ledger.charge("labels", PrivacyBudget{budget_l.epsilon, out.achieved_delta_l});
  out.total_budget = out.ledger.total();
  return out;
}

}  // namespace dpkmeans

#endif  // DPKMEANS_MECHANISMS_HPP_
