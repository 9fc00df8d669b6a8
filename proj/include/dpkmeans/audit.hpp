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

#ifndef DPKMEANS_AUDIT_HPP_
#define DPKMEANS_AUDIT_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dpkmeans/core.hpp"
#include "dpkmeans/error.hpp"
#include "dpkmeans/gamma.hpp"
#include "dpkmeans/mechanisms.hpp"
#include "dpkmeans/rng.hpp"

namespace dpkmeans {

// Exact reconstruction of a removed record from two average-query answers:
// if q_full averages p records and q_minus averages the same records minus
// one, the removed record is p*q_full - (p-1)*q_minus. Aggregation size
// offers no protection; this is the attack that aggregation-threshold rules
// fail to prevent.
inline Eigen::VectorXd infer_removed_point(const Eigen::VectorXd& q_full,
                                           const Eigen::VectorXd& q_minus, Eigen::Index p) {
  require(p >= 2, "attack needs an aggregate of at least 2 records");
  require(q_full.size() == q_minus.size(), "query answers must have equal length");
  return static_cast<double>(p) * q_full - static_cast<double>(p - 1) * q_minus;
}

// Least-squares local polynomial smoothing. Interior points use a shared
// centered window of the given (odd) size; edges refit the polynomial on the
// truncated window. An even window is rounded up to the next odd size.
inline Eigen::VectorXd savgol_filter(const Eigen::VectorXd& series, int window, int order) {
  const Eigen::Index n = series.size();
  if (window % 2 == 0) ++window;
  require(order >= 0, "order must be >= 0");
  require(order < window, "order must be smaller than the window");
  require(window <= n, "window exceeds the series length");

  const int half = window / 2;
  const int ncoef = order + 1;

  // Interior stencil: fit on offsets [-half, half], evaluate at offset 0.
  // The evaluated value is the first polynomial coefficient, so the stencil
  // weights are row 0 of (V'V)^{-1} V'.
  Eigen::MatrixXd vand(window, ncoef);
  for (int r = 0; r < window; ++r) {
    double t = 1.0;
    for (int c = 0; c < ncoef; ++c) {
      vand(r, c) = t;
      t *= static_cast<double>(r - half);
    }
  }
  const Eigen::VectorXd stencil =
      (vand.transpose() * vand).ldlt().solve(vand.transpose()).row(0).transpose();

  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, i - half);
    const Eigen::Index hi = std::min<Eigen::Index>(n - 1, i + half);
    if (hi - lo + 1 == window) {
      out[i] = stencil.dot(series.segment(lo, window));
      continue;
    }
    const Eigen::Index len = hi - lo + 1;
    const int fit_order = std::min<int>(order, static_cast<int>(len) - 1);
    Eigen::MatrixXd v(len, fit_order + 1);
    for (Eigen::Index r = 0; r < len; ++r) {
      double t = 1.0;
      for (int c = 0; c <= fit_order; ++c) {
        v(r, c) = t;
        t *= static_cast<double>(lo + r - i);
      }
    }
    const Eigen::VectorXd coef =
        (v.transpose() * v).ldlt().solve(v.transpose() * series.segment(lo, len));
    out[i] = coef[0];
  }
  return out;
}

// Window choice for the smoothing demonstration: the reference size of 300
// when the series is long enough, otherwise ~30% of the length, odd.
inline int savgol_auto_window(Eigen::Index series_length) {
  require(series_length >= 1, "series must be nonempty");
  int w = 300;
  if (w > series_length) w = std::max<int>(3, static_cast<int>(0.3 * static_cast<double>(series_length)));
  if (w % 2 == 0) ++w;
  if (w > series_length) w = static_cast<int>(series_length);
  if (w % 2 == 0) --w;  // never exceed the series, so round down here
  return w;
}

// Monte-Carlo estimate of Pr(L > epsilon) for one mechanism and neighbor
// pair, where draw_leakage samples the answer under X and returns the
// closed-form log-likelihood ratio against X'.
struct LeakageEstimate {
  double epsilon = 0.0;
  double prob_exceed = 0.0;
  double mc_stderr = 0.0;
  std::int64_t n_trials = 0;
};

template <typename DrawLeakage>
inline LeakageEstimate estimate_leakage(DrawLeakage&& draw_leakage, double epsilon,
                                        std::int64_t n_trials, Rng& rng) {
  require(n_trials >= 10000, "leakage estimate needs at least 1e4 trials");
  std::int64_t exceed = 0;
  for (std::int64_t t = 0; t < n_trials; ++t)
    if (draw_leakage(rng) > epsilon) ++exceed;
  LeakageEstimate est;
  est.epsilon = epsilon;
  est.n_trials = n_trials;
  est.prob_exceed = static_cast<double>(exceed) / static_cast<double>(n_trials);
  est.mc_stderr = std::sqrt(est.prob_exceed * (1.0 - est.prob_exceed) /
                            static_cast<double>(n_trials));
  return est;
}

// Leakage closure for the white centroid mechanism and neighbor difference v:
// under X the answer is c + sigma*g, and L = (v'g)/sigma + ||v||^2/(2 sigma^2).
inline auto white_leakage_closure(Eigen::VectorXd v, double sigma) {
  require(sigma > 0.0, "leakage undefined at sigma = 0");
  return [v = std::move(v), sigma](Rng& rng) {
    const double dot = v.dot(rng.gaussian_vector(v.size()));
    return dot / sigma + v.squaredNorm() / (2.0 * sigma * sigma);
  };
}

// Colored mechanism: answer c + Gamma^{-1/2} g, L = v'Gamma eta + v'Gamma v/2.
inline auto colored_leakage_closure(Eigen::VectorXd v, const Eigen::MatrixXd& gamma) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma);
  require(es.eigenvalues().minCoeff() > 0.0, "gamma must be positive definite");
  const Eigen::MatrixXd half = es.eigenvectors() *
                               es.eigenvalues().cwiseSqrt().asDiagonal() *
                               es.eigenvectors().transpose();  // Gamma^{1/2}
  Eigen::VectorXd w = half * v;  // v'Gamma eta = (Gamma^{1/2} v)' g
  const double shift = v.dot(gamma * v) / 2.0;
  return [w = std::move(w), shift](Rng& rng) {
    return w.dot(rng.gaussian_vector(w.size())) + shift;
  };
}

// Label mechanism between neighbors whose labels differ in n_diff sensitive
// positions: per differing position, L gains log f(nu) - log f(nu + c) with
// c != 0, which is +log((1/rho-1)(k-1)) when nu = 0, the negative of that
// when nu cancels c, and 0 otherwise.
inline auto label_leakage_closure(double rho, int k, int n_diff) {
  detail::validate_label_params(rho, k);
  require(n_diff >= 0, "n_diff must be >= 0");
  const double unit = std::log((1.0 / rho - 1.0) * static_cast<double>(k - 1));
  return [rho, k, n_diff, unit](Rng& rng) {
    double l = 0.0;
    for (int i = 0; i < n_diff; ++i) {
      const double u = rng.uniform();
      if (u < 1.0 - rho) {
        l += unit;  // nu = 0
      } else if (u < 1.0 - rho + rho / static_cast<double>(k - 1)) {
        l -= unit;  // nu cancels the label difference
      }
    }
    return l;
  };
}

// Exceedance audit of a centroid mechanism over every neighbor column, with
// shared noise draws across neighbors. For noise eta with precision Q
// (Q = I/sigma^2 for white), the leakage of neighbor v is
// L_v = (Qv)'eta + v'Qv/2; all neighbors are evaluated on the same eta
// block by one matrix product per block.
struct NeighborAuditReport {
  double epsilon = 0.0;
  double delta_claimed = 0.0;
  double prob_exceed = 0.0;  // worst neighbor
  double mc_stderr = 0.0;    // at the worst neighbor
  std::int64_t n_trials = 0;
  Eigen::Index worst_neighbor_index = -1;
  bool violated = false;     // prob_exceed > delta_claimed + 3 stderr
  Eigen::VectorXd per_neighbor_exceed;
};

inline NeighborAuditReport audit_centroid_mechanism(const Eigen::MatrixXd& neighbor_diffs,
                                                    const Eigen::MatrixXd& noise_factor,
                                                    const Eigen::MatrixXd& precision,
                                                    const PrivacyBudget& claimed,
                                                    std::int64_t n_trials, Rng& rng) {
  require(n_trials >= 10000, "audit needs at least 1e4 trials");
  const Eigen::Index kd = neighbor_diffs.rows();
  const Eigen::Index p = neighbor_diffs.cols();
  const Eigen::MatrixXd qv = precision * neighbor_diffs;           // kd x p
  Eigen::VectorXd shift(p);
  for (Eigen::Index i = 0; i < p; ++i)
    shift[i] = neighbor_diffs.col(i).dot(qv.col(i)) / 2.0;

  Eigen::VectorXi exceed = Eigen::VectorXi::Zero(p);
  const Eigen::Index block = 4096;
  Eigen::MatrixXd g(kd, block);
  for (std::int64_t done = 0; done < n_trials;) {
    const Eigen::Index cur = static_cast<Eigen::Index>(
        std::min<std::int64_t>(block, n_trials - done));
    for (Eigen::Index j = 0; j < cur; ++j)
      for (Eigen::Index i = 0; i < kd; ++i) g(i, j) = rng.gaussian();
    const Eigen::MatrixXd eta = noise_factor * g.leftCols(cur);     // kd x cur
    const Eigen::MatrixXd l = qv.transpose() * eta;                 // p x Cur
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = 0; j < cur; ++j)
        if (l(i, j) + shift[i] > claimed.epsilon) ++exceed[i];
    done += cur;
  }

  NeighborAuditReport report;
  report.epsilon = claimed.epsilon;
  report.delta_claimed = claimed.delta;
  report.n_trials = n_trials;
  report.per_neighbor_exceed =
      exceed.cast<double>() / static_cast<double>(n_trials);
  report.prob_exceed = report.per_neighbor_exceed.maxCoeff(&report.worst_neighbor_index);
  report.mc_stderr = std::sqrt(report.prob_exceed * (1.0 - report.prob_exceed) /
                               static_cast<double>(n_trials));
  report.violated = report.prob_exceed > claimed.delta + 3.0 * report.mc_stderr;
  return report;
}

inline NeighborAuditReport audit_white_mechanism(const Eigen::MatrixXd& neighbor_diffs,
                                                 double sigma, const PrivacyBudget& claimed,
                                                 std::int64_t n_trials, Rng& rng) {
  require(sigma > 0.0, "audit needs sigma > 0");
  const Eigen::Index kd = neighbor_diffs.rows();
  return audit_centroid_mechanism(
      neighbor_diffs, sigma * Eigen::MatrixXd::Identity(kd, kd),
      Eigen::MatrixXd::Identity(kd, kd) / (sigma * sigma), claimed, n_trials, rng);
}

inline NeighborAuditReport audit_colored_mechanism(const Eigen::MatrixXd& neighbor_diffs,
                                                   const Eigen::MatrixXd& gamma,
                                                   const PrivacyBudget& claimed,
                                                   std::int64_t n_trials, Rng& rng) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma);
  require(es.eigenvalues().minCoeff() > 0.0, "gamma must be positive definite");
  const Eigen::MatrixXd factor = es.eigenvectors() *
                                 es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                                 es.eigenvectors().transpose();  // Gamma^{-1/2}
  return audit_centroid_mechanism(neighbor_diffs, factor, gamma, claimed, n_trials, rng);
}

}  // namespace dpkmeans

#endif  // DPKMEANS_AUDIT_HPP_
