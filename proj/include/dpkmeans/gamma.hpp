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

#ifndef DPKMEANS_GAMMA_HPP_
#define DPKMEANS_GAMMA_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "dpkmeans/core.hpp"
#include "dpkmeans/error.hpp"

namespace dpkmeans {

// Precision matrix for the colored Gaussian centroid mechanism, from
//   minimize    Tr(Gamma^{-1})
//   subject to  v_i' Gamma v_i <= gamma_c   for every neighbor difference v_i
//   over        symmetric positive definite Gamma,
// with gamma_c = epsilon^2 / (2 log(2/delta)). Noise is drawn from
// N(0, Gamma^{-1}), so the objective is the total noise power and each
// constraint caps the leakage variance of one neighbor.
struct ColoredNoiseSpec {
  Eigen::MatrixXd gamma;  // Kd x Kd symmetric positive definite
  double gamma_c = 0.0;

  // Solver certificate and diagnostics.
  double trace_inv = 0.0;  // Tr(gamma^{-1}) of the returned matrix
  double dual_gap = 0.0;   // relative primal-dual gap on the span problem
  int span_rank = 0;       // rank of the constraint matrix
  int iterations = 0;
};

struct GammaOptions {
  int max_iters = 50000;
  double rel_tol = 1e-11;
  // Directions no neighbor difference spans are unconstrained; the problem
  // there is unbounded, so the precision on the orthogonal complement is
  // pinned to off_span_factor times the largest in-span precision.
  double off_span_factor = 1e6;
};

namespace detail {

// Symmetric eigendecomposition helpers for the dual iteration. R = sum_i
// lambda_i w_i w_i'; the dual objective is g(lambda) = 2 Tr(R^{1/2}) -
// gamma_c * sum(lambda) and the inner minimizer is Gamma = R^{-1/2}.
struct DualEval {
  double g = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd gamma;      // R^{-1/2}
  Eigen::VectorXd constraint; // w_i' gamma w_i per column
  double primal_feasible = std::numeric_limits<double>::infinity();
  bool singular = true;
};

inline DualEval eval_dual(const Eigen::MatrixXd& w, const Eigen::VectorXd& lambda,
                          double gamma_c) {
  const Eigen::Index r = w.rows();
  DualEval out;
  Eigen::MatrixXd rmat = Eigen::MatrixXd::Zero(r, r);
  for (Eigen::Index i = 0; i < w.cols(); ++i)
    if (lambda[i] > 0.0) rmat.noalias() += lambda[i] * w.col(i) * w.col(i).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rmat);
  const Eigen::VectorXd& ev = es.eigenvalues();
  if (ev[0] <= 0.0 || ev[0] < 1e-15 * ev[r - 1]) return out;  // R singular: reject step
  out.singular = false;
  Eigen::VectorXd sqrt_ev = ev.cwiseSqrt();
  out.g = 2.0 * sqrt_ev.sum() - gamma_c * lambda.sum();
  out.gamma = es.eigenvectors() * sqrt_ev.cwiseInverse().asDiagonal() *
              es.eigenvectors().transpose();
  out.constraint.resize(w.cols());
  for (Eigen::Index i = 0; i < w.cols(); ++i)
    out.constraint[i] = w.col(i).dot(out.gamma * w.col(i));
  // Scaling gamma by s = gamma_c / max constraint makes the worst constraint
  // tight (s < 1 restores feasibility, s > 1 tightens a slack iterate) and
  // gives Tr((s*gamma)^{-1}) = Tr(gamma^{-1}) / s = sum(sqrt_ev) / s.
  const double worst = out.constraint.maxCoeff();
  const double scale = gamma_c / worst;
  out.primal_feasible = sqrt_ev.sum() / scale;
  return out;
}

struct SpanSolution {
  Eigen::MatrixXd gamma;  // r x r, feasible
  double trace_inv = 0.0;
  double dual_gap = 0.0;
  int iterations = 0;
};

// Projected gradient ascent on the Lagrange dual over lambda >= 0, with a
// multiplicative warmup toward the KKT fixed point lambda_i * (w'Gw/gc - 1) = 0
// and a Barzilai-Borwein step with backtracking afterwards. The returned
// Gamma is the best feasible primal iterate; dual_gap certifies it.
inline SpanSolution solve_span(const Eigen::MatrixXd& w, double gamma_c,
                               const GammaOptions& opts) {
  const Eigen::Index pcols = w.cols();
  Eigen::VectorXd lambda = Eigen::VectorXd::Constant(pcols, 1.0);
  DualEval cur = eval_dual(w, lambda, gamma_c);
  require(!cur.singular, "constraint matrix lost rank inside the span solver");

  int iters = 0;
  for (int i = 0; i < 200; ++i, ++iters) {
    Eigen::VectorXd next_lambda = lambda;
    for (Eigen::Index j = 0; j < pcols; ++j)
      next_lambda[j] = std::max(lambda[j] * (cur.constraint[j] / gamma_c), 1e-300);
    DualEval next = eval_dual(w, next_lambda, gamma_c);
    if (next.singular) break;
    lambda = next_lambda;
    cur = next;
  }

  double best_primal = cur.primal_feasible;
  Eigen::MatrixXd best_gamma = cur.gamma * (gamma_c / cur.constraint.maxCoeff());
  double best_dual = cur.g;

  Eigen::VectorXd grad = cur.constraint.array() - gamma_c;
  Eigen::VectorXd prev_lambda = lambda;
  Eigen::VectorXd prev_grad = grad;
  double step = 1.0 / std::max(grad.norm(), 1e-12);

  for (; iters < opts.max_iters; ++iters) {
    best_dual = std::max(best_dual, cur.g);
    if (best_primal - best_dual <= opts.rel_tol * std::abs(best_primal)) break;

    Eigen::VectorXd cand_lambda;
    DualEval cand;
    double t = step;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      cand_lambda = (lambda + t * grad).cwiseMax(0.0);
      cand = eval_dual(w, cand_lambda, gamma_c);
      if (!cand.singular && cand.g > cur.g) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // stationary within line-search resolution

    prev_lambda = lambda;
    prev_grad = grad;
    lambda = cand_lambda;
    cur = cand;
    grad = cur.constraint.array() - gamma_c;

    if (cur.primal_feasible < best_primal) {
      best_primal = cur.primal_feasible;
      best_gamma = cur.gamma * (gamma_c / cur.constraint.maxCoeff());
    }

    const Eigen::VectorXd dl = lambda - prev_lambda;
    const Eigen::VectorXd dg = grad - prev_grad;
    const double dgg = dg.squaredNorm();
    step = dgg > 0.0 ? std::abs(dl.dot(dg)) / dgg : 2.0 * t;
    step = std::clamp(step, 1e-14, 1e14);
  }

  SpanSolution out;
  out.gamma = best_gamma;
  out.trace_inv = best_primal;
  out.dual_gap = (best_primal - best_dual) / std::max(std::abs(best_primal), 1e-300);
  out.iterations = iters;
  return out;
}

}  // namespace detail

inline ColoredNoiseSpec optimize_gamma(const Eigen::MatrixXd& neighbor_diffs,
                                       const PrivacyBudget& budget,
                                       const GammaOptions& opts = {}) {
  validate(budget);
  require(budget.epsilon > 0.0, "colored mechanism needs epsilon > 0");
  require(budget.delta > 0.0 && budget.delta < 1.0, "colored mechanism needs delta in (0, 1)");
  const Eigen::Index n = neighbor_diffs.rows();
  require(n >= 1, "neighbor_diffs must have at least one row");
  const double gamma_c = budget.epsilon * budget.epsilon / (2.0 * std::log(2.0 / budget.delta));

  // Zero columns constrain nothing and are dropped.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < neighbor_diffs.cols(); ++i)
    if (neighbor_diffs.col(i).norm() > 0.0) keep.push_back(i);

  ColoredNoiseSpec spec;
  spec.gamma_c = gamma_c;
  if (keep.empty()) {
    // Every neighbor difference is zero: the query leaks nothing and the
    // problem is unbounded, so only the documented off-span pin applies.
    const double prec = opts.off_span_factor / gamma_c;
    spec.gamma = prec * Eigen::MatrixXd::Identity(n, n);
    spec.trace_inv = static_cast<double>(n) / prec;
    spec.span_rank = 0;
    return spec;
  }

  Eigen::MatrixXd v(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) v.col(static_cast<Eigen::Index>(i)) = neighbor_diffs.col(keep[i]);

  // Restrict to the span of the constraints; the orthogonal complement is
  // unconstrained and gets the documented precision pin.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(v, Eigen::ComputeThinU);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double rank_tol = std::max(n, v.cols()) * std::numeric_limits<double>::epsilon() * sv[0];
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv[rank] > rank_tol) ++rank;
  const Eigen::MatrixXd u = svd.matrixU().leftCols(rank);
  const Eigen::MatrixXd w = u.transpose() * v;  // rank x P

  detail::SpanSolution span = detail::solve_span(w, gamma_c, opts);

  spec.span_rank = static_cast<int>(rank);
  spec.iterations = span.iterations;
  spec.dual_gap = span.dual_gap;
  if (rank == n) {
    spec.gamma = u * span.gamma * u.transpose();
    spec.trace_inv = span.trace_inv;
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(span.gamma);
    const double prec = opts.off_span_factor * es.eigenvalues().maxCoeff();
    spec.gamma = u * span.gamma * u.transpose() +
                 prec * (Eigen::MatrixXd::Identity(n, n) - u * u.transpose());
    spec.trace_inv = span.trace_inv + static_cast<double>(n - rank) / prec;
  }
  spec.gamma = 0.5 * (spec.gamma + spec.gamma.transpose());

  // The pin precision is several orders above the span precisions, so the
  // basis's float-level non-orthogonality can push recomputed constraints a
  // few 1e-7 past gamma_c. One global shrink restores feasibility on the
  // original constraint set; the trace cost is the same few 1e-7.
  double worst = 0.0;
  for (const Eigen::Index i : keep) {
    const double used = neighbor_diffs.col(i).dot(spec.gamma * neighbor_diffs.col(i));
    worst = std::max(worst, used);
  }
  if (worst > gamma_c) {
    const double shrink = gamma_c / worst;
    spec.gamma *= shrink;
    spec.trace_inv /= shrink;
    spec.dual_gap += 1.0 - shrink;
  }
  return spec;
}

}  // namespace dpkmeans

#endif  // DPKMEANS_GAMMA_HPP_
