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

#ifndef DPKMEANS_SYNTH_HPP_
#define DPKMEANS_SYNTH_HPP_

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpkmeans/core.hpp"
#include "dpkmeans/error.hpp"
#include "dpkmeans/mechanisms.hpp"
#include "dpkmeans/rng.hpp"

namespace dpkmeans {

// Per-cluster log-normal model: mu and sigma_mat describe log(x + alpha).
struct LogNormalClusterModel {
  Eigen::VectorXd mu;        // length d
  Eigen::MatrixXd sigma_mat; // d x d symmetric PSD
  double alpha = 0.0;
  Eigen::Index n_k = 0;
  bool diagonal_only = false;     // set when n_k < d + 1
  double min_eig_before_clip = 0.0;
  double mean_noise_sigma = 0.0;  // white noise level applied to mu
  double wishart_scale = 0.0;     // Wishart scale matrix multiplier
};

struct SynthOptions {
  // Wishart scale is wishart_scale_constant * B^2 / (n_k * epsilon_cov) with
  // B the largest row norm of the log-profiles; degrees of freedom d + 1.
  double wishart_scale_constant = 1.5;
  // Test instrumentation: skips the mean and covariance noise entirely.
  bool disable_noise = false;
};

// Smallest integer alpha that keeps every log argument at least 1.
inline double minimal_alpha(const Dataset& data) {
  return std::ceil(1.0 - data.points.minCoeff());
}

inline LogNormalClusterModel fit_cluster(const Dataset& data, const std::vector<int>& labels,
                                         int cluster_index, double alpha,
                                         const PrivacyBudget& budget_mean,
                                         const PrivacyBudget& budget_cov, Rng& rng,
                                         const SynthOptions& opts = {}) {
  require(static_cast<Eigen::Index>(labels.size()) == data.p(),
          "labels length does not match dataset");
  const Eigen::Index d = data.d();

  std::vector<Eigen::Index> members;
  for (Eigen::Index i = 0; i < data.p(); ++i)
    if (labels[static_cast<std::size_t>(i)] == cluster_index) members.push_back(i);
  const Eigen::Index n_k = static_cast<Eigen::Index>(members.size());
  require(n_k >= 1, "cluster " + std::to_string(cluster_index) + " is empty");
  require(n_k >= 2, "cluster " + std::to_string(cluster_index) +
                        " has a single point; cannot fit a distribution");

  Eigen::MatrixXd y(n_k, d);
  for (Eigen::Index r = 0; r < n_k; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      const double arg = data.points(members[static_cast<std::size_t>(r)], c) + alpha;
      if (arg <= 0.0) {
        throw Error("log argument <= 0 at row " +
                    data.ids[static_cast<std::size_t>(members[static_cast<std::size_t>(r)])] +
                    ", column " + std::to_string(c) + "; minimal feasible alpha is " +
                    std::to_string(minimal_alpha(data)));
      }
      y(r, c) = std::log(arg);
    }
  }

  LogNormalClusterModel model;
  model.alpha = alpha;
  model.n_k = n_k;

  const Eigen::VectorXd ybar = y.colwise().mean();
  // Leave-one-out sensitivity of the in-cluster mean of log-profiles:
  // removing row p moves the mean by (ybar - y_p) / (n_k - 1).
  double mean_sens = 0.0;
  for (Eigen::Index r = 0; r < n_k; ++r)
    mean_sens = std::max(mean_sens, (y.row(r).transpose() - ybar).norm() /
                                        static_cast<double>(n_k - 1));

  model.mu = ybar;
  if (!opts.disable_noise) {
    const WhiteNoiseSpec mean_spec = white_sigma(mean_sens, budget_mean);
    model.mean_noise_sigma = mean_spec.sigma;
    Rng mean_rng = rng.split(1);
    model.mu += mean_spec.sigma * mean_rng.gaussian_vector(d);
  }

  const Eigen::MatrixXd centered = y.rowwise() - ybar.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n_k);
  model.diagonal_only = n_k < d + 1;

  if (!opts.disable_noise) {
    validate(budget_cov);
    require(budget_cov.epsilon > 0.0, "covariance noise needs epsilon > 0");
    const double b = y.rowwise().norm().maxCoeff();
    model.wishart_scale =
        opts.wishart_scale_constant * b * b / (static_cast<double>(n_k) * budget_cov.epsilon);
    // Wishart draw with d+1 degrees of freedom and scale s*I via the Bartlett
    // factorization: W = s * A A' with A lower triangular, diagonal entries
    // sqrt(chi^2_{df - i}) and subdiagonal entries standard normal.
    Rng cov_rng = rng.split(2);
    const int df = static_cast<int>(d) + 1;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      a(i, i) = std::sqrt(cov_rng.chi_squared(df - static_cast<int>(i)));
      for (Eigen::Index j = 0; j < i; ++j) a(i, j) = cov_rng.gaussian();
    }
    const Eigen::MatrixXd wishart = model.wishart_scale * a * a.transpose();
    cov += wishart;
  }

  if (model.diagonal_only) cov = cov.diagonal().asDiagonal();

  // PSD projection by eigenvalue clipping at 0.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  model.min_eig_before_clip = es.eigenvalues().minCoeff();
  const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
  model.sigma_mat =
      es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
  model.sigma_mat = 0.5 * (model.sigma_mat + model.sigma_mat.transpose());
  return model;
}

// n draws: exp(mvn(mu, sigma_mat)) - alpha, one profile per row.
inline Eigen::MatrixXd sample_profiles(const LogNormalClusterModel& model, Eigen::Index n,
                                       Rng& rng) {
  require(n >= 0, "sample count must be >= 0");
  const Eigen::Index d = model.mu.size();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.sigma_mat);
  require(es.eigenvalues().minCoeff() >= -1e-10 * std::abs(es.eigenvalues().maxCoeff()),
          "sigma_mat is not positive semidefinite");
  const Eigen::MatrixXd factor =
      es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  Eigen::MatrixXd out(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd z = model.mu + factor * rng.gaussian_vector(d);
    out.row(i) = (z.array().exp() - model.alpha).transpose();
  }
  return out;
}

struct SynthBudgets {
  PrivacyBudget mean_each;      // charged once per cluster
  PrivacyBudget cov_each;       // charged once per cluster
  PrivacyBudget upstream;       // clustering budget already spent on labels/centroids
};

struct SynthOutput {
  Eigen::MatrixXd samples;          // total_count x d
  std::vector<int> cluster_tag;     // per sample
  std::vector<int> sample_id;       // per sample, numbered within its cluster
  std::vector<LogNormalClusterModel> models;
  PrivacyBudget total_budget;
  BudgetLedger ledger;
};

// Fits and samples every cluster. Budgets compose exactly: one mean and one
// covariance charge per cluster plus the upstream clustering charge.
inline SynthOutput generate_all(const Dataset& data, const ClusteringResult& clustering,
                                const std::vector<Eigen::Index>& counts, double alpha,
                                const SynthBudgets& budgets, Rng& rng,
                                const SynthOptions& opts = {}) {
  require(static_cast<int>(counts.size()) == clustering.k,
          "counts length must equal the cluster count");
  SynthOutput out;
  Eigen::Index total = 0;
  for (const Eigen::Index c : counts) {
    require(c >= 0, "sample counts must be >= 0");
    total += c;
  }
  out.samples.resize(total, data.d());
  out.cluster_tag.reserve(static_cast<std::size_t>(total));
  out.sample_id.reserve(static_cast<std::size_t>(total));

  Rng synth_rng = rng.split(streams::kSynth);
  Eigen::Index row = 0;
  for (int k = 0; k < clustering.k; ++k) {
    Rng cluster_rng = synth_rng.split(static_cast<std::uint64_t>(k));
    LogNormalClusterModel model = fit_cluster(data, clustering.labels, k, alpha,
                                              budgets.mean_each, budgets.cov_each,
                                              cluster_rng, opts);
    if (!opts.disable_noise) {
      out.ledger.charge("mean_cluster_" + std::to_string(k), budgets.mean_each);
      out.ledger.charge("cov_cluster_" + std::to_string(k), budgets.cov_each);
    }
    Rng sample_rng = cluster_rng.split(3);
    const Eigen::MatrixXd draws =
        sample_profiles(model, counts[static_cast<std::size_t>(k)], sample_rng);
    for (Eigen::Index i = 0; i < draws.rows(); ++i, ++row) {
      out.samples.row(row) = draws.row(i);
      out.cluster_tag.push_back(k);
      out.sample_id.push_back(static_cast<int>(i));
    }
    out.models.push_back(std::move(model));
  }
  if (budgets.upstream.epsilon > 0.0 || budgets.upstream.delta > 0.0)
    out.ledger.charge("clustering_upstream", budgets.upstream);
  out.total_budget = out.ledger.total();
  return out;
}

}  // namespace dpkmeans

#endif  // DPKMEANS_SYNTH_HPP_
