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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpkmeans/audit.hpp"
#include "dpkmeans/core.hpp"
#include "dpkmeans/csv.hpp"
#include "dpkmeans/datasets.hpp"
#include "dpkmeans/kmeans.hpp"
#include "dpkmeans/mechanisms.hpp"
#include "dpkmeans/sensitivity.hpp"
#include "dpkmeans/serialize.hpp"
#include "dpkmeans/synth.hpp"

namespace {

using dpkmeans::json;

struct CommonOpts {
  std::string input;
  std::string out = ".";
  int k = 6;
  double eps_c = 30.0;
  double delta_c = 0.2;
  double eps_l = 30.0;
  double rho = std::numeric_limits<double>::quiet_NaN();  // NaN: solve for delta_l = 0
  std::string noise = "colored";
  double alpha = std::numeric_limits<double>::quiet_NaN();  // NaN: minimal feasible
  std::uint64_t seed = 0;
  double tol = 1e-9;
  int max_iters = 300;
  std::int64_t trials = 100000;
  bool filter = false;
  int knn = 20;
  double quantile = 0.995;
  std::string config;
};

// Flat key=value config file, applied after the command line so flags win.
// CLI11's own set_config only fires on the top-level app, not on subcommands,
// so the values are replayed through each option's parser by hand.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  std::ifstream in(path);
  dpkmeans::require(in.good(), "cannot open config file: " + path);
  const auto trim = [](const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    dpkmeans::require(eq != std::string::npos,
                      path + " line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
        value.back() == value.front())
      value = value.substr(1, value.size() - 2);
    CLI::Option* op = cmd->get_option_no_throw("--" + key);
    dpkmeans::require(op != nullptr, path + " line " + std::to_string(lineno) +
                                         ": unknown key \"" + key + "\"");
    if (key == "config" || op->count() > 0) continue;
    op->add_result(value);
    op->run_callback();
  }
}

void add_common_flags(CLI::App* cmd, CommonOpts* o) {
  // Presence of --input is checked at load time, not via required(), so a
  // config file can supply it too.
  cmd->add_option("--input", o->input, "Input CSV: id column plus feature columns");
  cmd->add_option("--k", o->k, "Number of clusters");
  cmd->add_option("--eps-c", o->eps_c, "Centroid privacy epsilon");
  cmd->add_option("--delta-c", o->delta_c, "Centroid privacy delta");
  cmd->add_option("--eps-l", o->eps_l, "Label privacy epsilon");
  cmd->add_option("--rho", o->rho, "Label flip probability; omit to solve for delta_l = 0");
  cmd->add_option("--noise", o->noise, "Centroid noise kind")
      ->check(CLI::IsMember({"white", "colored"}));
  cmd->add_option("--seed", o->seed, "Global seed; all randomness derives from it");
  cmd->add_option("--out", o->out, "Output directory");
  cmd->add_option("--tol", o->tol, "Centroid movement convergence tolerance");
  cmd->add_option("--max-iters", o->max_iters, "Lloyd iteration cap");
  cmd->add_option("--trials", o->trials, "Monte-Carlo trials for leakage audits");
  cmd->add_flag("--filter-outliers", o->filter, "Drop k-NN distance outliers before clustering");
  cmd->add_option("--knn", o->knn, "Neighbor count for the outlier filter");
  cmd->add_option("--quantile", o->quantile, "Outlier filter quantile threshold");
  cmd->add_option("--config", o->config, "Flat key=value config file; flags take precedence");
}

std::string canonical_config(const std::string& command, const CommonOpts& o) {
  std::ostringstream s;
  s << command << "|input=" << o.input << "|k=" << o.k << "|eps_c=" << o.eps_c
    << "|delta_c=" << o.delta_c << "|eps_l=" << o.eps_l << "|rho=" << o.rho
    << "|noise=" << o.noise << "|alpha=" << o.alpha << "|seed=" << o.seed
    << "|tol=" << o.tol << "|max_iters=" << o.max_iters << "|trials=" << o.trials
    << "|filter=" << o.filter << "|knn=" << o.knn << "|quantile=" << o.quantile;
  return s.str();
}

json manifest_base(const std::string& command, const CommonOpts& o) {
  return json{{"tool", "dpkmeans"},
              {"command", command},
              {"config_hash", dpkmeans::fnv1a_hex(canonical_config(command, o))},
              {"seed", o.seed}};
}

std::string out_path(const CommonOpts& o, const std::string& name) {
  std::filesystem::create_directories(o.out);
  return (std::filesystem::path(o.out) / name).string();
}

dpkmeans::Dataset load_filtered(const CommonOpts& o, json* manifest) {
  dpkmeans::require(!o.input.empty(), "--input is required (flag or config file)");
  dpkmeans::Dataset data = dpkmeans::load_dataset(o.input);
  if (!o.filter) return data;
  auto [kept, removed] = dpkmeans::filter_outliers(data, o.knn, o.quantile);
  json removed_ids = json::array();
  for (const Eigen::Index i : removed)
    removed_ids.push_back(data.ids[static_cast<std::size_t>(i)]);
  (*manifest)["outliers_removed"] = std::move(removed_ids);
  return std::move(kept);
}

int run_cluster(const CommonOpts& o) {
  json manifest = manifest_base("cluster", o);
  const dpkmeans::Dataset data = load_filtered(o, &manifest);
  const dpkmeans::KmeansConfig cfg{o.k, o.max_iters, o.tol, o.seed};
  const dpkmeans::PrivacyBudget budget_c{o.eps_c, o.delta_c};
  const dpkmeans::PrivacyBudget budget_l{o.eps_l, 0.0};
  const auto kind = o.noise == "white" ? dpkmeans::NoiseKind::kWhite
                                       : dpkmeans::NoiseKind::kColored;
  dpkmeans::Rng rng(o.seed);
  const dpkmeans::DpKmeansOutput result =
      dpkmeans::dp_kmeans(data, cfg, budget_c, budget_l, kind, o.rho, rng);

  dpkmeans::Rng audit_rng = rng.split(dpkmeans::streams::kAudit);
  dpkmeans::NeighborAuditReport leakage;
  if (kind == dpkmeans::NoiseKind::kWhite) {
    leakage = dpkmeans::audit_white_mechanism(result.sensitivity.neighbor_diffs,
                                              result.white.sigma, budget_c, o.trials,
                                              audit_rng);
  } else {
    leakage = dpkmeans::audit_colored_mechanism(result.sensitivity.neighbor_diffs,
                                                result.colored.gamma, budget_c, o.trials,
                                                audit_rng);
  }

  dpkmeans::write_json_file(out_path(o, "clustering.json"),
                            dpkmeans::to_json(result.private_result));
  dpkmeans::write_json_file(out_path(o, "sensitivity.json"),
                            dpkmeans::to_json(result.sensitivity));
  dpkmeans::write_json_file(out_path(o, "noise.json"),
                            kind == dpkmeans::NoiseKind::kWhite
                                ? dpkmeans::to_json(result.white)
                                : dpkmeans::to_json(result.colored));
  dpkmeans::write_json_file(out_path(o, "audit.json"), dpkmeans::to_json(leakage));
  dpkmeans::write_json_file(out_path(o, "budget.json"), dpkmeans::to_json(result.ledger));
  manifest["budget"] = dpkmeans::to_json(result.ledger);
  manifest["outputs"] = {"clustering.json", "sensitivity.json", "noise.json", "audit.json",
                         "budget.json"};
  dpkmeans::write_json_file(out_path(o, "manifest.json"), manifest);

  std::cout << "wrote " << o.out << ": private clustering with budget (epsilon="
            << result.total_budget.epsilon << ", delta=" << result.total_budget.delta
            << "), delta_c_sens=" << result.sensitivity.delta_c
            << ", delta_l=" << result.sensitivity.delta_l
            << ", |L|=" << result.sensitivity.sensitive_set.size() << "\n";
  if (leakage.violated) {
    std::cout << "warning: leakage audit exceeded the claimed delta ("
              << leakage.prob_exceed << " > " << leakage.delta_claimed << " + 3*"
              << leakage.mc_stderr << ")\n";
  }
  return 0;
}

int run_sensitivity(const CommonOpts& o) {
  json manifest = manifest_base("sensitivity", o);
  const dpkmeans::Dataset data = load_filtered(o, &manifest);
  const dpkmeans::KmeansConfig cfg{o.k, o.max_iters, o.tol, o.seed};
  const dpkmeans::ClusteringResult base = dpkmeans::cluster(data, cfg);
  const dpkmeans::SensitivityReport report =
      dpkmeans::analyze(data, base, o.tol, o.max_iters);

  dpkmeans::write_json_file(out_path(o, "clustering_base.json"), dpkmeans::to_json(base));
  dpkmeans::write_json_file(out_path(o, "sensitivity.json"), dpkmeans::to_json(report));
  manifest["outputs"] = {"clustering_base.json", "sensitivity.json"};
  dpkmeans::write_json_file(out_path(o, "manifest.json"), manifest);
  std::cout << "wrote " << o.out << ": delta_c_sens=" << report.delta_c
            << ", delta_l=" << report.delta_l << ", |L|=" << report.sensitive_set.size()
            << "\n";
  return 0;
}

int run_synth(const CommonOpts& o, const std::string& counts_csv, Eigen::Index per_cluster,
              Eigen::Index total, double eps_mean, double delta_mean, double eps_cov) {
  json manifest = manifest_base("synth", o);
  const dpkmeans::Dataset data = load_filtered(o, &manifest);
  const double alpha = std::isnan(o.alpha) ? dpkmeans::minimal_alpha(data) : o.alpha;

  const dpkmeans::KmeansConfig cfg{o.k, o.max_iters, o.tol, o.seed};
  const auto kind = o.noise == "white" ? dpkmeans::NoiseKind::kWhite
                                       : dpkmeans::NoiseKind::kColored;
  dpkmeans::Rng rng(o.seed);
  const dpkmeans::DpKmeansOutput dp = dpkmeans::dp_kmeans(
      data, cfg, {o.eps_c, o.delta_c}, {o.eps_l, 0.0}, kind, o.rho, rng);

  std::vector<Eigen::Index> counts(static_cast<std::size_t>(o.k), per_cluster);
  if (!counts_csv.empty()) {
    counts.clear();
    std::stringstream ss(counts_csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) counts.push_back(std::stoll(cell));
    dpkmeans::require(static_cast<int>(counts.size()) == o.k,
                      "--counts must list one value per cluster");
  } else if (total > 0) {
    // Proportional allocation by cluster population, largest remainder.
    std::vector<Eigen::Index> sizes(static_cast<std::size_t>(o.k), 0);
    for (const int l : dp.private_result.labels) ++sizes[static_cast<std::size_t>(l)];
    std::vector<std::pair<double, int>> rema;
    Eigen::Index assigned = 0;
    for (int k = 0; k < o.k; ++k) {
      const double exact = static_cast<double>(total) *
                           static_cast<double>(sizes[static_cast<std::size_t>(k)]) /
                           static_cast<double>(data.p());
      counts[static_cast<std::size_t>(k)] = static_cast<Eigen::Index>(exact);
      assigned += counts[static_cast<std::size_t>(k)];
      rema.emplace_back(exact - std::floor(exact), k);
    }
    std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    for (Eigen::Index i = 0; assigned < total; ++assigned, ++i)
      ++counts[static_cast<std::size_t>(rema[static_cast<std::size_t>(i % rema.size())].second)];
  }

  const dpkmeans::SynthBudgets budgets{{eps_mean, delta_mean}, {eps_cov, 0.0},
                                       dp.total_budget};
  const dpkmeans::SynthOutput synth = dpkmeans::generate_all(
      data, dp.private_result, counts, alpha, budgets, rng);

  dpkmeans::write_samples_csv(out_path(o, "samples.csv"), synth);
  json models = json::array();
  for (std::size_t k = 0; k < synth.models.size(); ++k) {
    const auto& m = synth.models[k];
    models.push_back(json{{"cluster", k},
                          {"n_k", m.n_k},
                          {"alpha", m.alpha},
                          {"diagonal_only", m.diagonal_only},
                          {"mean_noise_sigma", m.mean_noise_sigma},
                          {"wishart_scale", m.wishart_scale},
                          {"wishart_dof", data.d() + 1},
                          {"min_eig_before_clip", m.min_eig_before_clip},
                          {"mu", std::vector<double>(m.mu.data(), m.mu.data() + m.mu.size())}});
  }
  dpkmeans::write_json_file(
      out_path(o, "models.json"),
      json{{"alpha", alpha}, {"models", std::move(models)}});
  dpkmeans::write_json_file(out_path(o, "budget.json"), dpkmeans::to_json(synth.ledger));
  manifest["budget"] = dpkmeans::to_json(synth.ledger);
  manifest["alpha"] = alpha;
  manifest["outputs"] = {"samples.csv", "models.json", "budget.json"};
  dpkmeans::write_json_file(out_path(o, "manifest.json"), manifest);
  std::cout << "wrote " << o.out << ": " << synth.samples.rows()
            << " synthetic profiles, total budget (epsilon=" << synth.total_budget.epsilon
            << ", delta=" << synth.total_budget.delta << ")\n";
  for (const auto& m : synth.models) {
    if (m.diagonal_only)
      std::cout << "warning: a cluster has fewer points than d+1; its covariance was fit "
                   "diagonal-only\n";
  }
  return 0;
}

int run_audit(const CommonOpts& o, double sigma_override, double filter_noise_sigma) {
  json manifest = manifest_base("audit", o);
  const dpkmeans::Dataset data = load_filtered(o, &manifest);
  const dpkmeans::KmeansConfig cfg{o.k, o.max_iters, o.tol, o.seed};
  const dpkmeans::ClusteringResult base = dpkmeans::cluster(data, cfg);
  const dpkmeans::SensitivityReport report =
      dpkmeans::analyze(data, base, o.tol, o.max_iters);
  const dpkmeans::PrivacyBudget budget_c{o.eps_c, o.delta_c};
  dpkmeans::Rng rng(o.seed);
  dpkmeans::Rng audit_rng = rng.split(dpkmeans::streams::kAudit);

  dpkmeans::NeighborAuditReport leakage;
  json noise_info;
  if (o.noise == "white") {
    const double sigma = std::isnan(sigma_override)
                             ? dpkmeans::white_sigma(report.delta_c, budget_c).sigma
                             : sigma_override;
    leakage = dpkmeans::audit_white_mechanism(report.neighbor_diffs, sigma, budget_c,
                                              o.trials, audit_rng);
    noise_info = json{{"kind", "white"},
                      {"sigma", sigma},
                      {"sigma_overridden", !std::isnan(sigma_override)}};
  } else {
    const dpkmeans::ColoredNoiseSpec spec =
        dpkmeans::optimize_gamma(report.neighbor_diffs, budget_c);
    leakage = dpkmeans::audit_colored_mechanism(report.neighbor_diffs, spec.gamma, budget_c,
                                                o.trials, audit_rng);
    noise_info = json{{"kind", "colored"},
                      {"gamma_c", spec.gamma_c},
                      {"trace_inv", spec.trace_inv},
                      {"dual_gap", spec.dual_gap}};
  }

  // Average-query reconstruction: drop the first record, publish both
  // averages, recover the record exactly.
  const Eigen::VectorXd q_full = data.points.colwise().mean();
  const Eigen::VectorXd q_minus =
      (data.points.colwise().sum() - data.points.row(0)).transpose() /
      static_cast<double>(data.p() - 1);
  const Eigen::VectorXd recovered = dpkmeans::infer_removed_point(q_full, q_minus, data.p());
  const double recon_err = (recovered - data.points.row(0).transpose()).norm() /
                           std::max(data.points.row(0).norm(), 1e-300);

  // Smoothing attack on white noise: a published profile plus white noise is
  // filtered back toward the clean curve. Short feature vectors carry no
  // trend worth smoothing, so fall back to a bundled daily load curve.
  const bool mean_is_series = data.d() >= 16;
  const Eigen::VectorXd clean =
      mean_is_series ? q_full : Eigen::VectorXd(dpkmeans::smooth_daily_profile(1440));
  dpkmeans::Rng filter_rng = audit_rng.split(9);
  Eigen::VectorXd noisy = clean;
  for (Eigen::Index i = 0; i < noisy.size(); ++i)
    noisy[i] += filter_noise_sigma * filter_rng.gaussian();
  const int window = dpkmeans::savgol_auto_window(noisy.size());
  const Eigen::VectorXd filtered = dpkmeans::savgol_filter(noisy, window, 1);
  const double rmse_noisy = std::sqrt((noisy - clean).squaredNorm() /
                                      static_cast<double>(clean.size()));
  const double rmse_filtered = std::sqrt((filtered - clean).squaredNorm() /
                                         static_cast<double>(clean.size()));

  json audit_out{
      {"leakage", dpkmeans::to_json(leakage)},
      {"noise", noise_info},
      {"reconstruction",
       {{"removed_id", data.ids[0]},
        {"relative_error", recon_err},
        {"recovered", std::vector<double>(recovered.data(), recovered.data() + recovered.size())}}},
      {"filtering",
       {{"series", mean_is_series ? "dataset_mean" : "daily_profile"},
        {"noise_sigma", filter_noise_sigma},
        {"window", window},
        {"order", 1},
        {"rmse_noisy", rmse_noisy},
        {"rmse_filtered", rmse_filtered},
        {"rmse_reduction", 1.0 - rmse_filtered / rmse_noisy}}}};
  dpkmeans::write_json_file(out_path(o, "audit.json"), audit_out);
  manifest["outputs"] = {"audit.json"};
  dpkmeans::write_json_file(out_path(o, "manifest.json"), manifest);

  std::cout << "leakage: worst neighbor " << leakage.worst_neighbor_index
            << " exceeds epsilon with probability " << leakage.prob_exceed << " (claimed delta "
            << leakage.delta_claimed << ")"
            << (leakage.violated ? " VIOLATION FLAGGED" : "") << "\n";
  std::cout << "reconstruction: removed record " << data.ids[0]
            << " recovered with relative error " << recon_err << "\n";
  std::cout << "filtering: rmse " << rmse_noisy << " -> " << rmse_filtered << " (window "
            << window << ")\n";
  return 0;
}

int run_mixture(const CommonOpts& o, Eigen::Index n, Eigen::Index d, double spread) {
  json manifest = manifest_base("mixture", o);
  const dpkmeans::MixtureData mix = dpkmeans::generate_mixture(n, o.k, d, spread, o.seed);
  std::vector<std::string> ids(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = "p" + std::to_string(i);
  dpkmeans::write_dataset_csv(out_path(o, "mixture.csv"),
                              dpkmeans::Dataset{mix.points, ids});
  dpkmeans::write_labels_csv(out_path(o, "mixture_labels.csv"), ids, mix.labels);
  manifest["n"] = n;
  manifest["d"] = d;
  manifest["spread"] = spread;
  manifest["outputs"] = {"mixture.csv", "mixture_labels.csv"};
  dpkmeans::write_json_file(out_path(o, "manifest.json"), manifest);
  std::cout << "wrote " << o.out << ": mixture with " << n << " points, " << o.k
            << " components\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private k-means clustering, synthesis, and auditing"};
  app.require_subcommand(1);

  CommonOpts cluster_opts;
  CLI::App* cmd_cluster = app.add_subcommand("cluster", "Private clustering of a dataset");
  add_common_flags(cmd_cluster, &cluster_opts);

  CommonOpts sens_opts;
  CLI::App* cmd_sens = app.add_subcommand("sensitivity", "Leave-one-out sensitivity report");
  add_common_flags(cmd_sens, &sens_opts);

  CommonOpts synth_opts;
  std::string counts_csv;
  Eigen::Index per_cluster = 15;
  Eigen::Index synth_total = 0;
  double eps_mean = 30.0, delta_mean = 0.2, eps_cov = 30.0;
  CLI::App* cmd_synth = app.add_subcommand("synth", "Generate synthetic load profiles");
  add_common_flags(cmd_synth, &synth_opts);
  cmd_synth->add_option("--alpha", synth_opts.alpha,
                        "Log shift; omit to use the minimal feasible value");
  cmd_synth->add_option("--counts", counts_csv, "Comma list of per-cluster sample counts");
  cmd_synth->add_option("--samples-per-cluster", per_cluster, "Uniform per-cluster count");
  cmd_synth->add_option("--total", synth_total,
                        "Total sample count, allocated by cluster population");
  cmd_synth->add_option("--eps-mean", eps_mean, "Per-cluster mean noise epsilon");
  cmd_synth->add_option("--delta-mean", delta_mean, "Per-cluster mean noise delta");
  cmd_synth->add_option("--eps-cov", eps_cov, "Per-cluster covariance noise epsilon");

  CommonOpts audit_opts;
  double sigma_override = std::numeric_limits<double>::quiet_NaN();
  double filter_noise_sigma = 0.75;
  CLI::App* cmd_audit = app.add_subcommand("audit", "Leakage, reconstruction, and filtering audits");
  add_common_flags(cmd_audit, &audit_opts);
  cmd_audit->add_option("--sigma", sigma_override,
                        "Audit this white noise level instead of the calibrated one");
  cmd_audit->add_option("--filter-sigma", filter_noise_sigma,
                        "White noise level for the smoothing demonstration");

  CommonOpts mix_opts;
  Eigen::Index mix_n = 1000, mix_d = 2;
  double spread = 5.0;
  CLI::App* cmd_mixture = app.add_subcommand("mixture", "Write a Gaussian mixture dataset");
  add_common_flags(cmd_mixture, &mix_opts);
  cmd_mixture->add_option("--n", mix_n, "Number of points");
  cmd_mixture->add_option("--d", mix_d, "Feature dimension");
  cmd_mixture->add_option("--spread", spread, "Component mean placement range");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto configure = [](CLI::App* cmd, const CommonOpts& o) {
      if (!o.config.empty()) apply_config_file(cmd, o.config);
    };
    if (cmd_cluster->parsed()) {
      configure(cmd_cluster, cluster_opts);
      return run_cluster(cluster_opts);
    }
    if (cmd_sens->parsed()) {
      configure(cmd_sens, sens_opts);
      return run_sensitivity(sens_opts);
    }
    if (cmd_synth->parsed()) {
      configure(cmd_synth, synth_opts);
      return run_synth(synth_opts, counts_csv, per_cluster, synth_total, eps_mean,
                       delta_mean, eps_cov);
    }
    if (cmd_audit->parsed()) {
      configure(cmd_audit, audit_opts);
      return run_audit(audit_opts, sigma_override, filter_noise_sigma);
    }
    if (cmd_mixture->parsed()) {
      configure(cmd_mixture, mix_opts);
      return run_mixture(mix_opts, mix_n, mix_d, spread);
    }
  } catch (const dpkmeans::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
