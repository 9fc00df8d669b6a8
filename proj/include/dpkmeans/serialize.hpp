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

#ifndef DPKMEANS_SERIALIZE_HPP_
#define DPKMEANS_SERIALIZE_HPP_

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dpkmeans/audit.hpp"
#include "dpkmeans/core.hpp"
#include "dpkmeans/csv.hpp"
#include "dpkmeans/error.hpp"
#include "dpkmeans/gamma.hpp"
#include "dpkmeans/mechanisms.hpp"
#include "dpkmeans/sensitivity.hpp"
#include "dpkmeans/synth.hpp"

namespace dpkmeans {

using json = nlohmann::ordered_json;

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  require(j.is_array(), "expected a JSON array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  require(rows > 0, "matrix JSON is empty");
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    require(static_cast<Eigen::Index>(j[static_cast<std::size_t>(r)].size()) == cols,
            "ragged matrix JSON");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline json to_json(const ClusteringResult& r) {
  return json{{"centroids", matrix_to_json(r.centroids)}, {"labels", r.labels}};
}

inline ClusteringResult clustering_from_json(const json& j) {
  ClusteringResult r;
  r.centroids = matrix_from_json(j.at("centroids"));
  r.labels = j.at("labels").get<std::vector<int>>();
  r.k = static_cast<int>(r.centroids.rows());
  return r;
}

inline json to_json(const PrivacyBudget& b) {
  return json{{"epsilon", b.epsilon}, {"delta", b.delta}};
}

inline json to_json(const BudgetLedger& ledger) {
  json entries = json::array();
  for (const auto& [name, b] : ledger.entries())
    entries.push_back(json{{"name", name}, {"epsilon", b.epsilon}, {"delta", b.delta}});
  return json{{"components", std::move(entries)}, {"total", to_json(ledger.total())}};
}

inline json to_json(const SensitivityReport& s) {
  return json{{"delta_c", s.delta_c},
              {"delta_l", s.delta_l},
              {"sensitive_set", s.sensitive_set},
              {"neighbor_diffs", matrix_to_json(s.neighbor_diffs)}};
}

inline json to_json(const WhiteNoiseSpec& s) {
  return json{{"kind", "white"}, {"sigma", s.sigma}};
}

inline json to_json(const ColoredNoiseSpec& s) {
  return json{{"kind", "colored"},
              {"gamma_c", s.gamma_c},
              {"trace_inv", s.trace_inv},
              {"dual_gap", s.dual_gap},
              {"span_rank", s.span_rank},
              {"iterations", s.iterations},
              {"gamma", matrix_to_json(s.gamma)}};
}

inline json to_json(const NeighborAuditReport& r) {
  return json{{"epsilon", r.epsilon},
              {"delta_claimed", r.delta_claimed},
              {"prob_exceed", r.prob_exceed},
              {"stderr", r.mc_stderr},
              {"n_trials", r.n_trials},
              {"worst_neighbor_index", r.worst_neighbor_index},
              {"violated", r.violated}};
}

inline json to_json(const LeakageEstimate& e) {
  return json{{"epsilon", e.epsilon},
              {"prob_exceed", e.prob_exceed},
              {"stderr", e.mc_stderr},
              {"n_trials", e.n_trials}};
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  require(out.good(), "cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  require(out.good(), "write failed: " + path);
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open: " + path);
  return json::parse(in);
}

// FNV-1a 64-bit over the canonical config text; stamped into run manifests.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Synthetic profiles: cluster,sample_id,t0..t(d-1) rows.
inline void write_samples_csv(const std::string& path, const SynthOutput& synth) {
  std::ofstream out(path);
  require(out.good(), "cannot open for writing: " + path);
  out << "cluster,sample_id";
  for (Eigen::Index c = 0; c < synth.samples.cols(); ++c) out << ",t" << c;
  out << "\n";
  for (Eigen::Index r = 0; r < synth.samples.rows(); ++r) {
    out << synth.cluster_tag[static_cast<std::size_t>(r)] << ","
        << synth.sample_id[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < synth.samples.cols(); ++c)
      out << "," << detail::format_double(synth.samples(r, c));
    out << "\n";
  }
  require(out.good(), "write failed: " + path);
}

}  // namespace dpkmeans

#endif  // DPKMEANS_SERIALIZE_HPP_
