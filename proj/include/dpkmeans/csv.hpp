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

#ifndef DPKMEANS_CSV_HPP_
#define DPKMEANS_CSV_HPP_

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dpkmeans/core.hpp"
#include "dpkmeans/error.hpp"

namespace dpkmeans {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

inline bool parse_double(std::string_view s, double* out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), *out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(*out);
}

// 17 significant digits round-trip any IEEE double exactly.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Reads a CSV where the first column is an opaque row id and the remaining
// columns are numeric features. A first row whose feature cells do not all
// parse as numbers is treated as a header and skipped.
inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open dataset file: " + path);

  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> header;
  Eigen::Index cols = -1;
  std::string line;
  std::size_t line_no = 0;
  bool first_data_candidate = true;
  const auto column_name = [&header](std::size_t c) {
    return c < header.size() ? header[c] : "column " + std::to_string(c + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    const auto cells = detail::split_csv_line(line);
    require(cells.size() >= 2, "row " + std::to_string(line_no) +
                                   ": need an id column plus at least one feature column");
    std::vector<double> vals(cells.size() - 1);
    bool all_numeric = true;
    std::size_t bad_col = 0;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      if (!detail::parse_double(cells[c], &vals[c - 1])) {
        all_numeric = false;
        bad_col = c;
        break;
      }
    }
    if (!all_numeric) {
      if (first_data_candidate) {
        first_data_candidate = false;  // header row
        header = cells;
        continue;
      }
      throw Error("row " + std::to_string(line_no) + " (id " + cells[0] + "), " +
                  column_name(bad_col) + ": cell does not parse as a finite number");
    }
    first_data_candidate = false;
    if (cols < 0) cols = static_cast<Eigen::Index>(vals.size());
    require(static_cast<Eigen::Index>(vals.size()) == cols,
            "row " + std::to_string(line_no) + " (id " + cells[0] + "): expected " +
                std::to_string(cols + 1) + " columns, got " + std::to_string(vals.size() + 1));
    ids.push_back(cells[0]);
    rows.push_back(std::move(vals));
  }
  require(rows.size() >= 2, "dataset needs at least 2 data rows, got " +
                                std::to_string(rows.size()));

  Eigen::MatrixXd pts(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (Eigen::Index c = 0; c < cols; ++c) pts(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
  return Dataset{std::move(pts), std::move(ids)};
}

// Writes a dataset as id,t0,...,t(d-1) with 17-significant-digit floats.
inline void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  require(out.good(), "cannot open for writing: " + path);
  out << "id";
  for (Eigen::Index c = 0; c < data.d(); ++c) out << ",t" << c;
  out << "\n";
  for (Eigen::Index r = 0; r < data.p(); ++r) {
    out << data.ids[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < data.d(); ++c)
      out << "," << detail::format_double(data.points(r, c));
    out << "\n";
  }
  require(out.good(), "write failed: " + path);
}

// Writes integer labels as id,label.
inline void write_labels_csv(const std::string& path, const std::vector<std::string>& ids,
                             const std::vector<int>& labels) {
  require(ids.size() == labels.size(), "ids and labels length mismatch");
  std::ofstream out(path);
  require(out.good(), "cannot open for writing: " + path);
  out << "id,label\n";
  for (std::size_t i = 0; i < ids.size(); ++i) out << ids[i] << "," << labels[i] << "\n";
  require(out.good(), "write failed: " + path);
}

inline std::vector<int> load_labels_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open labels file: " + path);
  std::vector<int> labels;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    const auto cells = detail::split_csv_line(line);
    require(cells.size() == 2, "labels file must have exactly id,label columns");
    if (first) {
      first = false;
      double v;
      if (!detail::parse_double(cells[1], &v)) continue;  // header
    }
    labels.push_back(std::stoi(cells[1]));
  }
  return labels;
}

}  // namespace dpkmeans

#endif  // DPKMEANS_CSV_HPP_
