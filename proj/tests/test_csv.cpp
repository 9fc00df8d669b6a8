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

#include "dpkmeans/csv.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "dpkmeans/error.hpp"

namespace dpkmeans {
namespace {

class CsvTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("dpkmeans_csv_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& content) {
    const std::string path = (dir_ / name).string();
    std::ofstream out(path);
    out << content;
    return path;
  }

  std::filesystem::path dir_;
};

TEST_F(CsvTest, LoadsWithHeader) {
  const auto path = write("a.csv", "id,t0,t1\nr1,1.5,2.5\nr2,3.0,-4.0\n");
  const Dataset d = load_dataset(path);
  EXPECT_EQ(d.p(), 2);
  EXPECT_EQ(d.d(), 2);
  EXPECT_EQ(d.ids[0], "r1");
  EXPECT_EQ(d.points(1, 1), -4.0);
}

TEST_F(CsvTest, LoadsWithoutHeader) {
  const auto path = write("b.csv", "r1,1.5,2.5\nr2,3.0,-4.0\nr3,0,0\n");
  const Dataset d = load_dataset(path);
  EXPECT_EQ(d.p(), 3);
  EXPECT_EQ(d.ids[2], "r3");
}

TEST_F(CsvTest, RoundTripIsExact) {
  Eigen::MatrixXd pts(3, 2);
  pts << 0.1, -1.0 / 3.0, 1e-300, 1.7976931348623157e308, M_PI, -0.0;
  const Dataset d = make_dataset(pts);
  const auto path = (dir_ / "rt.csv").string();
  write_dataset_csv(path, d);
  const Dataset back = load_dataset(path);
  ASSERT_EQ(back.p(), 3);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) ASSERT_EQ(back.points(i, j), d.points(i, j));
  EXPECT_EQ(back.ids, d.ids);
}

TEST_F(CsvTest, RaggedRowNamesLocation) {
  const auto path = write("ragged.csv", "id,t0,t1\nr1,1,2\nr2,3\n");
  try {
    load_dataset(path);
    FAIL() << "expected Error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("r2"), std::string::npos) << e.what();
  }
}

TEST_F(CsvTest, NonNumericCellNamesRowAndColumn) {
  const auto path = write("bad.csv", "id,t0,t1\nr1,1,2\nr2,3,oops\n");
  try {
    load_dataset(path);
    FAIL() << "expected Error";
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("r2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("t1"), std::string::npos) << msg;
  }
}

TEST_F(CsvTest, RejectsTooFewRows) {
  const auto path = write("one.csv", "id,t0\nr1,1\n");
  EXPECT_THROW(load_dataset(path), Error);
}

TEST_F(CsvTest, RejectsNonFinite) {
  const auto path = write("inf.csv", "id,t0\nr1,1\nr2,inf\n");
  EXPECT_THROW(load_dataset(path), Error);
}

TEST_F(CsvTest, MissingFile) { EXPECT_THROW(load_dataset((dir_ / "nope.csv").string()), Error); }

TEST_F(CsvTest, ParseDoubleTrimsSpace) {
  double v = 0.0;
  EXPECT_TRUE(detail::parse_double(" 1.25 ", &v));
  EXPECT_EQ(v, 1.25);
  EXPECT_FALSE(detail::parse_double("1.25x", &v));
  EXPECT_FALSE(detail::parse_double("", &v));
  EXPECT_FALSE(detail::parse_double("nan", &v));
}

TEST_F(CsvTest, FormatDoubleRoundTrips) {
  for (const double v : {0.1, 1.0 / 3.0, 123456.789, 5e-324, 1.7976931348623157e308}) {
    double back = 0.0;
    ASSERT_TRUE(detail::parse_double(detail::format_double(v), &back));
    EXPECT_EQ(back, v);
  }
}

TEST_F(CsvTest, LabelsRoundTrip) {
  const auto path = (dir_ / "labels.csv").string();
  write_labels_csv(path, {"a", "b", "c"}, {2, 0, 1});
  EXPECT_EQ(load_labels_csv(path), (std::vector<int>{2, 0, 1}));
}

TEST_F(CsvTest, AutogeneratedIds) {
  Eigen::MatrixXd pts(2, 1);
  pts << 1, 2;
  const Dataset d = make_dataset(pts);
  EXPECT_EQ(d.ids[0], "r0");
  EXPECT_EQ(d.ids[1], "r1");
}

}  // namespace
}  // namespace dpkmeans
