// Copyright 2026 The bbl Authors.
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

#include "bbl/stats.h"

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "bbl/error.h"
#include "published_pvalues.h"

namespace bbl::stats {
namespace {

std::vector<double> Normal(int n, double mean, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(mean, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

std::vector<double> Linspace(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  return v;
}

TEST(Ks, MethodDominatesBaseline) {
  const auto base = Linspace(0.50, 0.60, 15);
  const auto method = Linspace(0.70, 0.80, 15);
  const auto r = ks_one_sided(method, base);
  EXPECT_EQ(r.d, 0.0);
  EXPECT_EQ(r.p, 1.0);
}

TEST(Ks, MethodBelowBaseline) {
  const auto base = Linspace(0.70, 0.80, 15);
  const auto method = Linspace(0.50, 0.60, 15);
  const auto r = ks_one_sided(method, base);
  EXPECT_EQ(r.d, 1.0);
  EXPECT_NEAR(r.p, std::exp(-15.0), 1e-18);
  EXPECT_LT(r.p, 0.05);
}

TEST(Ks, IdenticalSamplesAgreeWithPermutation) {
  const auto v = Normal(15, 0.8, 0.03, 1);
  const auto r = ks_one_sided(v, v);
  EXPECT_EQ(r.d, 0.0);
  EXPECT_NEAR(r.p, ks_permutation_p(v, v, 10000, 3), 0.02);
}

TEST(Ks, TiesUseMergedSupport) {
  const std::vector<double> method = {0.5, 0.5, 0.7};
  const std::vector<double> base = {0.5, 0.7, 0.7};
  // At 0.5: F_method = 2/3, F_base = 1/3.
  EXPECT_NEAR(ks_statistic(method, base), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(ks_statistic(base, method), 0.0);
}

TEST(Ks, Validation) {
  const std::vector<double> one = {0.5};
  const std::vector<double> two = {0.5, 0.6};
  EXPECT_THROW(ks_one_sided(one, two), InvalidArgument);
  EXPECT_THROW(ks_one_sided(std::vector<double>{}, two), InvalidArgument);
  EXPECT_THROW(TrialSamples({0.5, 1.2}), InvalidArgument);
  EXPECT_THROW(TrialSamples({0.5}), InvalidArgument);
  EXPECT_EQ(ks_one_sided(TrialSamples({0.1, 0.2}), TrialSamples({0.3, 0.4})).d, 1.0);
}

TEST(Ks, StatisticAndPRanges) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto a = Normal(7 + s % 9, 0.7, 0.05, 2 * s);
    const auto b = Normal(5 + s % 11, 0.72, 0.05, 2 * s + 1);
    const auto r = ks_one_sided(a, b);
    EXPECT_GE(r.d, 0.0);
    EXPECT_LE(r.d, 1.0);
    EXPECT_GE(r.p, 0.0);
    EXPECT_LE(r.p, 1.0);
  }
  double prev = 1.0;
  for (int i = 0; i <= 20; ++i) {
    const double p = ks_asymptotic_p(i / 20.0, 15, 15);
    EXPECT_LE(p, prev);
    prev = p;
  }
}

TEST(Ks, AntitoneInUniformShift) {
  const auto method = Normal(15, 0.7, 0.05, 7);
  const auto base = Normal(15, 0.7, 0.05, 8);
  double prev = ks_statistic(method, base);
  for (int k = 1; k <= 20; ++k) {
    auto shifted = method;
    for (auto& x : shifted) x += 0.005 * k;
    const double d = ks_statistic(shifted, base);
    EXPECT_LE(d, prev);
    prev = d;
  }
}

TEST(Permutation, Examples) {
  const auto base = Linspace(0.70, 0.80, 15);
  const auto method = Linspace(0.50, 0.60, 15);
  EXPECT_LE(ks_permutation_p(method, base, 100000, 1), 0.001);
  const std::vector<double> flat(15, 0.9);
  EXPECT_EQ(ks_permutation_p(flat, flat, 1000, 1), 1.0);
  EXPECT_THROW(ks_permutation_p(flat, flat, 999, 1), InvalidArgument);
}

TEST(Permutation, DeterministicAndThreadIndependent) {
  const auto a = Normal(15, 0.7, 0.05, 9);
  const auto b = Normal(15, 0.71, 0.05, 10);
  const double serial = ks_permutation_p(a, b, 20000, 5, 1);
  EXPECT_EQ(serial, ks_permutation_p(a, b, 20000, 5, 1));
  EXPECT_EQ(serial, ks_permutation_p(a, b, 20000, 5, 4));
  EXPECT_NE(serial, ks_permutation_p(a, b, 20000, 6, 1));
}

TEST(Permutation, CalibratedAgainstAsymptotic) {
  double mae = 0.0;
  for (int c = 0; c < 100; ++c) {
    const auto a = Normal(15, 0.8, 0.02, 1000 + 2 * c);
    const auto b = Normal(15, 0.8, 0.02, 1001 + 2 * c);
    mae += std::abs(ks_permutation_p(a, b, 10000, c) - ks_one_sided(a, b).p) / 100.0;
  }
  EXPECT_LE(mae, 0.05);
}

TEST(BreakingPoint, PublishedRows) {
  const auto grid = testing::PublishedGrid();
  ASSERT_EQ(grid.size(), 27u);
  for (const auto& row : testing::PublishedRows()) {
    ASSERT_EQ(row.p_values.size(), grid.size()) << row.method;
    const auto bp = detect_breaking_point(grid, row.p_values);
    ASSERT_TRUE(bp.has_value()) << row.method;
    EXPECT_DOUBLE_EQ(*bp, row.breaking_point) << row.method;
  }
}

TEST(BreakingPoint, EdgeCases) {
  const std::vector<double> grid = {0.0, 0.1, 0.2};
  EXPECT_FALSE(detect_breaking_point(grid, std::vector<double>(3, 1.0)).has_value());
  EXPECT_EQ(detect_breaking_point(grid, std::vector<double>{0.05, 0.2, 0.01}), 0.2);
  EXPECT_EQ(detect_breaking_point(grid, std::vector<double>{0.05, 0.06, 0.1}), 0.0);
  EXPECT_EQ(detect_breaking_point(grid, std::vector<double>{0.5, 0.1, 0.3}, 0.2), 0.1);
  EXPECT_THROW(detect_breaking_point(grid, std::vector<double>{0.1, 0.1}), InvalidArgument);
  const std::vector<double> unsorted = {0.0, 0.2, 0.1};
  EXPECT_THROW(detect_breaking_point(unsorted, std::vector<double>(3, 1.0)), InvalidArgument);
  EXPECT_THROW(detect_breaking_point(grid, std::vector<double>{0.1, 1.5, 0.1}),
               InvalidArgument);
}

BreakingPointReport SampleReport() {
  BreakingPointReport r;
  r.method = "LNL";
  r.bias_kind = "color_variance";
  r.level_name = "color_variance";
  r.grid = {0.0, 0.009, 0.01};
  r.bias_values = r.grid;
  r.p_values = {0.025, 0.045, 0.436};
  r.breaking_point = detect_breaking_point(r.grid, r.p_values);
  return r;
}

TEST(Report, JsonRoundTrip) {
  const auto r = SampleReport();
  EXPECT_NO_THROW(r.Validate());
  const auto back = BreakingPointReport::FromJson(nlohmann::json::parse(r.ToJson().dump()));
  EXPECT_EQ(back.ToJson(), r.ToJson());
  EXPECT_EQ(back.breaking_point, 0.009);
  auto none = r;
  none.p_values = {1.0, 1.0, 1.0};
  none.breaking_point.reset();
  EXPECT_TRUE(none.ToJson().at("breaking_point").is_null());
  EXPECT_FALSE(BreakingPointReport::FromJson(none.ToJson()).breaking_point.has_value());
  EXPECT_THROW(BreakingPointReport::FromJson(nlohmann::json::object()), FormatError);
}

TEST(Report, ValidateCatchesInconsistency) {
  auto r = SampleReport();
  r.breaking_point = 0.01;
  EXPECT_THROW(r.Validate(), InvalidArgument);
  r = SampleReport();
  r.p_values.pop_back();
  EXPECT_THROW(r.Validate(), InvalidArgument);
}

TEST(Report, CsvRows) {
  EXPECT_EQ(SampleReport().CsvRows(),
            "LNL,0,0.025,1\nLNL,0.009,0.045,1\nLNL,0.01,0.436,0\n");
  EXPECT_STREQ(kBreakingPointCsvHeader, "method,level,p,rejected");
}

}  // namespace
}  // namespace bbl::stats
