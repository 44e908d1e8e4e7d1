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

#include "bbl/harness.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "bbl/error.h"
#include "bbl/stats.h"

namespace bbl::harness {
namespace {

using debias::Method;

SweepConfig SmallConfig(std::vector<double> qs, std::vector<Method> methods, int trials) {
  SweepConfig cfg;
  cfg.task = Task::kGaussian;
  for (double q : qs) cfg.grid.push_back(data::BiasSpec::Make(data::BiasKind::kAgreementProb, q));
  cfg.methods = std::move(methods);
  cfg.trials = trials;
  cfg.base_seed = 77;
  cfg.train_n = 400;
  cfg.per_cell = 60;
  cfg.training.base.epochs = 2;
  return cfg;
}

int Count(const std::string& text, const std::string& needle) {
  int n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

std::filesystem::path TempPath(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("bbl_test_harness_" + name);
}

TEST(Config, CanonicalizeSortsByHya) {
  auto cfg = SmallConfig({0.5, 1.0, 0.9}, {Method::kBaseline}, 2);
  cfg.Canonicalize();
  ASSERT_EQ(cfg.grid.size(), 3u);
  EXPECT_EQ(cfg.grid[0].value, 1.0);
  EXPECT_EQ(cfg.grid[1].value, 0.9);
  EXPECT_EQ(cfg.grid[2].value, 0.5);
  EXPECT_EQ(LevelName(data::BiasKind::kAgreementProb), "hya_nats");
  EXPECT_EQ(LevelName(data::BiasKind::kColorVariance), "color_variance");
}

TEST(Config, Validation) {
  auto cfg = SmallConfig({1.0}, {Method::kBaseline}, 1);
  EXPECT_THROW(cfg.Validate(), InvalidArgument);
  cfg = SmallConfig({1.0}, {Method::kBaseline, Method::kBaseline}, 2);
  EXPECT_THROW(cfg.Validate(), InvalidArgument);
  cfg = SmallConfig({}, {Method::kBaseline}, 2);
  EXPECT_THROW(cfg.Validate(), InvalidArgument);
  cfg = SmallConfig({1.0}, {Method::kBaseline}, 2);
  cfg.estimator.kind = mi::EstimatorKind::kPlugin;
  EXPECT_THROW(cfg.Validate(), InvalidArgument);
  EXPECT_EQ(TaskFromString("colorized"), Task::kColorizedDigits);
  EXPECT_THROW(TaskFromString("celeba"), InvalidArgument);
}

TEST(Config, JsonRoundTripAndLambdas) {
  auto cfg = SmallConfig({1.0, 0.75}, {Method::kBaseline, Method::kLnlAdv}, 3);
  cfg.lambdas[Method::kLnlAdv] = 2.5;
  cfg.threads = 4;
  const auto doc = cfg.ToJson();
  EXPECT_FALSE(doc.contains("threads"));
  const auto back = SweepConfig::FromJson(doc);
  EXPECT_EQ(back.ToJson(), doc);
  EXPECT_EQ(cfg.MethodConfig(Method::kLnlAdv, 1).lambda, 2.5);
  EXPECT_EQ(cfg.MethodConfig(Method::kEnd, 1).lambda, debias::DefaultConfig(Method::kEnd).lambda);
  EXPECT_EQ(cfg.MethodConfig(Method::kEnd, 9).base.seed, 9u);
}

TEST(Seeds, DistinctPerCoordinate) {
  const auto s = TrialSeed(1, Method::kBaseline, 0, 0);
  EXPECT_EQ(s, TrialSeed(1, Method::kBaseline, 0, 0));
  EXPECT_NE(s, TrialSeed(1, Method::kEnd, 0, 0));
  EXPECT_NE(s, TrialSeed(1, Method::kBaseline, 1, 0));
  EXPECT_NE(s, TrialSeed(1, Method::kBaseline, 0, 1));
  EXPECT_NE(s, TrialSeed(2, Method::kBaseline, 0, 0));
}

TEST(TaskData, SharedAcrossMethodsAndBalanced) {
  auto cfg = SmallConfig({0.9}, {Method::kBaseline}, 2);
  const auto a = MakeTaskData(cfg, 0, 1);
  const auto b = MakeTaskData(cfg, 0, 1);
  EXPECT_EQ(data::EncodeContainer(a.train), data::EncodeContainer(b.train));
  EXPECT_EQ(a.train.size(), 400);
  EXPECT_EQ(a.eval.unbiased.size(), 4 * 60);
  EXPECT_EQ(a.eval.bias_conflicting.size(), 2 * 60);
  EXPECT_NE(data::EncodeContainer(MakeTaskData(cfg, 0, 0).train),
            data::EncodeContainer(a.train));
}

TEST(TaskData, OtherTasks) {
  SweepConfig cfg;
  cfg.task = Task::kTabularMix;
  cfg.grid = {data::BiasSpec::Make(data::BiasKind::kConflictFraction, 0.25)};
  cfg.methods = {Method::kBaseline};
  cfg.trials = 2;
  cfg.train_n = 400;
  cfg.per_cell = 50;
  const auto tab = MakeTaskData(cfg, 0, 0);
  EXPECT_EQ(tab.train.size(), 400);
  EXPECT_NEAR(data::empirical_hya(tab.train.targets, tab.train.attributes), 0.5623, 0.01);
  cfg.task = Task::kColorizedDigits;
  cfg.grid = {data::BiasSpec::Make(data::BiasKind::kColorVariance, 0.0)};
  cfg.per_cell = 2;
  const auto col = MakeTaskData(cfg, 0, 0);
  EXPECT_EQ(col.train.targets, col.train.attributes);
  EXPECT_EQ(col.eval.unbiased.size(), 200);
}

TEST(Sweep, SingleCellAccounting) {
  const auto r = run_sweep(SmallConfig({1.0}, {Method::kBaseline}, 2));
  EXPECT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.cells.size(), 1u);
  EXPECT_EQ(r.cells[0].completed, 2);
  EXPECT_TRUE(r.failures.empty());
  for (const auto& rec : r.records) {
    EXPECT_GE(rec.acc_unbiased, 0.0);
    EXPECT_LE(rec.acc_unbiased, 1.0);
    EXPECT_EQ(rec.hya, 0.0);
  }
}

class SmallSweep : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    result_ = new SweepResult(run_sweep(
        SmallConfig({1.0, 0.9, 0.5}, {Method::kBaseline, Method::kEnd}, 5)));
  }
  static void TearDownTestSuite() { delete result_; }
  static SweepResult* result_;
};
SweepResult* SmallSweep::result_ = nullptr;

TEST_F(SmallSweep, CsvHasOneRowPerTrial) {
  const std::string csv = SweepCsv(*result_);
  EXPECT_EQ(Count(csv, "\n"), 31);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kSweepCsvHeader);
  const auto path = TempPath("sweep.csv");
  emit_report(*result_, ReportFormat::kCsv, path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), csv);
  std::filesystem::remove(path);
}

TEST_F(SmallSweep, RecordsAndCellsConsistent) {
  for (std::size_t m = 0; m < 2; ++m) {
    for (int l = 0; l < 3; ++l) {
      const auto accs = result_->unbiased_accuracies(result_->config.methods[m], l);
      ASSERT_EQ(accs.size(), 5u);
      double mean = 0.0;
      for (double a : accs) mean += a / 5.0;
      EXPECT_NEAR(result_->cell(m, l).mean_unbiased, mean, 1e-12);
      EXPECT_EQ(result_->record(m, l, 4).trial, 4);
    }
  }
  for (const auto& r : result_->records) {
    EXPECT_FALSE(r.failed);
    EXPECT_GE(r.hya, 0.0);
    EXPECT_LE(r.hya, std::log(2.0) + 1e-12);
    EXPECT_GE(r.margin(), -kBoundTolerance);
  }
}

TEST_F(SmallSweep, JsonRoundTrip) {
  const auto path = TempPath("sweep.json");
  emit_report(*result_, ReportFormat::kJson, path);
  const auto back = LoadSweepJson(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.ToJson().dump(), result_->ToJson().dump());
  EXPECT_EQ(SweepCsv(back), SweepCsv(*result_));
  EXPECT_THROW(LoadSweepJson(TempPath("missing.json")), IoError);
}

TEST_F(SmallSweep, RepeatIsByteIdenticalAndThreadIndependent) {
  auto cfg = result_->config;
  cfg.threads = 3;
  const auto parallel = run_sweep(cfg);
  EXPECT_EQ(parallel.ToJson().dump(), result_->ToJson().dump());
  EXPECT_EQ(SweepCsv(parallel), SweepCsv(*result_));
  const auto reports = sweep_breaking_points(*result_);
  EXPECT_EQ(PlotSvg(parallel, sweep_breaking_points(parallel)), PlotSvg(*result_, reports));
}

TEST_F(SmallSweep, SvgStructure) {
  const auto reports = sweep_breaking_points(*result_);
  ASSERT_EQ(reports.size(), 1u);
  const std::string svg = PlotSvg(*result_, reports);
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_EQ(Count(svg, "<polyline class=\"mean\""), 2);
  EXPECT_EQ(Count(svg, "class=\"band\""), 2);
  EXPECT_LE(Count(svg, "class=\"breaking-point\""), 2);
  EXPECT_NE(svg.find("H(Y|A)"), std::string::npos);
  EXPECT_NE(svg.find("accuracy"), std::string::npos);
  EXPECT_NE(PValueSvg(reports).find("<svg"), std::string::npos);
}

TEST_F(SmallSweep, BreakingPointReportsFollowKs) {
  const auto reports = sweep_breaking_points(*result_);
  const auto& r = reports.at(0);
  EXPECT_EQ(r.method, "end");
  ASSERT_EQ(r.p_values.size(), 3u);
  for (int l = 0; l < 3; ++l) {
    const auto ks = stats::ks_one_sided(result_->unbiased_accuracies(Method::kEnd, l),
                                        result_->unbiased_accuracies(Method::kBaseline, l));
    EXPECT_EQ(r.p_values[l], ks.p);
    EXPECT_EQ(r.d_values[l], ks.d);
  }
  EXPECT_EQ(r.breaking_point, stats::detect_breaking_point(r.grid, r.p_values));
  EXPECT_THROW(sweep_breaking_points(*result_, Method::kLff), InvalidArgument);
}

SweepResult Synthetic(const std::vector<std::vector<double>>& method_accs,
                      const std::vector<std::vector<double>>& base_accs) {
  SweepResult r;
  r.config = SmallConfig({1.0, 0.75}, {Method::kBaseline, Method::kLnlAdv},
                         static_cast<int>(base_accs[0].size()));
  r.config.Canonicalize();
  for (std::size_t m = 0; m < 2; ++m) {
    const auto& accs = m == 0 ? base_accs : method_accs;
    for (int l = 0; l < 2; ++l) {
      for (int t = 0; t < r.config.trials; ++t) {
        TrialRecord rec;
        rec.method = r.config.methods[m];
        rec.level = l;
        rec.trial = t;
        rec.acc_unbiased = accs[l][t];
        r.records.push_back(rec);
      }
    }
  }
  r.cells = Aggregate(r.config, r.records);
  return r;
}

TEST(BreakingPoints, DominantMethodNeverBreaks) {
  const auto r = Synthetic({{0.9, 0.91, 0.92}, {0.9, 0.91, 0.92}},
                           {{0.5, 0.51, 0.52}, {0.6, 0.61, 0.62}});
  const auto reports = sweep_breaking_points(r);
  EXPECT_FALSE(reports.at(0).breaking_point.has_value());
  EXPECT_EQ(Count(PlotSvg(r, reports), "class=\"breaking-point\""), 0);
}

TEST(BreakingPoints, IdenticalMethodMatchesPermutationOracle) {
  const std::vector<std::vector<double>> accs = {{0.5, 0.52, 0.51, 0.53}, {0.7, 0.72, 0.71, 0.69}};
  const auto reports = sweep_breaking_points(Synthetic(accs, accs));
  for (int l = 0; l < 2; ++l) {
    EXPECT_NEAR(reports[0].p_values[l], stats::ks_permutation_p(accs[l], accs[l], 10000, 1), 0.02);
  }
  EXPECT_FALSE(reports[0].breaking_point.has_value());
}

TEST(BreakingPoints, WorseMethodBreaks) {
  const auto r = Synthetic({{0.3, 0.31, 0.32, 0.33, 0.34, 0.35}, {0.9, 0.91, 0.92, 0.93, 0.94, 0.95}},
                           {{0.5, 0.51, 0.52, 0.53, 0.54, 0.55}, {0.6, 0.61, 0.62, 0.63, 0.64, 0.65}});
  const auto reports = sweep_breaking_points(r);
  ASSERT_TRUE(reports[0].breaking_point.has_value());
  EXPECT_EQ(*reports[0].breaking_point, reports[0].grid[0]);
  EXPECT_EQ(Count(PlotSvg(r, reports), "class=\"breaking-point\""), 1);
}

TEST(Plot, SingleMethodSingleLevel) {
  const auto r = run_sweep(SmallConfig({0.9}, {Method::kBaseline}, 2));
  const std::string svg = PlotSvg(r, {});
  EXPECT_EQ(Count(svg, "<polyline class=\"mean\""), 1);
  EXPECT_EQ(Count(svg, "class=\"band\""), 0);
  EXPECT_EQ(Count(svg, "<circle"), 1);
  EXPECT_EQ(svg, PlotSvg(r, {}));
}

TEST(Sweep, FailedCellsAreReported) {
  auto cfg = SmallConfig({0.9}, {Method::kBaseline, Method::kMineAdv}, 2);
  // Adam steps of this size overflow the parameters on the first update.
  cfg.training.base.learning_rate = 1e300;
  const auto r = run_sweep(cfg);
  ASSERT_EQ(r.records.size(), 4u);
  for (const auto& rec : r.records) {
    EXPECT_TRUE(rec.failed);
    EXPECT_TRUE(std::isnan(rec.acc_unbiased));
  }
  ASSERT_EQ(r.failures.size(), 4u);
  EXPECT_EQ(r.failures[2].rfind("method=mine_adv level=0.9 trial=0: ", 0), 0u) << r.failures[2];
  EXPECT_EQ(r.cell(1, 0).completed, 0);
  const auto back = SweepResult::FromJson(r.ToJson());
  EXPECT_TRUE(back.records[2].failed);
  EXPECT_TRUE(std::isnan(back.records[2].acc_unbiased));
}

TEST(Bound, BaselineAbsorbsAttributeAtExtremeBias) {
  const auto train_set = data::gen_gaussian_biased(2000, 1.0, {}, 3);
  auto cfg = debias::DefaultConfig(Method::kBaseline);
  cfg.base.epochs = 10;
  cfg.base.seed = 4;
  const auto model = debias::train(Method::kBaseline, train_set, cfg);
  const auto report = verify_bound(model, train_set, EstimatorOptions{});
  EXPECT_GE(report.iza_hat, 0.5 * std::log(2.0));
  EXPECT_TRUE(report.holds());
  EXPECT_TRUE(report.reliable);
  EXPECT_EQ(report.ToJson().at("holds"), true);
}

TEST(Bound, RandomExtractorHolds) {
  const auto data = data::gen_gaussian_biased(3000, 0.5, {}, 5);
  auto cfg = debias::DefaultConfig(Method::kBaseline);
  cfg.base.seed = 6;
  const auto model = debias::initialize_model(Method::kBaseline, data.dim(), 2, 2, cfg);
  const auto report = verify_bound(model, data, EstimatorOptions{});
  EXPECT_GE(report.margin_hat, -kBoundTolerance);
  EXPECT_NEAR(report.hya, std::log(2.0), 0.01);
  auto narrow = data;
  narrow.features = narrow.features.leftCols(3);
  EXPECT_THROW(verify_bound(model, narrow, EstimatorOptions{}), ShapeError);
}

TEST(Oracle, CorpusPasses) {
  const auto s = run_oracle_corpus(2000, 5, false);
  EXPECT_EQ(s.cases, 2000);
  EXPECT_TRUE(s.passed());
  EXPECT_GE(s.min_bound_margin, -1e-9);
  const auto p = run_oracle_corpus(500, 5, true);
  EXPECT_TRUE(p.passed());
  EXPECT_LE(p.max_izy, 1e-9);
  EXPECT_EQ(run_oracle_corpus(1, 9, false).ToJson(), run_oracle_corpus(1, 9, false).ToJson());
}

}  // namespace
}  // namespace bbl::harness
