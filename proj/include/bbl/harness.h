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


// Bias-strength sweeps, empirical bound checks and report emission.

#ifndef BBL_HARNESS_H_
#define BBL_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bbl/datagen.h"
#include "bbl/debias.h"
#include "bbl/mi_estim.h"
#include "bbl/stats.h"
#include "json.hpp"

namespace bbl::harness {

// Tolerance on estimated bound margins.
inline constexpr double kBoundTolerance = 0.05;

enum class Task { kGaussian, kColorizedDigits, kTabularMix };

std::string ToString(Task task);
Task TaskFromString(const std::string& name);  // also accepts "colorized"
data::BiasKind NativeBiasKind(Task task);

struct EstimatorOptions {
  mi::EstimatorKind kind = mi::EstimatorKind::kKnn;
  int knn_k = 5;
  int bins = 8;
  mi::DVConfig dv;

  void Validate() const;
  nlohmann::json ToJson() const;
  static EstimatorOptions FromJson(const nlohmann::json& doc);
};

struct SweepConfig {
  Task task = Task::kGaussian;
  std::vector<data::BiasSpec> grid;
  std::vector<debias::Method> methods;
  int trials = 7;
  std::uint64_t base_seed = 0;
  EstimatorOptions estimator;
  long per_cell = 500;  // evaluation samples per (y, a) cell
  long train_n = 2000;
  data::GaussianTaskOptions gaussian;
  // Shared training settings; lambda comes from `lambdas` or the method
  // default.
  debias::DebiasConfig training;
  std::map<debias::Method, double> lambdas;
  int threads = 1;  // execution only; never affects results

  // Sorts the grid ascending in derived H(Y|A).
  void Canonicalize();
  void Validate() const;
  debias::DebiasConfig MethodConfig(debias::Method method,
                                    std::uint64_t seed) const;
  nlohmann::json ToJson() const;  // excludes `threads`
  static SweepConfig FromJson(const nlohmann::json& doc);
};

// Detection axis for breaking points: derived H(Y|A) for the binary tasks,
// the colour variance itself for the colourized task.
std::string LevelName(data::BiasKind kind);
double LevelValue(const data::BiasSpec& spec);

struct TrialRecord {
  debias::Method method = debias::Method::kBaseline;
  int level = 0;
  int trial = 0;
  double bias_value = 0.0;
  double hya = 0.0;  // empirical, on the training set
  double acc_unbiased = 0.0;
  double acc_conflicting = 0.0;
  double iza = 0.0;
  double izy = 0.0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;

  double margin() const { return iza + hya - izy; }
};

struct CellSummary {
  debias::Method method = debias::Method::kBaseline;
  int level = 0;
  int completed = 0;
  double mean_unbiased = 0.0;
  double std_unbiased = 0.0;
  double mean_conflicting = 0.0;
  double std_conflicting = 0.0;
  double mean_iza = 0.0;
  double mean_izy = 0.0;
  double mean_hya = 0.0;
};

struct SweepResult {
  SweepConfig config;
  // Ordered by (method, level, trial) following the config order.
  std::vector<TrialRecord> records;
  std::vector<CellSummary> cells;
  std::vector<std::string> failures;

  const TrialRecord& record(std::size_t method_index, int level, int trial) const;
  const CellSummary& cell(std::size_t method_index, int level) const;
  std::vector<double> unbiased_accuracies(debias::Method method, int level) const;
  nlohmann::json ToJson() const;
  static SweepResult FromJson(const nlohmann::json& doc);
};

struct TaskData {
  data::LabeledDataset train;
  data::EvalSplits eval;
};

// Training and evaluation sets for one grid level and trial. Shared by all
// methods so that methods are compared on identical data.
// Training set only; the data seed depends on (level, trial) but not on the
// method, so every method sees the same samples.
data::LabeledDataset MakeTrainData(const SweepConfig& config, int level, int trial);
TaskData MakeTaskData(const SweepConfig& config, int level, int trial);

std::uint64_t TrialSeed(std::uint64_t base, debias::Method method, int level,
                        int trial);

SweepResult run_sweep(SweepConfig config);

// Mean and standard deviation (n - 1) of completed trials.
std::vector<CellSummary> Aggregate(const SweepConfig& config,
                                   const std::vector<TrialRecord>& records);

struct BoundReport {
  std::string tag;
  double izy_hat = 0.0;
  double iza_hat = 0.0;
  double hya = 0.0;
  double margin_hat = 0.0;
  bool reliable = true;
  mi::MIEstimate izy_estimate;
  mi::MIEstimate iza_estimate;

  bool holds(double tolerance = kBoundTolerance) const {
    return margin_hat >= -tolerance;
  }
  nlohmann::json ToJson() const;
};

mi::MIEstimate EstimateMI(const Eigen::MatrixXd& z, std::span<const int> labels,
                          const EstimatorOptions& options);

BoundReport verify_bound(const debias::TrainedModel& model,
                         const data::LabeledDataset& data,
                         const EstimatorOptions& options);

// One report per non-baseline method, grid ascending in LevelValue.
std::vector<stats::BreakingPointReport> sweep_breaking_points(
    const SweepResult& sweep,
    debias::Method baseline = debias::Method::kBaseline,
    double alpha = stats::kDefaultAlpha);

enum class ReportFormat { kCsv, kJson };

inline constexpr const char* kSweepCsvHeader =
    "method,bias_kind,bias_value,hya_nats,trial,acc_unbiased,acc_conflicting,"
    "iza_nats,izy_nats";

std::string SweepCsv(const SweepResult& result);
void emit_report(const SweepResult& result, ReportFormat format,
                 const std::filesystem::path& path);
SweepResult LoadSweepJson(const std::filesystem::path& path);

// Accuracy-vs-bias chart: one polyline per method, +-1 std band and a
// triangle on the x-axis at each breaking point.
std::string PlotSvg(const SweepResult& result,
                    const std::vector<stats::BreakingPointReport>& reports);
// p-value chart for reports without accuracy data.
std::string PValueSvg(const std::vector<stats::BreakingPointReport>& reports);
void emit_plot(const SweepResult& result,
               const std::vector<stats::BreakingPointReport>& reports,
               const std::filesystem::path& path);
void emit_plot(const std::vector<stats::BreakingPointReport>& reports,
               const std::filesystem::path& path);

struct OracleSummary {
  long cases = 0;
  double min_bound_margin = 0.0;
  double min_strong_margin = 0.0;
  long interaction_failures = 0;
  double max_izy = 0.0;  // proposition corpus only
  bool proposition1 = false;

  bool passed(double tol = 1e-9) const;
  nlohmann::json ToJson() const;
};

// Random-joint property corpus over alphabets up to 5 x 5 x 5, or the
// Y = g(A), Z independent of A family when `proposition1` is set.
OracleSummary run_oracle_corpus(long size, std::uint64_t seed, bool proposition1);

void WriteTextFile(const std::filesystem::path& path, const std::string& text);

}  // namespace bbl::harness

#endif  // BBL_HARNESS_H_
