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
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "bbl/error.h"
#include "bbl/exact_info.h"
#include "bbl/rng.h"

namespace bbl::harness {
namespace {

using debias::Method;
using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kDigitClasses = 10;

json NumberOrNull(double v) { return std::isfinite(v) ? json(v) : json(); }

double NumberOrNaN(const json& v) { return v.is_null() ? kNaN : v.get<double>(); }

std::string CsvNumber(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

double Mean(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double SampleStd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = Mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::size_t MethodIndex(const SweepConfig& config, Method method) {
  const auto it = std::find(config.methods.begin(), config.methods.end(), method);
  if (it == config.methods.end()) {
    throw InvalidArgument("sweep has no method \"" + debias::ToString(method) + "\"");
  }
  return static_cast<std::size_t>(it - config.methods.begin());
}

json TrainingJson(const debias::DebiasConfig& c) {
  json doc = c.ToJson();
  doc.erase("lambda");
  doc.erase("seed");
  return doc;
}

debias::DebiasConfig TrainingFromJson(const json& doc) {
  debias::DebiasConfig c;
  c.base.learning_rate = doc.at("learning_rate").get<double>();
  c.base.batch_size = doc.at("batch_size").get<int>();
  c.base.beta1 = doc.at("beta1").get<double>();
  c.base.beta2 = doc.at("beta2").get<double>();
  c.base.epsilon = doc.at("epsilon").get<double>();
  c.base.epochs = doc.at("epochs").get<int>();
  c.hidden_width = doc.at("hidden_width").get<int>();
  c.feature_dim = doc.at("feature_dim").get<int>();
  c.aux_hidden_width = doc.at("aux_hidden_width").get<int>();
  c.gce_q = doc.at("gce_q").get<double>();
  c.lff_ema = doc.at("lff_ema").get<double>();
  c.end_entangle = doc.at("end_entangle").get<bool>();
  c.end_entangle_weight = doc.at("end_entangle_weight").get<double>();
  return c;
}

json RecordJson(const TrialRecord& r) {
  return {{"method", debias::ToString(r.method)},
          {"level", r.level},
          {"trial", r.trial},
          {"bias_value", r.bias_value},
          {"hya_nats", NumberOrNull(r.hya)},
          {"acc_unbiased", NumberOrNull(r.acc_unbiased)},
          {"acc_conflicting", NumberOrNull(r.acc_conflicting)},
          {"iza_nats", NumberOrNull(r.iza)},
          {"izy_nats", NumberOrNull(r.izy)},
          {"seed", r.seed},
          {"failed", r.failed},
          {"error", r.error}};
}

TrialRecord RecordFromJson(const json& doc) {
  TrialRecord r;
  r.method = debias::MethodFromString(doc.at("method").get<std::string>());
  r.level = doc.at("level").get<int>();
  r.trial = doc.at("trial").get<int>();
  r.bias_value = doc.at("bias_value").get<double>();
  r.hya = NumberOrNaN(doc.at("hya_nats"));
  r.acc_unbiased = NumberOrNaN(doc.at("acc_unbiased"));
  r.acc_conflicting = NumberOrNaN(doc.at("acc_conflicting"));
  r.iza = NumberOrNaN(doc.at("iza_nats"));
  r.izy = NumberOrNaN(doc.at("izy_nats"));
  r.seed = doc.at("seed").get<std::uint64_t>();
  r.failed = doc.at("failed").get<bool>();
  r.error = doc.at("error").get<std::string>();
  return r;
}

json CellJson(const CellSummary& c) {
  return {{"method", debias::ToString(c.method)},
          {"level", c.level},
          {"completed", c.completed},
          {"mean_unbiased", NumberOrNull(c.mean_unbiased)},
          {"std_unbiased", NumberOrNull(c.std_unbiased)},
          {"mean_conflicting", NumberOrNull(c.mean_conflicting)},
          {"std_conflicting", NumberOrNull(c.std_conflicting)},
          {"mean_iza", NumberOrNull(c.mean_iza)},
          {"mean_izy", NumberOrNull(c.mean_izy)},
          {"mean_hya", NumberOrNull(c.mean_hya)}};
}

CellSummary CellFromJson(const json& doc) {
  CellSummary c;
  c.method = debias::MethodFromString(doc.at("method").get<std::string>());
  c.level = doc.at("level").get<int>();
  c.completed = doc.at("completed").get<int>();
  c.mean_unbiased = NumberOrNaN(doc.at("mean_unbiased"));
  c.std_unbiased = NumberOrNaN(doc.at("std_unbiased"));
  c.mean_conflicting = NumberOrNaN(doc.at("mean_conflicting"));
  c.std_conflicting = NumberOrNaN(doc.at("std_conflicting"));
  c.mean_iza = NumberOrNaN(doc.at("mean_iza"));
  c.mean_izy = NumberOrNaN(doc.at("mean_izy"));
  c.mean_hya = NumberOrNaN(doc.at("mean_hya"));
  return c;
}

data::LabeledDataset BalancedBinaryEval(const SweepConfig& config,
                                        std::uint64_t seed) {
  const long pool = 2 * config.per_cell;
  const auto aligned = data::gen_gaussian_pool(pool, false, config.gaussian,
                                               DeriveSeed(seed, {HashTag("aligned")}));
  const auto conflicting = data::gen_gaussian_pool(
      pool, true, config.gaussian, DeriveSeed(seed, {HashTag("conflicting")}));
  return data::Concatenate(aligned, conflicting);
}

}  // namespace

std::string ToString(Task task) {
  switch (task) {
    case Task::kGaussian:
      return "gaussian";
    case Task::kColorizedDigits:
      return "colorized_digits";
    case Task::kTabularMix:
      return "tabular_mix";
  }
  return "gaussian";
}

Task TaskFromString(const std::string& name) {
  if (name == "gaussian") return Task::kGaussian;
  if (name == "colorized_digits" || name == "colorized") return Task::kColorizedDigits;
  if (name == "tabular_mix") return Task::kTabularMix;
  throw InvalidArgument("unknown task \"" + name +
                        "\" (expected gaussian, colorized_digits or tabular_mix)");
}

data::BiasKind NativeBiasKind(Task task) {
  switch (task) {
    case Task::kGaussian:
      return data::BiasKind::kAgreementProb;
    case Task::kColorizedDigits:
      return data::BiasKind::kColorVariance;
    case Task::kTabularMix:
      return data::BiasKind::kConflictFraction;
  }
  return data::BiasKind::kAgreementProb;
}

void EstimatorOptions::Validate() const {
  if (kind == mi::EstimatorKind::kPlugin) {
    throw InvalidArgument("estimator: plugin needs discrete features; use knn, "
                          "binned or neural_dv");
  }
  if (knn_k < 1) throw InvalidArgument("estimator: knn_k must be >= 1");
  if (bins < 2) throw InvalidArgument("estimator: bins must be >= 2");
  dv.Validate();
}

json EstimatorOptions::ToJson() const {
  return {{"kind", mi::ToString(kind)},
          {"knn_k", knn_k},
          {"bins", bins},
          {"dv",
           {{"hidden_width", dv.hidden_width},
            {"hidden_layers", dv.hidden_layers},
            {"learning_rate", dv.learning_rate},
            {"batch_size", dv.batch_size},
            {"iterations", dv.iterations},
            {"ema_rate", dv.ema_rate},
            {"holdout_fraction", dv.holdout_fraction}}}};
}

EstimatorOptions EstimatorOptions::FromJson(const json& doc) {
  EstimatorOptions o;
  o.kind = mi::EstimatorFromString(doc.at("kind").get<std::string>());
  o.knn_k = doc.at("knn_k").get<int>();
  o.bins = doc.at("bins").get<int>();
  const auto& dv = doc.at("dv");
  o.dv.hidden_width = dv.at("hidden_width").get<int>();
  o.dv.hidden_layers = dv.at("hidden_layers").get<int>();
  o.dv.learning_rate = dv.at("learning_rate").get<double>();
  o.dv.batch_size = dv.at("batch_size").get<int>();
  o.dv.iterations = dv.at("iterations").get<int>();
  o.dv.ema_rate = dv.at("ema_rate").get<double>();
  o.dv.holdout_fraction = dv.at("holdout_fraction").get<double>();
  return o;
}

std::string LevelName(data::BiasKind kind) {
  return kind == data::BiasKind::kColorVariance ? "color_variance" : "hya_nats";
}

double LevelValue(const data::BiasSpec& spec) {
  return spec.kind == data::BiasKind::kColorVariance ? spec.value : spec.derived_hya;
}

void SweepConfig::Canonicalize() {
  std::stable_sort(grid.begin(), grid.end(),
                   [](const data::BiasSpec& a, const data::BiasSpec& b) {
                     return LevelValue(a) < LevelValue(b);
                   });
}

void SweepConfig::Validate() const {
  if (trials < 2) throw InvalidArgument("sweep: trials must be >= 2, got " + std::to_string(trials));
  if (grid.empty()) throw InvalidArgument("sweep: bias grid is empty");
  if (methods.empty()) throw InvalidArgument("sweep: no methods");
  const auto kind = NativeBiasKind(task);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i].kind != kind) {
      throw InvalidArgument("sweep: task " + ToString(task) + " takes " +
                            data::ToString(kind) + " levels, got " +
                            data::ToString(grid[i].kind));
    }
    if (i > 0 && !(LevelValue(grid[i]) > LevelValue(grid[i - 1]))) {
      throw InvalidArgument("sweep: grid must be strictly ascending in " +
                            LevelName(kind));
    }
  }
  std::set<Method> seen(methods.begin(), methods.end());
  if (seen.size() != methods.size()) throw InvalidArgument("sweep: duplicate method");
  if (per_cell < 1) throw InvalidArgument("sweep: per_cell must be >= 1");
  if (train_n < 2) throw InvalidArgument("sweep: train_n must be >= 2");
  if (threads < 1) throw InvalidArgument("sweep: threads must be >= 1");
  estimator.Validate();
  if (estimator.kind == mi::EstimatorKind::kBinned && training.feature_dim > 4) {
    throw InvalidArgument("sweep: binned estimator supports feature_dim <= 4");
  }
  for (const auto& [m, l] : lambdas) {
    if (!(l >= 0.0)) throw InvalidArgument("sweep: lambda for " + debias::ToString(m) + " must be >= 0");
  }
  training.Validate();
}

debias::DebiasConfig SweepConfig::MethodConfig(Method method,
                                               std::uint64_t seed) const {
  debias::DebiasConfig c = training;
  const auto it = lambdas.find(method);
  c.lambda = it != lambdas.end() ? it->second : debias::DefaultConfig(method).lambda;
  c.base.seed = seed;
  return c;
}

json SweepConfig::ToJson() const {
  json levels = json::array();
  for (const auto& g : grid) levels.push_back(g.value);
  json method_names = json::array();
  for (Method m : methods) method_names.push_back(debias::ToString(m));
  json lambda_doc = json::object();
  for (Method m : methods) lambda_doc[debias::ToString(m)] = MethodConfig(m, 0).lambda;
  return {{"task", ToString(task)},
          {"bias_kind", data::ToString(NativeBiasKind(task))},
          {"grid", levels},
          {"methods", method_names},
          {"trials", trials},
          {"base_seed", base_seed},
          {"estimator", estimator.ToJson()},
          {"per_cell", per_cell},
          {"train_n", train_n},
          {"gaussian",
           {{"signal_dims", gaussian.signal_dims},
            {"spurious_dims", gaussian.spurious_dims},
            {"noise_sigma", gaussian.noise_sigma}}},
          {"training", TrainingJson(training)},
          {"lambdas", lambda_doc}};
}

SweepConfig SweepConfig::FromJson(const json& doc) {
  SweepConfig c;
  c.task = TaskFromString(doc.at("task").get<std::string>());
  const auto kind = data::BiasKindFromString(doc.at("bias_kind").get<std::string>());
  for (const auto& v : doc.at("grid")) c.grid.push_back(data::BiasSpec::Make(kind, v.get<double>()));
  for (const auto& m : doc.at("methods")) {
    c.methods.push_back(debias::MethodFromString(m.get<std::string>()));
  }
  c.trials = doc.at("trials").get<int>();
  c.base_seed = doc.at("base_seed").get<std::uint64_t>();
  c.estimator = EstimatorOptions::FromJson(doc.at("estimator"));
  c.per_cell = doc.at("per_cell").get<long>();
  c.train_n = doc.at("train_n").get<long>();
  const auto& g = doc.at("gaussian");
  c.gaussian.signal_dims = g.at("signal_dims").get<int>();
  c.gaussian.spurious_dims = g.at("spurious_dims").get<int>();
  c.gaussian.noise_sigma = g.at("noise_sigma").get<double>();
  c.training = TrainingFromJson(doc.at("training"));
  for (const auto& [name, value] : doc.at("lambdas").items()) {
    c.lambdas[debias::MethodFromString(name)] = value.get<double>();
  }
  return c;
}

const TrialRecord& SweepResult::record(std::size_t method_index, int level,
                                       int trial) const {
  const std::size_t levels = config.grid.size();
  const auto t = static_cast<std::size_t>(config.trials);
  return records.at((method_index * levels + static_cast<std::size_t>(level)) * t +
                    static_cast<std::size_t>(trial));
}

const CellSummary& SweepResult::cell(std::size_t method_index, int level) const {
  return cells.at(method_index * config.grid.size() + static_cast<std::size_t>(level));
}

std::vector<double> SweepResult::unbiased_accuracies(Method method, int level) const {
  const std::size_t mi = MethodIndex(config, method);
  std::vector<double> out;
  for (int t = 0; t < config.trials; ++t) {
    const auto& r = record(mi, level, t);
    if (!r.failed) out.push_back(r.acc_unbiased);
  }
  return out;
}

json SweepResult::ToJson() const {
  json recs = json::array();
  for (const auto& r : records) recs.push_back(RecordJson(r));
  json cell_docs = json::array();
  for (const auto& c : cells) cell_docs.push_back(CellJson(c));
  return {{"format", "bbl.sweep"},
          {"version", 1},
          {"config", config.ToJson()},
          {"records", recs},
          {"cells", cell_docs},
          {"failures", failures}};
}

SweepResult SweepResult::FromJson(const json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "bbl.sweep") {
      throw FormatError("sweep JSON: unexpected format tag");
    }
    if (doc.at("version").get<int>() != 1) throw FormatError("sweep JSON: unsupported version");
    SweepResult r;
    r.config = SweepConfig::FromJson(doc.at("config"));
    for (const auto& rec : doc.at("records")) r.records.push_back(RecordFromJson(rec));
    for (const auto& c : doc.at("cells")) r.cells.push_back(CellFromJson(c));
    r.failures = doc.at("failures").get<std::vector<std::string>>();
    const std::size_t expect =
        r.config.methods.size() * r.config.grid.size() * static_cast<std::size_t>(r.config.trials);
    if (r.records.size() != expect) {
      throw FormatError("sweep JSON: expected " + std::to_string(expect) + " records, found " +
                        std::to_string(r.records.size()));
    }
    if (r.cells.size() != r.config.methods.size() * r.config.grid.size()) {
      throw FormatError("sweep JSON: cell summary count does not match the grid");
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("sweep JSON: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("sweep JSON: ") + e.what());
  }
}

namespace {

std::uint64_t DataSeed(const SweepConfig& config, std::string_view stream, int level,
                       int trial) {
  return DeriveSeed(config.base_seed, {HashTag(stream), static_cast<std::uint64_t>(level),
                                       static_cast<std::uint64_t>(trial)});
}

}  // namespace

data::LabeledDataset MakeTrainData(const SweepConfig& config, int level, int trial) {
  const auto& spec = config.grid.at(static_cast<std::size_t>(level));
  const std::uint64_t seed = DataSeed(config, "data", level, trial);
  switch (config.task) {
    case Task::kGaussian:
      return data::gen_gaussian_biased(config.train_n, spec.value, config.gaussian, seed);
    case Task::kTabularMix: {
      const auto biased = data::gen_gaussian_pool(config.train_n, false, config.gaussian,
                                                  DeriveSeed(seed, {HashTag("biased")}));
      const auto conflicting = data::gen_gaussian_pool(
          config.train_n, true, config.gaussian, DeriveSeed(seed, {HashTag("conflicting")}));
      return data::mix_bias(biased, conflicting, spec.value, config.train_n,
                            data::MixMode::kConstantTotal, DeriveSeed(seed, {HashTag("mix")}));
    }
    case Task::kColorizedDigits: {
      const auto [images, labels] = data::synth_digits(config.train_n, seed);
      return data::colorize(images, labels, spec.value, data::Split::kTrain,
                            DeriveSeed(seed, {HashTag("colorize")}));
    }
  }
  throw InvalidArgument("MakeTrainData: unknown task");
}

TaskData MakeTaskData(const SweepConfig& config, int level, int trial) {
  const auto& spec = config.grid.at(static_cast<std::size_t>(level));
  const std::uint64_t eval_seed = DataSeed(config, "eval", level, trial);
  const std::uint64_t split_seed = DeriveSeed(eval_seed, {HashTag("split")});
  TaskData out;
  out.train = MakeTrainData(config, level, trial);
  if (config.task == Task::kColorizedDigits) {
    const long eval_n = 3L * kDigitClasses * kDigitClasses * config.per_cell;
    const auto [images, labels] = data::synth_digits(eval_n, eval_seed);
    const auto source = data::colorize(images, labels, spec.value, data::Split::kTest,
                                       DeriveSeed(eval_seed, {HashTag("colorize")}));
    out.eval = data::split_eval(source, config.per_cell, split_seed);
  } else {
    out.eval = data::split_eval(BalancedBinaryEval(config, eval_seed), config.per_cell,
                                split_seed);
  }
  return out;
}

std::uint64_t TrialSeed(std::uint64_t base, Method method, int level, int trial) {
  return DeriveSeed(base, {HashTag(debias::ToString(method)),
                           static_cast<std::uint64_t>(level),
                           static_cast<std::uint64_t>(trial)});
}

mi::MIEstimate EstimateMI(const Eigen::MatrixXd& z, std::span<const int> labels,
                          const EstimatorOptions& options) {
  mi::SamplePairs pairs{z, std::vector<int>(labels.begin(), labels.end())};
  switch (options.kind) {
    case mi::EstimatorKind::kKnn:
      return mi::knn_mi(pairs, options.knn_k);
    case mi::EstimatorKind::kBinned:
      return mi::binned_mi(pairs, options.bins);
    case mi::EstimatorKind::kNeuralDv:
      return mi::neural_dv_mi(pairs, options.dv);
    case mi::EstimatorKind::kPlugin:
      break;
  }
  throw InvalidArgument("plugin estimator needs discrete features");
}

BoundReport verify_bound(const debias::TrainedModel& model,
                         const data::LabeledDataset& data,
                         const EstimatorOptions& options) {
  options.Validate();
  data.Validate();
  if (data.dim() != model.extractor.input_width()) {
    throw ShapeError("verify_bound: model expects " +
                     std::to_string(model.extractor.input_width()) +
                     " features, dataset has " + std::to_string(data.dim()));
  }
  BoundReport report;
  report.tag = debias::ToString(model.method);
  const Eigen::MatrixXd z = debias::extract_features(model, data.features);
  report.hya = data::empirical_hya(data.targets, data.attributes);
  auto estimate = [&](std::span<const int> labels, std::uint64_t salt) {
    EstimatorOptions o = options;
    o.dv.seed = DeriveSeed(options.dv.seed, {salt});
    try {
      return EstimateMI(z, labels, o);
    } catch (const TrainingDiverged& e) {
      mi::MIEstimate est;
      est.estimator = o.kind;
      est.n_samples = data.size();
      est.value = kNaN;
      est.diagnostics["diverged"] = 1.0;
      est.diagnostics["diverged_at"] = static_cast<double>(e.iteration());
      report.reliable = false;
      return est;
    }
  };
  report.iza_estimate = estimate(data.attributes, HashTag("iza"));
  report.izy_estimate = estimate(data.targets, HashTag("izy"));
  report.iza_hat = report.iza_estimate.value;
  report.izy_hat = report.izy_estimate.value;
  report.margin_hat = report.iza_hat + report.hya - report.izy_hat;
  if (!std::isfinite(report.margin_hat)) report.reliable = false;
  return report;
}

json BoundReport::ToJson() const {
  return {{"model", tag},
          {"izy_nats", NumberOrNull(izy_hat)},
          {"iza_nats", NumberOrNull(iza_hat)},
          {"hya_nats", hya},
          {"margin_nats", NumberOrNull(margin_hat)},
          {"tolerance_nats", kBoundTolerance},
          {"holds", holds()},
          {"reliable", reliable},
          {"izy_estimate", izy_estimate.ToJson()},
          {"iza_estimate", iza_estimate.ToJson()}};
}

std::vector<CellSummary> Aggregate(const SweepConfig& config,
                                   const std::vector<TrialRecord>& records) {
  std::vector<CellSummary> cells;
  const int levels = static_cast<int>(config.grid.size());
  for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
    for (int l = 0; l < levels; ++l) {
      std::vector<double> unb, conf, iza, izy, hya;
      for (int t = 0; t < config.trials; ++t) {
        const auto& r = records.at((mi * levels + l) * config.trials + t);
        if (r.failed) continue;
        unb.push_back(r.acc_unbiased);
        conf.push_back(r.acc_conflicting);
        iza.push_back(r.iza);
        izy.push_back(r.izy);
        hya.push_back(r.hya);
      }
      CellSummary c;
      c.method = config.methods[mi];
      c.level = l;
      c.completed = static_cast<int>(unb.size());
      c.mean_unbiased = Mean(unb);
      c.std_unbiased = SampleStd(unb);
      c.mean_conflicting = Mean(conf);
      c.std_conflicting = SampleStd(conf);
      c.mean_iza = Mean(iza);
      c.mean_izy = Mean(izy);
      c.mean_hya = Mean(hya);
      cells.push_back(c);
    }
  }
  return cells;
}

SweepResult run_sweep(SweepConfig config) {
  config.Canonicalize();
  config.Validate();
  const int levels = static_cast<int>(config.grid.size());
  const std::size_t jobs = config.methods.size() * levels * config.trials;
  std::vector<TrialRecord> records(jobs);

  auto run_job = [&](std::size_t job) {
    const int trial = static_cast<int>(job % config.trials);
    const int level = static_cast<int>((job / config.trials) % levels);
    const std::size_t mi = job / (static_cast<std::size_t>(config.trials) * levels);
    TrialRecord& r = records[job];
    r.method = config.methods[mi];
    r.level = level;
    r.trial = trial;
    r.bias_value = config.grid[level].value;
    r.seed = TrialSeed(config.base_seed, r.method, level, trial);
    try {
      const TaskData td = MakeTaskData(config, level, trial);
      const auto model = debias::train(r.method, td.train, config.MethodConfig(r.method, r.seed));
      r.acc_unbiased = debias::accuracy(model, td.eval.unbiased);
      r.acc_conflicting = debias::accuracy(model, td.eval.bias_conflicting);
      EstimatorOptions est = config.estimator;
      est.dv.seed = DeriveSeed(r.seed, {HashTag("estimator")});
      const BoundReport bound = verify_bound(model, td.train, est);
      r.hya = bound.hya;
      r.iza = bound.iza_hat;
      r.izy = bound.izy_hat;
      if (!bound.reliable) {
        throw TrainingDiverged("mutual information estimator diverged", -1);
      }
    } catch (const std::exception& e) {
      r.failed = true;
      r.error = e.what();
      r.acc_unbiased = r.acc_conflicting = r.iza = r.izy = kNaN;
    }
  };

  const int workers = std::max(1, std::min<int>(config.threads, static_cast<int>(jobs)));
  if (workers == 1) {
    for (std::size_t j = 0; j < jobs; ++j) run_job(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < jobs; j = next++) run_job(j);
      });
    }
    for (auto& t : pool) t.join();
  }

  SweepResult result;
  result.config = config;
  result.records = std::move(records);
  result.cells = Aggregate(result.config, result.records);
  for (const auto& r : result.records) {
    if (!r.failed) continue;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", r.bias_value);
    result.failures.push_back("method=" + debias::ToString(r.method) + " level=" + buf +
                              " trial=" + std::to_string(r.trial) + ": " + r.error);
  }
  return result;
}

std::vector<stats::BreakingPointReport> sweep_breaking_points(
    const SweepResult& sweep, Method baseline, double alpha) {
  const auto& cfg = sweep.config;
  if (std::find(cfg.methods.begin(), cfg.methods.end(), baseline) == cfg.methods.end()) {
    throw InvalidArgument("breaking points: baseline \"" + debias::ToString(baseline) +
                          "\" is not in the sweep");
  }
  const int levels = static_cast<int>(cfg.grid.size());
  const auto kind = NativeBiasKind(cfg.task);
  std::vector<std::vector<double>> base_acc(levels);
  for (int l = 0; l < levels; ++l) {
    base_acc[l] = sweep.unbiased_accuracies(baseline, l);
    if (base_acc[l].size() < 2) {
      throw InvalidArgument("breaking points: baseline has fewer than 2 completed trials at level " +
                            std::to_string(l));
    }
  }
  std::vector<stats::BreakingPointReport> out;
  for (Method m : cfg.methods) {
    if (m == baseline) continue;
    stats::BreakingPointReport rep;
    rep.method = debias::ToString(m);
    rep.bias_kind = data::ToString(kind);
    rep.level_name = LevelName(kind);
    rep.alpha = alpha;
    for (int l = 0; l < levels; ++l) {
      const auto acc = sweep.unbiased_accuracies(m, l);
      if (acc.size() < 2) {
        throw InvalidArgument("breaking points: " + rep.method +
                              " has fewer than 2 completed trials at level " + std::to_string(l));
      }
      const auto ks = stats::ks_one_sided(acc, base_acc[l]);
      rep.grid.push_back(LevelValue(cfg.grid[l]));
      rep.bias_values.push_back(cfg.grid[l].value);
      rep.d_values.push_back(ks.d);
      rep.p_values.push_back(ks.p);
    }
    rep.breaking_point = stats::detect_breaking_point(rep.grid, rep.p_values, alpha);
    out.push_back(std::move(rep));
  }
  return out;
}

std::string SweepCsv(const SweepResult& result) {
  std::string out = std::string(kSweepCsvHeader) + "\n";
  const std::string kind = data::ToString(NativeBiasKind(result.config.task));
  for (const auto& r : result.records) {
    out += debias::ToString(r.method) + "," + kind + "," + CsvNumber(r.bias_value) + "," +
           CsvNumber(r.hya) + "," + std::to_string(r.trial) + "," + CsvNumber(r.acc_unbiased) +
           "," + CsvNumber(r.acc_conflicting) + "," + CsvNumber(r.iza) + "," +
           CsvNumber(r.izy) + "\n";
  }
  return out;
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("write failed: " + path.string());
}

void emit_report(const SweepResult& result, ReportFormat format,
                 const std::filesystem::path& path) {
  if (format == ReportFormat::kCsv) {
    WriteTextFile(path, SweepCsv(result));
  } else {
    WriteTextFile(path, result.ToJson().dump(1) + "\n");
  }
}

SweepResult LoadSweepJson(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return SweepResult::FromJson(doc);
}

bool OracleSummary::passed(double tol) const {
  if (proposition1) return max_izy <= tol;
  return min_bound_margin >= -tol && min_strong_margin >= -tol && interaction_failures == 0;
}

json OracleSummary::ToJson() const {
  return {{"cases", cases},
          {"proposition1", proposition1},
          {"min_bound_margin", min_bound_margin},
          {"min_strong_margin", min_strong_margin},
          {"interaction_failures", interaction_failures},
          {"max_izy", max_izy},
          {"passed", passed()}};
}

OracleSummary run_oracle_corpus(long size, std::uint64_t seed, bool proposition1) {
  if (size < 1) throw InvalidArgument("oracle corpus size must be >= 1");
  static constexpr double kConcentrations[] = {0.05, 0.3, 1.0, 5.0};
  OracleSummary s;
  s.cases = size;
  s.proposition1 = proposition1;
  s.min_bound_margin = std::numeric_limits<double>::infinity();
  s.min_strong_margin = std::numeric_limits<double>::infinity();
  for (long i = 0; i < size; ++i) {
    Rng rng(DeriveSeed(seed, {HashTag("oracle"), static_cast<std::uint64_t>(i)}));
    std::uniform_int_distribution<int> alphabet(2, 5);
    if (proposition1) {
      const int nz = alphabet(rng), na = alphabet(rng), ny = alphabet(rng);
      std::uniform_real_distribution<double> unit(0.01, 1.0);
      std::vector<double> pz(nz), pa(na);
      for (auto& v : pz) v = unit(rng);
      for (auto& v : pa) v = unit(rng);
      const double sz = std::accumulate(pz.begin(), pz.end(), 0.0);
      const double sa = std::accumulate(pa.begin(), pa.end(), 0.0);
      for (auto& v : pz) v /= sz;
      for (auto& v : pa) v /= sa;
      std::uniform_int_distribution<int> pick(0, ny - 1);
      std::vector<int> g(na);
      for (auto& v : g) v = pick(rng);
      const auto joint = info::extreme_bias_joint(pz, pa, g, ny);
      s.max_izy = std::max(s.max_izy, info::mutual_information(joint, info::Axis::kZ, info::Axis::kY));
      const auto terms = info::bound_margin(joint);
      s.min_bound_margin = std::min(s.min_bound_margin, terms.margin);
      s.min_strong_margin = std::min(s.min_strong_margin, info::strong_bound_margin(joint));
      continue;
    }
    const info::AlphabetSizes sizes = {alphabet(rng), alphabet(rng), alphabet(rng)};
    const double conc = kConcentrations[i % 4];
    const auto joint = info::random_joint(sizes, conc, rng());
    const auto terms = info::bound_margin(joint);
    s.min_bound_margin = std::min(s.min_bound_margin, terms.margin);
    s.min_strong_margin = std::min(s.min_strong_margin, info::strong_bound_margin(joint));
    if (!info::interaction_min_property(joint)) ++s.interaction_failures;
  }
  return s;
}

}  // namespace bbl::harness
