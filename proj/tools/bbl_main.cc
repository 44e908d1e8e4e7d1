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


// bbl: command-line front end.
//
// Exit codes: 0 success, 2 usage or format error, 3 partial sweep failure,
// 4 bound-violation alarm.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bbl/cli_config.h"
#include "bbl/datagen.h"
#include "bbl/debias.h"
#include "bbl/error.h"
#include "bbl/harness.h"
#include "bbl/stats.h"
#include "json.hpp"

namespace {

using namespace bbl;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitPartial = 3;
constexpr int kExitBound = 4;

std::optional<std::uint64_t> EnvU64(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v, &end, 10);
  if (*end != '\0') throw InvalidArgument(std::string(name) + " must be an integer, got \"" + v + "\"");
  return x;
}

json ReadJson(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return doc;
}

std::string Fixed(double v, int digits = 3) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// ---- gen-data ------------------------------------------------------------

struct GenDataArgs {
  std::string task;
  double bias_value = 0.0;
  long n = 2000;
  std::uint64_t seed = 0;
  std::string out;
};

int CmdGenData(const GenDataArgs& a) {
  const auto task = harness::TaskFromString(a.task);
  const auto spec = data::BiasSpec::Make(harness::NativeBiasKind(task), a.bias_value);
  if (a.n < 2) throw InvalidArgument("--n must be >= 2");
  harness::SweepConfig cfg;
  cfg.task = task;
  cfg.grid = {spec};
  cfg.train_n = a.n;
  cfg.base_seed = a.seed;
  const data::LabeledDataset ds =
      task == harness::Task::kGaussian
          ? data::gen_gaussian_biased(a.n, a.bias_value, cfg.gaussian, a.seed)
          : harness::MakeTrainData(cfg, 0, 0);
  const std::filesystem::path out(a.out);
  if (out.extension() == ".csv") {
    const auto labels = out.parent_path() / (out.stem().string() + ".labels.csv");
    data::WriteCsv(ds, out, labels);
  } else {
    data::WriteContainer(ds, out);
  }
  const double hya = data::empirical_hya(ds.targets, ds.attributes);
  const json sidecar = {{"format", "bbl.sidecar"},
                        {"generator", harness::ToString(task)},
                        {"parameters",
                         {{"bias_kind", data::ToString(spec.kind)},
                          {"bias_value", a.bias_value},
                          {"derived_hya_nats", spec.derived_hya},
                          {"n", a.n},
                          {"seed", a.seed}}},
                        {"hya_nats", hya},
                        {"provenance", ds.provenance}};
  harness::WriteTextFile(a.out + ".json", sidecar.dump(1) + "\n");
  std::cout << "wrote " << ds.size() << " samples (d=" << ds.dim() << ") to " << a.out
            << "\nempirical H(Y|A) = " << Fixed(hya, 4) << " nats\n";
  return kExitOk;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string method = "baseline";
  std::string data;
  std::string out;
  int epochs = -1;
  double lambda = -1.0;
  std::uint64_t seed = 0;
  bool untrained = false;
};

int CmdTrain(const TrainArgs& a) {
  const auto method = debias::MethodFromString(a.method);
  const auto ds = data::LoadDataset(a.data);
  auto cfg = debias::DefaultConfig(method);
  if (a.epochs >= 0) cfg.base.epochs = a.epochs;
  if (a.lambda >= 0.0) cfg.lambda = a.lambda;
  cfg.base.seed = a.seed;
  debias::TrainedModel model;
  if (a.untrained) {
    model = debias::initialize_model(method, ds.dim(), ds.target_card, ds.attribute_card, cfg);
    model.provenance = ds.provenance;
  } else {
    model = debias::train(method, ds, cfg);
  }
  model.Save(a.out);
  std::cout << "method " << a.method << ", lambda " << cfg.lambda << ", seed " << a.seed << "\n";
  if (!model.log.empty()) {
    const auto& last = model.log.back();
    std::cout << "final epoch " << last.epoch << ": loss " << Fixed(last.loss, 4)
              << ", train accuracy " << Fixed(last.accuracy) << "\n";
  }
  std::cout << "wrote checkpoint " << a.out << "\n";
  return kExitOk;
}

// ---- sweep ---------------------------------------------------------------

struct SweepArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> trials;
};

void PrintCellTable(const harness::SweepResult& r) {
  const auto& cfg = r.config;
  std::printf("%-10s", "method");
  for (const auto& g : cfg.grid) std::printf(" %14g", g.value);
  std::printf("\n");
  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    std::printf("%-10s", debias::ToString(cfg.methods[m]).c_str());
    for (int l = 0; l < static_cast<int>(cfg.grid.size()); ++l) {
      const auto& c = r.cell(m, l);
      std::printf("  %5s +- %5s", Fixed(c.mean_unbiased).c_str(), Fixed(c.std_unbiased).c_str());
    }
    std::printf("\n");
  }
}

int CmdSweep(const SweepArgs& a) {
  cli::CliConfig cfg = cli::LoadConfig(a.config);
  if (auto env = EnvU64("BBL_SEED")) cfg.sweep.base_seed = *env;
  if (auto env = EnvU64("BBL_THREADS")) cfg.sweep.threads = static_cast<int>(*env);
  if (a.seed) cfg.sweep.base_seed = *a.seed;
  if (a.threads) cfg.sweep.threads = *a.threads;
  if (a.trials) cfg.sweep.trials = *a.trials;
  cfg.sweep.Validate();
  std::cout << "# resolved configuration\n" << cli::DescribeConfig(cfg) << "\n";

  const auto result = harness::run_sweep(cfg.sweep);
  std::vector<stats::BreakingPointReport> reports;
  const auto baseline = debias::MethodFromString(cfg.baseline);
  const bool has_baseline = std::find(cfg.sweep.methods.begin(), cfg.sweep.methods.end(),
                                      baseline) != cfg.sweep.methods.end();
  if (has_baseline && cfg.sweep.methods.size() > 1) {
    try {
      reports = harness::sweep_breaking_points(result, baseline);
    } catch (const InvalidArgument& e) {
      std::cout << "breaking points unavailable: " << e.what() << "\n";
    }
  }
  harness::emit_report(result, harness::ReportFormat::kCsv, cfg.csv_path);
  harness::emit_report(result, harness::ReportFormat::kJson, cfg.json_path);
  harness::emit_plot(result, reports, cfg.svg_path);

  std::cout << "mean unbiased accuracy +- std by bias level\n";
  PrintCellTable(result);
  for (const auto& rep : reports) {
    std::cout << "breaking point " << rep.method << ": "
              << (rep.breaking_point ? Fixed(*rep.breaking_point, 4) + " " + rep.level_name
                                     : std::string("none"))
              << "\n";
  }
  std::cout << "wrote " << cfg.csv_path << ", " << cfg.json_path << ", " << cfg.svg_path << "\n";
  if (!result.failures.empty()) {
    std::cout << result.failures.size() << " failed cell(s):\n";
    for (const auto& f : result.failures) std::cout << "  " << f << "\n";
    return kExitPartial;
  }
  return kExitOk;
}

// ---- verify-bound --------------------------------------------------------

struct VerifyArgs {
  std::string model;
  std::string data;
  std::string estimator = "knn";
  std::string out;
  std::uint64_t seed = 0;
};

int CmdVerifyBound(const VerifyArgs& a) {
  const auto model = debias::TrainedModel::Load(a.model);
  const auto ds = data::LoadDataset(a.data);
  harness::EstimatorOptions opts;
  opts.kind = mi::EstimatorFromString(a.estimator);
  opts.dv.seed = a.seed;
  const auto report = harness::verify_bound(model, ds, opts);
  std::cout << "I(Z;Y) estimate  " << Fixed(report.izy_hat, 4) << " nats\n"
            << "I(Z;A) estimate  " << Fixed(report.iza_hat, 4) << " nats\n"
            << "H(Y|A) empirical " << Fixed(report.hya, 4) << " nats\n"
            << "margin I(Z;A) + H(Y|A) - I(Z;Y) = " << Fixed(report.margin_hat, 4) << " nats ("
            << (report.holds() ? "holds" : "VIOLATED") << " at tolerance "
            << harness::kBoundTolerance << (report.reliable ? "" : ", estimator unreliable")
            << ")\n";
  if (!a.out.empty()) harness::WriteTextFile(a.out, report.ToJson().dump(1) + "\n");
  return report.holds() ? kExitOk : kExitBound;
}

// ---- breaking-point ------------------------------------------------------

struct BreakingArgs {
  std::string input;
  std::string baseline = "baseline";
  double alpha = stats::kDefaultAlpha;
  std::string out = "breaking_points.json";
  std::string svg = "breaking_points.svg";
  std::string csv;
};

std::vector<stats::BreakingPointReport> ReportsFromPValues(const json& doc, double alpha) {
  try {
    const auto grid = doc.at("grid").get<std::vector<double>>();
    const std::string level_name = doc.value("level_name", std::string("level"));
    const std::string kind = doc.value("bias_kind", level_name);
    std::vector<stats::BreakingPointReport> out;
    for (const auto& m : doc.at("methods")) {
      stats::BreakingPointReport rep;
      rep.method = m.at("name").get<std::string>();
      rep.bias_kind = kind;
      rep.level_name = level_name;
      rep.grid = grid;
      rep.bias_values = grid;
      rep.p_values = m.at("p_values").get<std::vector<double>>();
      rep.alpha = alpha;
      rep.breaking_point = stats::detect_breaking_point(rep.grid, rep.p_values, alpha);
      out.push_back(std::move(rep));
    }
    return out;
  } catch (const json::exception& e) {
    throw FormatError(std::string("p-value table: ") + e.what());
  }
}

void PrintPTable(const std::vector<stats::BreakingPointReport>& reports) {
  if (reports.empty()) return;
  const auto& grid = reports.front().grid;
  constexpr std::size_t kColumns = 9;
  for (std::size_t start = 0; start < grid.size(); start += kColumns) {
    const std::size_t stop = std::min(grid.size(), start + kColumns);
    std::printf("%-12s", reports.front().level_name.c_str());
    for (std::size_t i = start; i < stop; ++i) std::printf(" %8.4g", grid[i]);
    std::printf("\n");
    for (const auto& r : reports) {
      std::printf("%-12s", r.method.c_str());
      for (std::size_t i = start; i < stop; ++i) {
        const bool bold = r.breaking_point && *r.breaking_point == r.grid[i];
        std::printf(" %7.3f%s", r.p_values[i], bold ? "*" : " ");
      }
      std::printf("\n");
    }
    std::printf("\n");
  }
  std::printf("* breaking point (largest level with p <= alpha)\n");
}

int CmdBreakingPoint(const BreakingArgs& a) {
  const json doc = ReadJson(a.input);
  const std::string format = doc.value("format", std::string());
  std::vector<stats::BreakingPointReport> reports;
  std::string svg;
  if (format == "bbl.sweep") {
    const auto sweep = harness::SweepResult::FromJson(doc);
    reports = harness::sweep_breaking_points(sweep, debias::MethodFromString(a.baseline), a.alpha);
    svg = harness::PlotSvg(sweep, reports);
  } else if (format == "bbl.pvalues") {
    reports = ReportsFromPValues(doc, a.alpha);
    svg = harness::PValueSvg(reports);
  } else {
    throw FormatError(a.input + ": expected format \"bbl.sweep\" or \"bbl.pvalues\"");
  }
  PrintPTable(reports);
  for (const auto& r : reports) {
    std::cout << "breaking point " << r.method << ": "
              << (r.breaking_point ? Fixed(*r.breaking_point, 4) : std::string("none")) << "\n";
  }
  json out = json::array();
  for (const auto& r : reports) out.push_back(r.ToJson());
  harness::WriteTextFile(a.out, out.dump(1) + "\n");
  harness::WriteTextFile(a.svg, svg);
  if (!a.csv.empty()) {
    std::string text = std::string(stats::kBreakingPointCsvHeader) + "\n";
    for (const auto& r : reports) text += r.CsvRows();
    harness::WriteTextFile(a.csv, text);
  }
  return kExitOk;
}

// ---- oracle --------------------------------------------------------------

struct OracleArgs {
  long corpus = 10000;
  std::uint64_t seed = 0;
  bool proposition1 = false;
  std::string out;
};

int CmdOracle(const OracleArgs& a) {
  const auto s = harness::run_oracle_corpus(a.corpus, a.seed, a.proposition1);
  if (a.proposition1) {
    std::cout << "proposition corpus: " << s.cases << " joints with Y = g(A), Z independent of A\n"
              << "max I(Z;Y) = " << s.max_izy << " nats\n";
  } else {
    std::cout << "random joint corpus: " << s.cases << " joints, alphabets up to 5x5x5\n"
              << "min bound margin        = " << s.min_bound_margin << " nats\n"
              << "min strong bound margin = " << s.min_strong_margin << " nats\n"
              << "interaction-information failures = " << s.interaction_failures << "\n";
  }
  std::cout << (s.passed() ? "PASS" : "FAIL") << "\n";
  if (!a.out.empty()) harness::WriteTextFile(a.out, s.ToJson().dump(1) + "\n");
  return s.passed() ? kExitOk : kExitBound;
}

// ---- plot ----------------------------------------------------------------

struct PlotArgs {
  std::string input;
  std::string out = "sweep.svg";
  std::string baseline = "baseline";
};

int CmdPlot(const PlotArgs& a) {
  const auto sweep = harness::LoadSweepJson(a.input);
  std::vector<stats::BreakingPointReport> reports;
  const auto baseline = debias::MethodFromString(a.baseline);
  const auto& methods = sweep.config.methods;
  if (std::find(methods.begin(), methods.end(), baseline) != methods.end() && methods.size() > 1) {
    reports = harness::sweep_breaking_points(sweep, baseline);
  }
  harness::emit_plot(sweep, reports, a.out);
  std::cout << "wrote " << a.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bbl: attribute-bias bounds, debiasing sweeps and breaking points"};
  app.require_subcommand(1);

  std::uint64_t env_seed = 0;
  try {
    env_seed = EnvU64("BBL_SEED").value_or(0);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  GenDataArgs gen;
  gen.seed = env_seed;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a bias-controlled dataset");
  gen_cmd->add_option("--task", gen.task, "gaussian, colorized or tabular_mix")->required();
  gen_cmd->add_option("--bias-value", gen.bias_value,
                      "agreement probability, colour variance or conflict fraction")
      ->required();
  gen_cmd->add_option("--n", gen.n, "number of samples")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "generator seed (default $BBL_SEED or 0)");
  gen_cmd->add_option("--out", gen.out, "output path (.csv or binary container)")->required();

  TrainArgs train;
  train.seed = env_seed;
  auto* train_cmd = app.add_subcommand("train", "Train one model and write a checkpoint");
  train_cmd->add_option("--method", train.method)->capture_default_str();
  train_cmd->add_option("--data", train.data, "dataset path")->required();
  train_cmd->add_option("--out", train.out, "checkpoint path")->required();
  train_cmd->add_option("--epochs", train.epochs, "override the method default");
  train_cmd->add_option("--lambda", train.lambda, "override the method default");
  train_cmd->add_option("--seed", train.seed);
  train_cmd->add_flag("--untrained", train.untrained, "write the initial parameters only");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a bias-strength sweep from a config file");
  sweep_cmd->add_option("config", sweep.config, "INI config path")->required();
  sweep_cmd->add_option("--seed", sweep.seed, "override [training] seed and $BBL_SEED");
  sweep_cmd->add_option("--threads", sweep.threads, "override [training] threads and $BBL_THREADS");
  sweep_cmd->add_option("--trials", sweep.trials, "override [methods] trials");

  VerifyArgs verify;
  verify.seed = env_seed;
  auto* verify_cmd = app.add_subcommand("verify-bound", "Estimate the bound terms for a checkpoint");
  verify_cmd->add_option("--model", verify.model, "checkpoint path")->required();
  verify_cmd->add_option("--data", verify.data, "dataset path")->required();
  verify_cmd->add_option("--estimator", verify.estimator, "knn, binned or neural_dv")
      ->capture_default_str();
  verify_cmd->add_option("--out", verify.out, "report JSON path");
  verify_cmd->add_option("--seed", verify.seed, "estimator seed");

  BreakingArgs breaking;
  auto* bp_cmd = app.add_subcommand("breaking-point", "Breaking points from a sweep or p-value table");
  bp_cmd->add_option("input", breaking.input, "sweep JSON or p-value table JSON")->required();
  bp_cmd->add_option("--baseline", breaking.baseline)->capture_default_str();
  bp_cmd->add_option("--alpha", breaking.alpha)->capture_default_str();
  bp_cmd->add_option("--out", breaking.out, "report JSON path")->capture_default_str();
  bp_cmd->add_option("--svg", breaking.svg, "annotated chart path")->capture_default_str();
  bp_cmd->add_option("--csv", breaking.csv, "optional CSV rows path");

  OracleArgs oracle;
  oracle.seed = env_seed;
  auto* oracle_cmd = app.add_subcommand("oracle", "Exact-information property corpus");
  oracle_cmd->add_option("--corpus", oracle.corpus, "number of random joints")->capture_default_str();
  oracle_cmd->add_option("--seed", oracle.seed);
  oracle_cmd->add_flag("--proposition1", oracle.proposition1,
                       "use the Y = g(A), Z independent of A family");
  oracle_cmd->add_option("--out", oracle.out, "summary JSON path");

  PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plot", "Render a sweep JSON as SVG");
  plot_cmd->add_option("input", plot.input, "sweep JSON")->required();
  plot_cmd->add_option("--out", plot.out)->capture_default_str();
  plot_cmd->add_option("--baseline", plot.baseline)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return CmdGenData(gen);
    if (*train_cmd) return CmdTrain(train);
    if (*sweep_cmd) return CmdSweep(sweep);
    if (*verify_cmd) return CmdVerifyBound(verify);
    if (*bp_cmd) return CmdBreakingPoint(breaking);
    if (*oracle_cmd) return CmdOracle(oracle);
    if (*plot_cmd) return CmdPlot(plot);
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << " (iteration " << e.iteration() << ")\n";
    return kExitPartial;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
