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

#include "bbl/cli_config.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

namespace bbl::cli {
namespace {

using harness::Task;

const std::vector<std::string> kSections = {"task",     "grid",       "methods",
                                            "training", "estimators", "output"};

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Entry {
  std::string value;
  int line = 0;
};

using Entries = std::map<std::string, std::map<std::string, Entry>>;

double ParseDouble(const Entry& e, const std::string& key) {
  double v = 0.0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError(key + ": expected a number, got \"" + e.value + "\"", e.line);
  }
  return v;
}

long ParseLong(const Entry& e, const std::string& key) {
  long v = 0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError(key + ": expected an integer, got \"" + e.value + "\"", e.line);
  }
  return v;
}

std::uint64_t ParseU64(const Entry& e, const std::string& key) {
  std::uint64_t v = 0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError(key + ": expected a non-negative integer, got \"" + e.value + "\"", e.line);
  }
  return v;
}

bool ParseBool(const Entry& e, const std::string& key) {
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  throw ConfigError(key + ": expected true or false, got \"" + e.value + "\"", e.line);
}

// Runs `fn` and rewraps library validation errors with the entry's line.
template <typename Fn>
void WithLine(const Entry& e, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& ex) {
    throw ConfigError(ex.what(), e.line);
  }
}

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::vector<double> DefaultGrid(Task task) {
  switch (task) {
    case Task::kGaussian:
      return {1.0, 0.975, 0.95, 0.9, 0.85, 0.75, 0.6, 0.5};
    case Task::kTabularMix:
      return {0.0, 0.025, 0.05, 0.1, 0.15, 0.25, 0.4, 0.5};
    case Task::kColorizedDigits:
      return {0.0, 0.002, 0.005, 0.008, 0.012, 0.02, 0.035, 0.05};
  }
  return {};
}

CliConfig DefaultCliConfig() {
  CliConfig c;
  c.sweep.task = Task::kGaussian;
  for (double v : DefaultGrid(c.sweep.task)) {
    c.sweep.grid.push_back(data::BiasSpec::Make(harness::NativeBiasKind(c.sweep.task), v));
  }
  c.sweep.Canonicalize();
  c.sweep.methods = debias::AllMethods();
  c.sweep.trials = 7;
  return c;
}

std::vector<std::string> SectionKeys(const std::string& section) {
  if (section == "task") {
    return {"name", "train_n", "per_cell", "signal_dims", "spurious_dims", "noise_sigma"};
  }
  if (section == "grid") return {"kind", "values"};
  if (section == "methods") {
    std::vector<std::string> keys = {"names", "trials", "baseline"};
    for (auto m : debias::AllMethods()) keys.push_back("lambda_" + debias::ToString(m));
    return keys;
  }
  if (section == "training") {
    return {"seed",         "threads",     "epochs",           "batch_size", "learning_rate",
            "beta1",        "beta2",       "epsilon",          "hidden_width", "feature_dim",
            "aux_hidden_width", "gce_q",   "lff_ema",          "end_entangle",
            "end_entangle_weight"};
  }
  if (section == "estimators") {
    return {"kind",          "knn_k",          "bins",           "dv_iterations",
            "dv_batch_size", "dv_learning_rate", "dv_hidden_width", "dv_hidden_layers",
            "dv_ema_rate",   "dv_holdout_fraction"};
  }
  if (section == "output") return {"csv", "json", "svg"};
  return {};
}

std::size_t EditDistance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string NearestKey(std::string_view key, const std::vector<std::string>& candidates) {
  std::string best;
  std::size_t best_d = static_cast<std::size_t>(-1);
  for (const auto& c : candidates) {
    const std::size_t d = EditDistance(key, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

CliConfig ParseConfig(std::string_view text) {
  Entries entries;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string line = Trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header", line_no);
      section = Trim(std::string_view(line).substr(1, line.size() - 2));
      if (std::find(kSections.begin(), kSections.end(), section) == kSections.end()) {
        throw ConfigError("unknown section [" + section + "]; did you mean [" +
                              NearestKey(section, kSections) + "]?",
                          line_no);
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected \"key = value\"", line_no);
    if (section.empty()) throw ConfigError("key outside of any section", line_no);
    const std::string key = Trim(std::string_view(line).substr(0, eq));
    const std::string value = Trim(std::string_view(line).substr(eq + 1));
    const auto keys = SectionKeys(section);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError("unknown key \"" + key + "\" in [" + section + "]; did you mean \"" +
                            NearestKey(key, keys) + "\"?",
                        line_no);
    }
    auto& sec = entries[section];
    if (sec.count(key)) {
      throw ConfigError("duplicate key \"" + key + "\" (first set on line " +
                            std::to_string(sec[key].line) + ")",
                        line_no);
    }
    sec[key] = Entry{value, line_no};
  }

  CliConfig c = DefaultCliConfig();
  auto& s = c.sweep;
  auto get = [&](const std::string& sec, const std::string& key) -> const Entry* {
    const auto it = entries.find(sec);
    if (it == entries.end()) return nullptr;
    const auto kt = it->second.find(key);
    return kt == it->second.end() ? nullptr : &kt->second;
  };

  if (const Entry* e = get("task", "name")) {
    WithLine(*e, [&] { s.task = harness::TaskFromString(e->value); });
  }
  if (const Entry* e = get("task", "train_n")) s.train_n = ParseLong(*e, "train_n");
  if (const Entry* e = get("task", "per_cell")) s.per_cell = ParseLong(*e, "per_cell");
  if (const Entry* e = get("task", "signal_dims")) {
    s.gaussian.signal_dims = static_cast<int>(ParseLong(*e, "signal_dims"));
  }
  if (const Entry* e = get("task", "spurious_dims")) {
    s.gaussian.spurious_dims = static_cast<int>(ParseLong(*e, "spurious_dims"));
  }
  if (const Entry* e = get("task", "noise_sigma")) s.gaussian.noise_sigma = ParseDouble(*e, "noise_sigma");

  const auto kind = harness::NativeBiasKind(s.task);
  if (const Entry* e = get("grid", "kind")) {
    WithLine(*e, [&] {
      if (data::BiasKindFromString(e->value) != kind) {
        throw ConfigError("grid kind " + e->value + " does not match task " +
                              harness::ToString(s.task) + " (expects " + data::ToString(kind) +
                              ")",
                          e->line);
      }
    });
  }
  std::vector<double> values = DefaultGrid(s.task);
  const Entry* grid_entry = get("grid", "values");
  if (grid_entry) {
    values.clear();
    for (const auto& item : SplitList(grid_entry->value)) {
      values.push_back(ParseDouble(Entry{item, grid_entry->line}, "values"));
    }
    if (values.empty()) throw ConfigError("values: empty grid", grid_entry->line);
  }
  s.grid.clear();
  const Entry grid_origin = grid_entry ? *grid_entry : Entry{};
  WithLine(grid_origin, [&] {
    for (double v : values) s.grid.push_back(data::BiasSpec::Make(kind, v));
  });
  s.Canonicalize();

  if (const Entry* e = get("methods", "names")) {
    s.methods.clear();
    WithLine(*e, [&] {
      for (const auto& name : SplitList(e->value)) s.methods.push_back(debias::MethodFromString(name));
    });
  }
  if (const Entry* e = get("methods", "trials")) s.trials = static_cast<int>(ParseLong(*e, "trials"));
  if (const Entry* e = get("methods", "baseline")) {
    WithLine(*e, [&] { debias::MethodFromString(e->value); });
    c.baseline = e->value;
  }
  for (auto m : debias::AllMethods()) {
    const std::string key = "lambda_" + debias::ToString(m);
    if (const Entry* e = get("methods", key)) s.lambdas[m] = ParseDouble(*e, key);
  }

  auto& t = s.training;
  if (const Entry* e = get("training", "seed")) s.base_seed = ParseU64(*e, "seed");
  if (const Entry* e = get("training", "threads")) s.threads = static_cast<int>(ParseLong(*e, "threads"));
  if (const Entry* e = get("training", "epochs")) t.base.epochs = static_cast<int>(ParseLong(*e, "epochs"));
  if (const Entry* e = get("training", "batch_size")) {
    t.base.batch_size = static_cast<int>(ParseLong(*e, "batch_size"));
  }
  if (const Entry* e = get("training", "learning_rate")) {
    t.base.learning_rate = ParseDouble(*e, "learning_rate");
  }
  if (const Entry* e = get("training", "beta1")) t.base.beta1 = ParseDouble(*e, "beta1");
  if (const Entry* e = get("training", "beta2")) t.base.beta2 = ParseDouble(*e, "beta2");
  if (const Entry* e = get("training", "epsilon")) t.base.epsilon = ParseDouble(*e, "epsilon");
  if (const Entry* e = get("training", "hidden_width")) {
    t.hidden_width = static_cast<int>(ParseLong(*e, "hidden_width"));
  }
  if (const Entry* e = get("training", "feature_dim")) {
    t.feature_dim = static_cast<int>(ParseLong(*e, "feature_dim"));
  }
  if (const Entry* e = get("training", "aux_hidden_width")) {
    t.aux_hidden_width = static_cast<int>(ParseLong(*e, "aux_hidden_width"));
  }
  if (const Entry* e = get("training", "gce_q")) t.gce_q = ParseDouble(*e, "gce_q");
  if (const Entry* e = get("training", "lff_ema")) t.lff_ema = ParseDouble(*e, "lff_ema");
  if (const Entry* e = get("training", "end_entangle")) t.end_entangle = ParseBool(*e, "end_entangle");
  if (const Entry* e = get("training", "end_entangle_weight")) {
    t.end_entangle_weight = ParseDouble(*e, "end_entangle_weight");
  }

  auto& est = s.estimator;
  if (const Entry* e = get("estimators", "kind")) {
    WithLine(*e, [&] { est.kind = mi::EstimatorFromString(e->value); });
  }
  if (const Entry* e = get("estimators", "knn_k")) est.knn_k = static_cast<int>(ParseLong(*e, "knn_k"));
  if (const Entry* e = get("estimators", "bins")) est.bins = static_cast<int>(ParseLong(*e, "bins"));
  if (const Entry* e = get("estimators", "dv_iterations")) {
    est.dv.iterations = static_cast<int>(ParseLong(*e, "dv_iterations"));
  }
  if (const Entry* e = get("estimators", "dv_batch_size")) {
    est.dv.batch_size = static_cast<int>(ParseLong(*e, "dv_batch_size"));
  }
  if (const Entry* e = get("estimators", "dv_learning_rate")) {
    est.dv.learning_rate = ParseDouble(*e, "dv_learning_rate");
  }
  if (const Entry* e = get("estimators", "dv_hidden_width")) {
    est.dv.hidden_width = static_cast<int>(ParseLong(*e, "dv_hidden_width"));
  }
  if (const Entry* e = get("estimators", "dv_hidden_layers")) {
    est.dv.hidden_layers = static_cast<int>(ParseLong(*e, "dv_hidden_layers"));
  }
  if (const Entry* e = get("estimators", "dv_ema_rate")) est.dv.ema_rate = ParseDouble(*e, "dv_ema_rate");
  if (const Entry* e = get("estimators", "dv_holdout_fraction")) {
    est.dv.holdout_fraction = ParseDouble(*e, "dv_holdout_fraction");
  }

  if (const Entry* e = get("output", "csv")) c.csv_path = e->value;
  if (const Entry* e = get("output", "json")) c.json_path = e->value;
  if (const Entry* e = get("output", "svg")) c.svg_path = e->value;

  try {
    s.Validate();
  } catch (const InvalidArgument& ex) {
    throw ConfigError(ex.what(), 0);
  }
  return c;
}

CliConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return ParseConfig(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what(), 0);
  }
}

std::string DescribeConfig(const CliConfig& c) {
  const auto& s = c.sweep;
  const auto& t = s.training;
  const auto& est = s.estimator;
  std::string out;
  out += "[task]\nname = " + harness::ToString(s.task) + "\n";
  out += "train_n = " + std::to_string(s.train_n) + "\n";
  out += "per_cell = " + std::to_string(s.per_cell) + "\n";
  out += "signal_dims = " + std::to_string(s.gaussian.signal_dims) + "\n";
  out += "spurious_dims = " + std::to_string(s.gaussian.spurious_dims) + "\n";
  out += "noise_sigma = " + Num(s.gaussian.noise_sigma) + "\n";
  out += "\n[grid]\nkind = " + data::ToString(harness::NativeBiasKind(s.task)) + "\nvalues = ";
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    out += (i ? ", " : "") + Num(s.grid[i].value);
  }
  out += "\n\n[methods]\nnames = ";
  for (std::size_t i = 0; i < s.methods.size(); ++i) {
    out += (i ? ", " : "") + debias::ToString(s.methods[i]);
  }
  out += "\ntrials = " + std::to_string(s.trials) + "\n";
  out += "baseline = " + c.baseline + "\n";
  for (auto m : s.methods) {
    out += "lambda_" + debias::ToString(m) + " = " + Num(s.MethodConfig(m, 0).lambda) + "\n";
  }
  out += "\n[training]\nseed = " + std::to_string(s.base_seed) + "\n";
  out += "threads = " + std::to_string(s.threads) + "\n";
  out += "epochs = " + std::to_string(t.base.epochs) + "\n";
  out += "batch_size = " + std::to_string(t.base.batch_size) + "\n";
  out += "learning_rate = " + Num(t.base.learning_rate) + "\n";
  out += "beta1 = " + Num(t.base.beta1) + "\n";
  out += "beta2 = " + Num(t.base.beta2) + "\n";
  out += "epsilon = " + Num(t.base.epsilon) + "\n";
  out += "hidden_width = " + std::to_string(t.hidden_width) + "\n";
  out += "feature_dim = " + std::to_string(t.feature_dim) + "\n";
  out += "aux_hidden_width = " + std::to_string(t.aux_hidden_width) + "\n";
  out += "gce_q = " + Num(t.gce_q) + "\n";
  out += "lff_ema = " + Num(t.lff_ema) + "\n";
  out += std::string("end_entangle = ") + (t.end_entangle ? "true" : "false") + "\n";
  out += "end_entangle_weight = " + Num(t.end_entangle_weight) + "\n";
  out += "\n[estimators]\nkind = " + mi::ToString(est.kind) + "\n";
  out += "knn_k = " + std::to_string(est.knn_k) + "\n";
  out += "bins = " + std::to_string(est.bins) + "\n";
  out += "dv_iterations = " + std::to_string(est.dv.iterations) + "\n";
  out += "dv_batch_size = " + std::to_string(est.dv.batch_size) + "\n";
  out += "dv_learning_rate = " + Num(est.dv.learning_rate) + "\n";
  out += "dv_hidden_width = " + std::to_string(est.dv.hidden_width) + "\n";
  out += "dv_hidden_layers = " + std::to_string(est.dv.hidden_layers) + "\n";
  out += "dv_ema_rate = " + Num(est.dv.ema_rate) + "\n";
  out += "dv_holdout_fraction = " + Num(est.dv.holdout_fraction) + "\n";
  out += "\n[output]\ncsv = " + c.csv_path + "\njson = " + c.json_path + "\nsvg = " + c.svg_path +
         "\n";
  return out;
}

}  // namespace bbl::cli
