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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

#include "bbl/error.h"
#include "bbl/rng.h"

namespace bbl::stats {
namespace {

constexpr int kShards = 16;

void CheckSample(std::span<const double> s, const char* name) {
  if (s.empty()) throw InvalidArgument(std::string("KS test: empty ") + name + " sample");
  if (s.size() < 2) {
    throw InvalidArgument(std::string("KS test: ") + name + " sample needs n >= 2");
  }
  for (double v : s) {
    if (!std::isfinite(v)) {
      throw InvalidArgument(std::string("KS test: non-finite value in ") + name + " sample");
    }
  }
}

// Statistic from pooled values sorted ascending with a membership mask
// (true = method). Ties are grouped so both ECDFs jump together.
double StatisticFromSorted(std::span<const double> sorted,
                           const std::vector<char>& is_method, long n, long m) {
  long cm = 0;
  long cb = 0;
  double best = 0.0;
  const std::size_t total = sorted.size();
  for (std::size_t i = 0; i < total; ++i) {
    if (is_method[i]) {
      ++cm;
    } else {
      ++cb;
    }
    if (i + 1 < total && sorted[i + 1] == sorted[i]) continue;
    best = std::max(best, static_cast<double>(cm) / n - static_cast<double>(cb) / m);
  }
  return best;
}

std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

TrialSamples::TrialSamples(std::vector<double> v) : values(std::move(v)) {
  if (values.size() < 2) throw InvalidArgument("TrialSamples: need n >= 2");
  for (double x : values) {
    if (!(x >= 0.0 && x <= 1.0)) {
      throw InvalidArgument("TrialSamples: accuracy " + Fmt(x) + " outside [0, 1]");
    }
  }
}

double ks_statistic(std::span<const double> method,
                    std::span<const double> baseline) {
  CheckSample(method, "method");
  CheckSample(baseline, "baseline");
  std::vector<std::pair<double, char>> pooled;
  pooled.reserve(method.size() + baseline.size());
  for (double v : method) pooled.emplace_back(v, 1);
  for (double v : baseline) pooled.emplace_back(v, 0);
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> sorted(pooled.size());
  std::vector<char> mask(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    sorted[i] = pooled[i].first;
    mask[i] = pooled[i].second;
  }
  return StatisticFromSorted(sorted, mask, static_cast<long>(method.size()),
                             static_cast<long>(baseline.size()));
}

double ks_asymptotic_p(double d, long n, long m) {
  if (n < 1 || m < 1) throw InvalidArgument("ks_asymptotic_p: empty sample");
  const double nm = static_cast<double>(n) * static_cast<double>(m);
  const double p = std::exp(-2.0 * d * d * nm / static_cast<double>(n + m));
  return std::clamp(p, 0.0, 1.0);
}

KsResult ks_one_sided(std::span<const double> method,
                      std::span<const double> baseline) {
  KsResult r;
  r.d = ks_statistic(method, baseline);
  r.p = ks_asymptotic_p(r.d, static_cast<long>(method.size()),
                        static_cast<long>(baseline.size()));
  return r;
}

KsResult ks_one_sided(const TrialSamples& method, const TrialSamples& baseline) {
  return ks_one_sided(std::span<const double>(method.values),
                      std::span<const double>(baseline.values));
}

double ks_permutation_p(std::span<const double> method,
                        std::span<const double> baseline, long resamples,
                        std::uint64_t seed, int threads) {
  if (resamples < 1000) {
    throw InvalidArgument("ks_permutation_p: resamples must be >= 1000");
  }
  const double observed = ks_statistic(method, baseline);
  const long n = static_cast<long>(method.size());
  const long m = static_cast<long>(baseline.size());
  std::vector<double> sorted(method.begin(), method.end());
  sorted.insert(sorted.end(), baseline.begin(), baseline.end());
  std::sort(sorted.begin(), sorted.end());
  // Guard against rounding in the ECDF difference.
  const double threshold = observed - 1e-12;

  std::vector<long> counts(kShards, 0);
  auto run_shard = [&](int shard) {
    const long lo = resamples * shard / kShards;
    const long hi = resamples * (shard + 1) / kShards;
    Rng rng(DeriveSeed(seed, {HashTag("ks_permutation"), static_cast<std::uint64_t>(shard)}));
    std::vector<char> mask(sorted.size(), 0);
    std::fill(mask.begin(), mask.begin() + n, 1);
    long count = 0;
    for (long r = lo; r < hi; ++r) {
      std::shuffle(mask.begin(), mask.end(), rng);
      if (StatisticFromSorted(sorted, mask, n, m) >= threshold) ++count;
    }
    counts[shard] = count;
  };
  const int workers = std::clamp(threads, 1, kShards);
  if (workers == 1) {
    for (int s = 0; s < kShards; ++s) run_shard(s);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int s = w; s < kShards; s += workers) run_shard(s);
      });
    }
    for (auto& t : pool) t.join();
  }
  const long total = std::accumulate(counts.begin(), counts.end(), 0L);
  return static_cast<double>(total + 1) / static_cast<double>(resamples + 1);
}

std::optional<double> detect_breaking_point(std::span<const double> grid,
                                            std::span<const double> p_values,
                                            double alpha) {
  if (grid.size() != p_values.size()) {
    throw InvalidArgument("detect_breaking_point: grid has " +
                          std::to_string(grid.size()) + " levels but " +
                          std::to_string(p_values.size()) + " p-values");
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw InvalidArgument("detect_breaking_point: grid must be strictly ascending");
    }
  }
  std::optional<double> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(p_values[i] >= 0.0 && p_values[i] <= 1.0)) {
      throw InvalidArgument("detect_breaking_point: p-value " + Fmt(p_values[i]) +
                            " outside [0, 1]");
    }
    if (p_values[i] <= alpha) out = grid[i];
  }
  return out;
}

void BreakingPointReport::Validate() const {
  if (p_values.size() != grid.size() || bias_values.size() != grid.size() ||
      (!d_values.empty() && d_values.size() != grid.size())) {
    throw InvalidArgument("BreakingPointReport: column lengths differ");
  }
  const auto bp = detect_breaking_point(grid, p_values, alpha);
  if (bp != breaking_point) {
    throw InvalidArgument("BreakingPointReport: breaking point inconsistent with p-values");
  }
}

nlohmann::json BreakingPointReport::ToJson() const {
  nlohmann::json doc = {{"method", method},
                        {"bias_kind", bias_kind},
                        {"level_name", level_name},
                        {"grid", grid},
                        {"bias_values", bias_values},
                        {"d_values", d_values},
                        {"p_values", p_values},
                        {"alpha", alpha}};
  doc["breaking_point"] = breaking_point ? nlohmann::json(*breaking_point) : nlohmann::json();
  return doc;
}

BreakingPointReport BreakingPointReport::FromJson(const nlohmann::json& doc) {
  try {
    BreakingPointReport r;
    r.method = doc.at("method").get<std::string>();
    r.bias_kind = doc.at("bias_kind").get<std::string>();
    r.level_name = doc.at("level_name").get<std::string>();
    r.grid = doc.at("grid").get<std::vector<double>>();
    r.bias_values = doc.at("bias_values").get<std::vector<double>>();
    r.d_values = doc.at("d_values").get<std::vector<double>>();
    r.p_values = doc.at("p_values").get<std::vector<double>>();
    r.alpha = doc.at("alpha").get<double>();
    if (!doc.at("breaking_point").is_null()) {
      r.breaking_point = doc.at("breaking_point").get<double>();
    }
    r.Validate();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("breaking-point report: ") + e.what());
  }
}

std::string BreakingPointReport::CsvRows() const {
  std::string out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out += method + "," + Fmt(grid[i]) + "," + Fmt(p_values[i]) + "," +
           (p_values[i] <= alpha ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace bbl::stats
