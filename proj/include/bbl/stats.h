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


// One-sided two-sample Kolmogorov-Smirnov test and breaking-point detection.
//
// Direction: D = sup_x [F_method(x) - F_baseline(x)] >= 0. Large D means the
// method's accuracies are stochastically smaller than the baseline's, so a
// small p-value rejects the null "method is better than baseline".

#ifndef BBL_STATS_H_
#define BBL_STATS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace bbl::stats {

inline constexpr double kDefaultAlpha = 0.05;
inline constexpr long kDefaultResamples = 100000;

// Accuracies from repeated randomized runs; values in [0, 1], n >= 2.
struct TrialSamples {
  std::vector<double> values;

  explicit TrialSamples(std::vector<double> v);
  long size() const { return static_cast<long>(values.size()); }
};

struct KsResult {
  double d = 0.0;
  double p = 1.0;
};

// Supremum of F_method - F_baseline over the merged support, clamped at 0.
// Both ECDFs are evaluated right-continuously at every support point.
double ks_statistic(std::span<const double> method,
                    std::span<const double> baseline);

// exp(-2 D^2 nm / (n + m)) clamped to [0, 1].
double ks_asymptotic_p(double d, long n, long m);

KsResult ks_one_sided(std::span<const double> method,
                      std::span<const double> baseline);
KsResult ks_one_sided(const TrialSamples& method, const TrialSamples& baseline);

// Monte-Carlo permutation p-value (count + 1) / (resamples + 1) for the
// statistic above. Work is split into a fixed number of shards seeded from
// (seed, shard), so the result does not depend on `threads`.
double ks_permutation_p(std::span<const double> method,
                        std::span<const double> baseline,
                        long resamples = kDefaultResamples,
                        std::uint64_t seed = 0, int threads = 1);

// Largest grid level whose p-value is <= alpha; nullopt if none.
std::optional<double> detect_breaking_point(std::span<const double> grid,
                                            std::span<const double> p_values,
                                            double alpha = kDefaultAlpha);

struct BreakingPointReport {
  std::string method;
  std::string bias_kind;
  std::string level_name;            // "hya_nats" or "color_variance"
  std::vector<double> grid;          // strictly ascending detection levels
  std::vector<double> bias_values;   // raw bias parameter per level
  std::vector<double> d_values;      // empty when only p-values are known
  std::vector<double> p_values;
  double alpha = kDefaultAlpha;
  std::optional<double> breaking_point;

  void Validate() const;
  nlohmann::json ToJson() const;
  static BreakingPointReport FromJson(const nlohmann::json& doc);
  // Rows "method,level,p,rejected" without a header line.
  std::string CsvRows() const;
};

inline constexpr const char* kBreakingPointCsvHeader = "method,level,p,rejected";

}  // namespace bbl::stats

#endif  // BBL_STATS_H_
