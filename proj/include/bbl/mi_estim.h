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

// Sample-based mutual information estimators, in nats.
//
//   plugin_mi     discrete x discrete, empirical joint counts.
//   binned_mi     continuous (d <= 4) x discrete, equal-width binning.
//   knn_mi        continuous x discrete, nearest-neighbour entropy
//                 decomposition I = H(Z) - sum_a p(a) H(Z | A = a).
//   neural_dv_mi  Donsker-Varadhan lower bound maximized by a statistics
//                 network; works for continuous x discrete and for
//                 continuous x continuous samples.
//
// All estimators are invariant to a joint permutation of the samples: inputs
// are put in a canonical row order before any seeded step runs.

#ifndef BBL_MI_ESTIM_H_
#define BBL_MI_ESTIM_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace bbl::mi {

enum class EstimatorKind { kPlugin, kBinned, kKnn, kNeuralDv };

std::string ToString(EstimatorKind kind);
EstimatorKind EstimatorFromString(const std::string& name);

struct MIEstimate {
  double value = 0.0;
  EstimatorKind estimator = EstimatorKind::kPlugin;
  long n_samples = 0;
  // Numeric diagnostics; boolean flags are stored as 1.0.
  std::map<std::string, double> diagnostics;

  bool flag(const std::string& key) const {
    auto it = diagnostics.find(key);
    return it != diagnostics.end() && it->second != 0.0;
  }

  nlohmann::json ToJson() const;
  static MIEstimate FromJson(const nlohmann::json& doc);
};

struct SamplePairs {
  Eigen::MatrixXd continuous;  // n x d
  std::vector<int> labels;     // length n, values in [0, alphabet)

  long size() const { return static_cast<long>(labels.size()); }
  void Validate() const;
};

MIEstimate plugin_mi(std::span<const int> x, std::span<const int> y);

// Equal-width bins over each dimension's observed range; a constant column
// collapses to one bin.
MIEstimate binned_mi(const SamplePairs& pairs, int bins_per_dim);

// Requires every label class to hold more than k samples.
MIEstimate knn_mi(const SamplePairs& pairs, int k = 5);

struct DVConfig {
  int hidden_width = 64;
  int hidden_layers = 2;
  double learning_rate = 1e-3;
  int batch_size = 256;
  int iterations = 2000;
  double ema_rate = 0.99;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;

  void Validate() const;
};

MIEstimate neural_dv_mi(const SamplePairs& pairs, const DVConfig& config);

// Continuous-continuous variant, e.g. for jointly Gaussian calibration.
MIEstimate neural_dv_mi(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                        const DVConfig& config);

}  // namespace bbl::mi

#endif  // BBL_MI_ESTIM_H_
