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

// Baseline classifier and attribute-bias removal training procedures, all
// built from a feature extractor f: X -> Z and a head g: Z -> Y-hat.
//
//   baseline   plain cross-entropy.
//   lnl_adv    attribute adversary on Z coupled through gradient reversal.
//   mine_adv   Donsker-Varadhan statistics network on (Z, A); the extractor
//              descends lambda * DV.
//   end        cross-entropy + lambda * mean squared cosine between features
//              that share an attribute (optional entangling term).
//   lff        generalized-CE biased model; the reported model is trained with
//              per-sample weights ce_b / (ce_b + ce_d).
//   di         shared extractor with one head per attribute domain; inference
//              sums the per-domain logits.
//   blindeye   attribute classifier on Z; the extractor pushes its softmax
//              towards uniform with weight lambda.

#ifndef BBL_DEBIAS_H_
#define BBL_DEBIAS_H_

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bbl/datagen.h"
#include "bbl/tinynet.h"
#include "json.hpp"

namespace bbl::debias {

enum class Method { kBaseline, kLnlAdv, kMineAdv, kEnd, kLff, kDi, kBlindeye };

std::string ToString(Method method);
Method MethodFromString(const std::string& name);
const std::vector<Method>& AllMethods();

struct DebiasConfig {
  nn::TrainConfig base;
  double lambda = 0.0;
  int hidden_width = 32;
  int feature_dim = 8;
  int aux_hidden_width = 32;  // adversary / statistics / attribute networks
  double gce_q = 0.7;         // lff biased model
  double lff_ema = 0.7;       // per-sample loss moving average for lff
  bool end_entangle = false;
  double end_entangle_weight = 1.0;

  void Validate() const;
  nlohmann::json ToJson() const;
};

// Frozen per-method defaults (lambda etc.) for the synthetic tasks.
DebiasConfig DefaultConfig(Method method);

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  std::map<std::string, double> diagnostics;
};

struct TrainedModel {
  Method method = Method::kBaseline;
  nn::Network extractor;
  std::vector<nn::Network> heads;  // one head, or one per domain for di
  int feature_dim = 0;
  int target_card = 2;
  int attribute_card = 2;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::string provenance;
  std::vector<EpochLog> log;

  void Validate() const;
  nlohmann::json ToJson() const;
  static TrainedModel FromJson(const nlohmann::json& doc);
  void Save(const std::filesystem::path& path) const;
  static TrainedModel Load(const std::filesystem::path& path);
};

// Networks at their seeded initial state, exactly as train() starts them.
TrainedModel initialize_model(Method method, int input_dim, int target_card,
                              int attribute_card, const DebiasConfig& config);

// Throws TrainingDiverged on a non-finite loss and InvalidArgument for zero
// epochs or an empty dataset.
TrainedModel train(Method method, const data::LabeledDataset& data,
                   const DebiasConfig& config);

nn::Matrix extract_features(const TrainedModel& model, const nn::Matrix& x);
nn::Matrix predict_logits(const TrainedModel& model, const nn::Matrix& x);
std::vector<int> predict(const TrainedModel& model, const nn::Matrix& x);
double accuracy(const TrainedModel& model, const data::LabeledDataset& data);

struct RegularizerValue {
  double value = 0.0;
  nn::Matrix grad;          // d value / d input, same shape as the input
  bool degenerate = false;  // a zero-norm feature vector was seen
};

// Mean squared cosine similarity over pairs that share an attribute.
RegularizerValue end_regularizer(const nn::Matrix& features,
                                 std::span<const int> attributes);

// Negated mean cosine over pairs with equal target and different attribute.
RegularizerValue end_entangle_term(const nn::Matrix& features,
                                   std::span<const int> targets,
                                   std::span<const int> attributes);

// ce_biased / (ce_biased + ce_debiased); 0.5 when both are zero.
double lff_weight(double ce_biased, double ce_debiased);

// Mean cross-entropy between the uniform distribution and
// softmax(attribute_logits); equals ln |A| exactly at uniform outputs.
RegularizerValue blindeye_regularizer(const nn::Matrix& attribute_logits);

}  // namespace bbl::debias

#endif  // BBL_DEBIAS_H_
