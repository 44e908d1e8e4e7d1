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

// Minimal dense feedforward networks with hand-written backpropagation and
// Adam. Batches are row-major in the sense that each row is one sample.

#ifndef BBL_TINYNET_H_
#define BBL_TINYNET_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bbl/rng.h"
#include "json.hpp"

namespace bbl::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { kIdentity, kRelu, kTanh, kSoftplus };

std::string ToString(Activation act);
Activation ActivationFromString(const std::string& name);

struct LayerSpec {
  int in = 0;
  int out = 0;
  Activation act = Activation::kIdentity;
  bool operator==(const LayerSpec&) const = default;
};

// Weights are out x in, so a layer computes act(x W^T + b).
struct DenseParams {
  Matrix weight;
  Vector bias;
};

class Network {
 public:
  Network() = default;
  // Fan-in scaled uniform init: U(-1/sqrt(in), 1/sqrt(in)) for weights and
  // biases, drawn from `rng` in layer order.
  Network(std::vector<LayerSpec> specs, Rng& rng);
  // Zero-initialized parameters.
  explicit Network(std::vector<LayerSpec> specs);

  const std::vector<LayerSpec>& specs() const { return specs_; }
  const std::vector<DenseParams>& layers() const { return layers_; }
  std::vector<DenseParams>& mutable_layers() { return layers_; }
  int input_width() const { return specs_.empty() ? 0 : specs_.front().in; }
  int output_width() const { return specs_.empty() ? 0 : specs_.back().out; }
  std::size_t parameter_count() const;
  bool all_finite() const;

  nlohmann::json ToJson() const;
  static Network FromJson(const nlohmann::json& doc);

 private:
  void Validate() const;

  std::vector<LayerSpec> specs_;
  std::vector<DenseParams> layers_;
};

// Per-layer pre-activations and outputs of a forward pass.
struct Activations {
  Matrix input;
  std::vector<Matrix> pre;
  std::vector<Matrix> post;
  const Matrix& output() const { return post.empty() ? input : post.back(); }
};

// Gradient blocks congruent with Network::layers().
struct Gradients {
  std::vector<DenseParams> layers;

  static Gradients ZerosLike(const Network& net);
  Gradients& operator+=(const Gradients& other);
  double squared_norm() const;
};

Activations forward(const Network& net, const Matrix& batch);

// Backpropagates dL/d(output) through the network. When `grad_input` is
// non-null it receives dL/d(input).
Gradients backprop(const Network& net, const Activations& acts,
                   const Matrix& grad_output, Matrix* grad_input = nullptr);

enum class Loss { kCrossEntropy, kGeneralizedCrossEntropy };

std::string ToString(Loss loss);
Loss LossFromString(const std::string& name);

struct LossValue {
  double loss = 0.0;
  Matrix grad;  // dL/d(logits), already divided by the batch size.
};

Matrix softmax(const Matrix& logits);
Vector log_sum_exp_rows(const Matrix& logits);

// Per-sample cross-entropy values -log softmax(logits)[target].
Vector cross_entropy_per_sample(const Matrix& logits,
                                std::span<const int> targets);

// Mean (optionally weighted) softmax cross-entropy. With weights the loss is
// sum_i w_i ce_i / n, matching the unweighted loss when all w_i = 1.
LossValue cross_entropy(const Matrix& logits, std::span<const int> targets,
                        std::span<const double> weights = {});

// Generalized cross-entropy (1 - p_target^q) / q, averaged over the batch.
LossValue generalized_cross_entropy(const Matrix& logits,
                                    std::span<const int> targets, double q);

struct BackwardResult {
  Gradients grads;
  double loss = 0.0;
};

// Forward, loss and backprop in one call. GCE uses exponent `gce_q`.
BackwardResult backward(const Network& net, const Matrix& batch,
                        std::span<const int> targets, Loss loss,
                        double gce_q = 0.7);

// Backward rule of a gradient reversal node: the forward pass is the
// identity, the backward pass returns -lambda * upstream.
Matrix gradient_reversal(const Matrix& upstream, double lambda);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 20;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct AdamState {
  std::vector<DenseParams> m;
  std::vector<DenseParams> v;

  static AdamState ZerosLike(const Network& net);
};

// Bias-corrected Adam update for step index t >= 1.
void adam_step(Network& net, const Gradients& grads, AdamState& state,
               const TrainConfig& config, long t);

// Convenience bundle of a network with its optimizer state and step count.
struct Trainable {
  Network net;
  AdamState adam;
  long step = 0;

  explicit Trainable(Network n)
      : net(std::move(n)), adam(AdamState::ZerosLike(net)) {}
  void Apply(const Gradients& grads, const TrainConfig& config) {
    adam_step(net, grads, adam, config, ++step);
  }
};

// Gathers the given rows of `m` in order.
Matrix GatherRows(const Matrix& m, std::span<const std::size_t> rows);

}  // namespace bbl::nn

#endif  // BBL_TINYNET_H_
