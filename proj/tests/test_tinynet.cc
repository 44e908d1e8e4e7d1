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

#include "bbl/tinynet.h"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "bbl/error.h"
#include "grad_check.h"

namespace bbl::nn {
namespace {

TEST(Network, ShapesAndInit) {
  Rng rng(1);
  Network net({{3, 5, Activation::kRelu}, {5, 2, Activation::kIdentity}}, rng);
  EXPECT_EQ(net.input_width(), 3);
  EXPECT_EQ(net.output_width(), 2);
  EXPECT_EQ(net.parameter_count(), 3u * 5 + 5 + 5 * 2 + 2);
  const double bound = 1.0 / std::sqrt(3.0);
  EXPECT_LE(net.layers()[0].weight.cwiseAbs().maxCoeff(), bound);
  EXPECT_THROW(Network({{3, 5, Activation::kRelu}, {4, 2, Activation::kIdentity}}),
               ShapeError);
  EXPECT_THROW(Network(std::vector<LayerSpec>{}), InvalidArgument);
}

TEST(Network, SeededInitIsDeterministic) {
  Rng a(7), b(7);
  const std::vector<LayerSpec> specs = {{4, 3, Activation::kTanh}};
  EXPECT_EQ(Network(specs, a).ToJson(), Network(specs, b).ToJson());
}

TEST(Network, IdentityLayerPassesInputs) {
  Network net({{3, 3, Activation::kIdentity}});
  net.mutable_layers()[0].weight = Matrix::Identity(3, 3);
  const Matrix x = Matrix::Random(4, 3);
  EXPECT_EQ(forward(net, x).output(), x);
  EXPECT_THROW(forward(net, Matrix::Zero(2, 4)), ShapeError);
}

TEST(Network, ActivationValues) {
  Network net({{1, 1, Activation::kSoftplus}});
  net.mutable_layers()[0].weight(0, 0) = 1.0;
  Matrix x(3, 1);
  x << 0.0, 50.0, -50.0;
  const Matrix y = forward(net, x).output();
  EXPECT_NEAR(y(0, 0), std::log(2.0), 1e-15);
  EXPECT_NEAR(y(1, 0), 50.0, 1e-12);
  EXPECT_GT(y(2, 0), 0.0);
  EXPECT_EQ(ActivationFromString("relu"), Activation::kRelu);
  EXPECT_THROW(ActivationFromString("gelu"), FormatError);
}

TEST(Network, JsonRoundTrip) {
  Rng rng(3);
  Network net({{4, 6, Activation::kSoftplus}, {6, 3, Activation::kIdentity}}, rng);
  const auto doc = net.ToJson();
  const Network back = Network::FromJson(nlohmann::json::parse(doc.dump()));
  EXPECT_EQ(back.specs(), net.specs());
  for (std::size_t l = 0; l < 2; ++l) {
    EXPECT_EQ(back.layers()[l].weight, net.layers()[l].weight);
    EXPECT_EQ(back.layers()[l].bias, net.layers()[l].bias);
  }
  auto bad = doc;
  bad["layers"][0]["bias"] = std::vector<double>{1.0};
  EXPECT_THROW(Network::FromJson(bad), FormatError);
  bad = doc;
  bad["format"] = "other";
  EXPECT_THROW(Network::FromJson(bad), FormatError);
}

TEST(Loss, CrossEntropyValues) {
  Matrix logits = Matrix::Zero(2, 2);
  const std::vector<int> t = {0, 1};
  const auto lv = cross_entropy(logits, t);
  EXPECT_NEAR(lv.loss, std::log(2.0), 1e-15);
  EXPECT_NEAR(lv.grad(0, 0), -0.25, 1e-15);
  EXPECT_NEAR(lv.grad(0, 1), 0.25, 1e-15);
  const std::vector<double> w = {0.0, 2.0};
  EXPECT_NEAR(cross_entropy(logits, t, w).loss, std::log(2.0), 1e-15);
  const std::vector<int> out_of_range = {0, 2};
  EXPECT_THROW(cross_entropy(logits, out_of_range), InvalidArgument);
}

TEST(Loss, SoftmaxIsStable) {
  Matrix logits(1, 2);
  logits << 1000.0, 1000.0;
  EXPECT_NEAR(softmax(logits)(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(log_sum_exp_rows(logits)(0), 1000.0 + std::log(2.0), 1e-12);
}

TEST(Loss, GeneralizedCrossEntropyLimits) {
  Matrix logits = Matrix::Zero(1, 2);
  const std::vector<int> t = {0};
  // (1 - 0.5^q) / q
  EXPECT_NEAR(generalized_cross_entropy(logits, t, 0.7).loss,
              (1.0 - std::pow(0.5, 0.7)) / 0.7, 1e-15);
  // q -> 0 recovers cross-entropy.
  EXPECT_NEAR(generalized_cross_entropy(logits, t, 1e-7).loss, std::log(2.0), 1e-6);
}

TEST(Gradients, MatchFiniteDifferences) {
  Rng rng(2026);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto c = testing::RandomCase(rng);
    worst = std::max(worst, testing::GradientRelativeError(c));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Gradients, InputGradientMatchesFiniteDifferences) {
  Rng rng(5);
  Network net({{3, 4, Activation::kTanh}, {4, 2, Activation::kIdentity}}, rng);
  Matrix x = Matrix::Random(5, 3);
  const std::vector<int> t = {0, 1, 1, 0, 1};
  const auto acts = forward(net, x);
  const auto lv = cross_entropy(acts.output(), t);
  Matrix gx;
  backprop(net, acts, lv.grad, &gx);
  const double h = 1e-6;
  for (int i = 0; i < x.size(); ++i) {
    Matrix up = x, down = x;
    up.data()[i] += h;
    down.data()[i] -= h;
    const double num = (cross_entropy(forward(net, up).output(), t).loss -
                        cross_entropy(forward(net, down).output(), t).loss) /
                       (2 * h);
    EXPECT_NEAR(gx.data()[i], num, 1e-8);
  }
}

TEST(Gradients, ReversalNegatesAndScales) {
  Matrix g(1, 2);
  g << 1.0, -2.0;
  const Matrix r = gradient_reversal(g, 0.5);
  EXPECT_EQ(r(0, 0), -0.5);
  EXPECT_EQ(r(0, 1), 1.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Network net({{1, 1, Activation::kIdentity}});
  Gradients g = Gradients::ZerosLike(net);
  g.layers[0].weight(0, 0) = 3.0;
  g.layers[0].bias(0) = -0.2;
  Trainable tr(net);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  tr.Apply(g, cfg);
  // Bias-corrected m / sqrt(v) is sign(g) on the first step.
  EXPECT_NEAR(tr.net.layers()[0].weight(0, 0), -0.01, 1e-9);
  EXPECT_NEAR(tr.net.layers()[0].bias(0), 0.01, 1e-9);
  EXPECT_THROW(adam_step(tr.net, g, tr.adam, cfg, 0), InvalidArgument);
}

TEST(Adam, FitsLogisticRegression) {
  Rng rng(9);
  std::normal_distribution<double> nd;
  Matrix x(400, 2);
  std::vector<int> t(400);
  for (int i = 0; i < 400; ++i) {
    x(i, 0) = nd(rng);
    x(i, 1) = nd(rng);
    t[i] = x(i, 0) + x(i, 1) > 0.0;
  }
  Trainable tr(Network({{2, 2, Activation::kIdentity}}, rng));
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 300; ++step) {
    const auto r = backward(tr.net, x, t, Loss::kCrossEntropy);
    if (step == 0) first = r.loss;
    last = r.loss;
    tr.Apply(r.grads, cfg);
  }
  EXPECT_LT(last, 0.2 * first);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.Validate());
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.Validate(), InvalidArgument);
  cfg = TrainConfig{};
  cfg.beta1 = 1.0;
  EXPECT_THROW(cfg.Validate(), InvalidArgument);
}

TEST(GatherRows, Order) {
  Matrix m(3, 1);
  m << 10, 20, 30;
  const std::vector<std::size_t> rows = {2, 0};
  const Matrix g = GatherRows(m, rows);
  EXPECT_EQ(g(0, 0), 30);
  EXPECT_EQ(g(1, 0), 10);
}

}  // namespace
}  // namespace bbl::nn
