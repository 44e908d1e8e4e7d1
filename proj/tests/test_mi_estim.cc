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

#include "bbl/mi_estim.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "bbl/error.h"
#include "bbl/exact_info.h"

namespace bbl::mi {
namespace {

constexpr double kLn2 = 0.69314718055994530942;

// I(Z; sign(rho Z + sqrt(1 - rho^2) e)) for standard normal Z, e by
// Simpson quadrature: ln 2 - E_z[H_b(Phi(rho z / s))].
double SignChannelMI(double rho) {
  if (rho == 0.0) return 0.0;
  const double s = std::sqrt(1.0 - rho * rho);
  const int steps = 20000;
  const double lo = -12.0, hi = 12.0, h = (hi - lo) / steps;
  double acc = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double z = lo + i * h;
    const double p = 0.5 * std::erfc(-rho * z / s / std::sqrt(2.0));
    double hb = 0.0;
    if (p > 0.0 && p < 1.0) hb = -p * std::log(p) - (1 - p) * std::log(1 - p);
    const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * hb * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  }
  return kLn2 - acc * h / 3.0;
}

SamplePairs SignChannel(long n, double rho, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  SamplePairs p;
  p.continuous.resize(n, 1);
  p.labels.resize(n);
  for (long i = 0; i < n; ++i) {
    const double z = nd(rng);
    p.continuous(i, 0) = z;
    p.labels[i] = rho * z + std::sqrt(1 - rho * rho) * nd(rng) > 0.0 ? 1 : 0;
  }
  return p;
}

std::pair<std::vector<int>, std::vector<int>> SampleJoint(const info::JointPMF& j, long n,
                                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick(j.probs().begin(), j.probs().end());
  const int ny = j.sizes()[1], na = j.sizes()[2];
  std::vector<int> z(n), y(n);
  for (long i = 0; i < n; ++i) {
    const int cell = pick(rng);
    z[i] = cell / (ny * na);
    y[i] = (cell / na) % ny;
  }
  return {z, y};
}

TEST(PluginMI, IdenticalLabels) {
  std::vector<int> x(1000);
  for (int i = 0; i < 1000; ++i) x[i] = i % 2;
  const auto e = plugin_mi(x, x);
  EXPECT_NEAR(e.value, kLn2, 1e-12);
  EXPECT_EQ(e.estimator, EstimatorKind::kPlugin);
  EXPECT_EQ(e.n_samples, 1000);
}

TEST(PluginMI, ConstantLabelIsZero) {
  std::mt19937_64 rng(3);
  std::vector<int> x(500), y(500, 2);
  for (auto& v : x) v = static_cast<int>(rng() % 4);
  EXPECT_EQ(plugin_mi(x, y).value, 0.0);
}

TEST(PluginMI, Errors) {
  const std::vector<int> a = {0, 1, 0};
  const std::vector<int> b = {0, 1};
  EXPECT_THROW(plugin_mi(a, b), ShapeError);
  const std::vector<int> one = {0};
  EXPECT_THROW(plugin_mi(one, one), InvalidArgument);
  const std::vector<int> neg = {0, -1};
  EXPECT_THROW(plugin_mi(neg, neg), InvalidArgument);
}

TEST(PluginMI, ConvergesToExactValue) {
  const auto joint = info::random_joint({3, 3, 1}, 1.0, 11);
  const double truth = info::mutual_information(joint, info::Axis::kZ, info::Axis::kY);
  for (long n : {1000L, 10000L, 100000L}) {
    for (int s = 0; s < 5; ++s) {
      const auto [z, y] = SampleJoint(joint, n, 100 * n + s);
      EXPECT_LE(std::abs(plugin_mi(z, y).value - truth), 3.0 / std::sqrt(double(n)) + 0.01)
          << "n=" << n << " seed=" << s;
    }
  }
}

TEST(BinnedMI, IndependentIsSmall) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  SamplePairs p;
  p.continuous.resize(10000, 1);
  p.labels.resize(10000);
  for (int i = 0; i < 10000; ++i) {
    p.continuous(i, 0) = nd(rng);
    p.labels[i] = static_cast<int>(rng() % 2);
  }
  EXPECT_LE(binned_mi(p, 8).value, 0.05);
}

TEST(BinnedMI, NearDeterministic) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd(0.0, 1e-3);
  SamplePairs p;
  p.continuous.resize(10000, 1);
  p.labels.resize(10000);
  for (int i = 0; i < 10000; ++i) {
    p.labels[i] = static_cast<int>(rng() % 2);
    p.continuous(i, 0) = p.labels[i] + nd(rng);
  }
  EXPECT_NEAR(binned_mi(p, 8).value, kLn2, 0.05);
}

TEST(BinnedMI, DegenerateInputs) {
  SamplePairs two{Eigen::MatrixXd::Constant(2, 1, 0.5), {0, 1}};
  const auto e = binned_mi(two, 8);
  EXPECT_TRUE(std::isfinite(e.value));
  EXPECT_TRUE(e.flag("low_sample"));
  SamplePairs wide{Eigen::MatrixXd::Zero(10, 5), std::vector<int>(10, 0)};
  EXPECT_THROW(binned_mi(wide, 4), InvalidArgument);
  EXPECT_THROW(binned_mi(two, 1), InvalidArgument);
}

TEST(KnnMI, IndependentIsSmall) {
  auto p = SignChannel(20000, 0.0, 8);
  EXPECT_LE(std::abs(knn_mi(p, 5).value), 0.03);
}

TEST(KnnMI, SingleClassIsZero) {
  SamplePairs p{Eigen::MatrixXd::Random(50, 2), std::vector<int>(50, 1)};
  EXPECT_EQ(knn_mi(p, 5).value, 0.0);
}

TEST(KnnMI, SmallClassNamed) {
  SamplePairs p{Eigen::MatrixXd::Random(20, 1), std::vector<int>(20, 0)};
  p.labels[3] = 1;
  p.labels[7] = 1;
  try {
    knn_mi(p, 5);
    FAIL() << "expected an error";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos) << e.what();
  }
}

TEST(KnnMI, DuplicatePointsStayFinite) {
  SamplePairs p{Eigen::MatrixXd::Zero(40, 2), std::vector<int>(40, 0)};
  for (int i = 0; i < 20; ++i) p.labels[i] = 1;
  const auto e = knn_mi(p, 3);
  EXPECT_TRUE(std::isfinite(e.value));
  EXPECT_GE(e.value, 0.0);
}

TEST(KnnMI, MatchesQuadratureOracle) {
  for (double rho : {0.5, 0.9}) {
    const auto p = SignChannel(20000, rho, 21);
    EXPECT_NEAR(knn_mi(p, 5).value, SignChannelMI(rho), 0.03) << "rho=" << rho;
  }
}

TEST(Estimators, PermutationInvariant) {
  auto p = SignChannel(3000, 0.7, 4);
  std::vector<std::size_t> perm(3000);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(9));
  SamplePairs q;
  q.continuous.resize(3000, 1);
  q.labels.resize(3000);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    q.continuous(i, 0) = p.continuous(perm[i], 0);
    q.labels[i] = p.labels[perm[i]];
  }
  EXPECT_EQ(knn_mi(p, 5).value, knn_mi(q, 5).value);
  EXPECT_EQ(binned_mi(p, 8).value, binned_mi(q, 8).value);
  DVConfig cfg;
  cfg.iterations = 200;
  cfg.seed = 3;
  EXPECT_EQ(neural_dv_mi(p, cfg).value, neural_dv_mi(q, cfg).value);
  std::vector<int> bins(3000);
  for (int i = 0; i < 3000; ++i) bins[i] = p.continuous(i, 0) > 0.0;
  std::vector<int> bins_q(3000);
  for (int i = 0; i < 3000; ++i) bins_q[i] = bins[perm[i]];
  EXPECT_EQ(plugin_mi(bins, p.labels).value, plugin_mi(bins_q, q.labels).value);
}

TEST(NeuralDV, SmallSampleRejected) {
  SamplePairs p{Eigen::MatrixXd::Random(63, 1), std::vector<int>(63, 0)};
  EXPECT_THROW(neural_dv_mi(p, DVConfig{}), InvalidArgument);
}

TEST(NeuralDV, InvalidConfig) {
  DVConfig cfg;
  cfg.ema_rate = 1.0;
  EXPECT_THROW(cfg.Validate(), InvalidArgument);
  cfg = DVConfig{};
  cfg.holdout_fraction = 0.0;
  EXPECT_THROW(cfg.Validate(), InvalidArgument);
}

TEST(NeuralDV, DeterministicAndNonNegative) {
  const auto p = SignChannel(2000, 0.0, 12);
  DVConfig cfg;
  cfg.iterations = 300;
  cfg.seed = 5;
  const auto a = neural_dv_mi(p, cfg);
  const auto b = neural_dv_mi(p, cfg);
  EXPECT_EQ(a.value, b.value);
  EXPECT_GE(a.value, 0.0);
  EXPECT_TRUE(a.diagnostics.count("raw_value"));
  if (a.diagnostics.at("raw_value") < 0.0) EXPECT_TRUE(a.flag("clamped"));
}

TEST(NeuralDV, RecoversSignChannelRoughly) {
  const auto p = SignChannel(8000, 0.9, 13);
  DVConfig cfg;
  cfg.seed = 2;
  EXPECT_NEAR(neural_dv_mi(p, cfg).value, SignChannelMI(0.9), 0.07);
}

TEST(MIEstimate, JsonRoundTrip) {
  MIEstimate e;
  e.value = 0.25;
  e.estimator = EstimatorKind::kKnn;
  e.n_samples = 100;
  e.diagnostics["k"] = 5;
  const auto doc = e.ToJson();
  EXPECT_EQ(doc.at("estimator"), "knn");
  EXPECT_EQ(doc.at("value_nats"), 0.25);
  const auto back = MIEstimate::FromJson(doc);
  EXPECT_EQ(back.value, e.value);
  EXPECT_EQ(back.estimator, e.estimator);
  EXPECT_EQ(back.diagnostics, e.diagnostics);
  EXPECT_THROW(MIEstimate::FromJson(nlohmann::json::object()), FormatError);
  EXPECT_THROW(EstimatorFromString("mine"), InvalidArgument);
}

}  // namespace
}  // namespace bbl::mi
