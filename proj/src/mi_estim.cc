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
#include <string>

#include "bbl/error.h"
#include "bbl/exact_info.h"
#include "bbl/rng.h"
#include "bbl/tinynet.h"

namespace bbl::mi {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;

constexpr double kEulerGamma = 0.57721566490153286061;
constexpr double kJitterScale = 1e-10;

void CheckLabels(std::span<const int> labels, const char* what) {
  for (int v : labels) {
    if (v < 0) {
      throw InvalidArgument(std::string(what) + ": labels must be >= 0");
    }
  }
}

int AlphabetSize(std::span<const int> labels) {
  int m = 0;
  for (int v : labels) m = std::max(m, v + 1);
  return m;
}

// Clamps negative raw values to zero and records what happened.
void Finalize(MIEstimate& est, double raw) {
  est.diagnostics["raw_value"] = std::isfinite(raw) ? raw : 0.0;
  if (!std::isfinite(raw)) {
    est.diagnostics["non_finite"] = 1.0;
    raw = 0.0;
  }
  if (raw < 0.0) {
    est.diagnostics["clamped"] = 1.0;
    raw = 0.0;
  }
  est.value = raw;
}

// Lexicographic order over (row of a, row of b). Ties keep the relative input
// order, which is harmless: tied rows are identical.
std::vector<std::size_t> CanonicalOrder(const MatrixXd& a, const MatrixXd& b) {
  std::vector<std::size_t> order(static_cast<std::size_t>(a.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) {
                     for (Index c = 0; c < a.cols(); ++c) {
                       if (a(i, c) != a(j, c)) return a(i, c) < a(j, c);
                     }
                     for (Index c = 0; c < b.cols(); ++c) {
                       if (b(i, c) != b(j, c)) return b(i, c) < b(j, c);
                     }
                     return false;
                   });
  return order;
}

// digamma(n) for positive integers, tabulated up to `n_max`.
std::vector<double> DigammaTable(long n_max) {
  std::vector<double> t(static_cast<std::size_t>(n_max) + 1, 0.0);
  if (n_max >= 1) t[1] = -kEulerGamma;
  for (long n = 2; n <= n_max; ++n) t[n] = t[n - 1] + 1.0 / (n - 1);
  return t;
}

MatrixXd OneHot(std::span<const int> labels, int alphabet) {
  MatrixXd m = MatrixXd::Zero(static_cast<Index>(labels.size()), alphabet);
  for (std::size_t i = 0; i < labels.size(); ++i) m(i, labels[i]) = 1.0;
  return m;
}

// Column-wise standardization using statistics of `rows` of `m`.
void Standardize(MatrixXd& m, std::span<const std::size_t> rows) {
  for (Index c = 0; c < m.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r : rows) mean += m(r, c);
    mean /= static_cast<double>(rows.size());
    double var = 0.0;
    for (std::size_t r : rows) var += (m(r, c) - mean) * (m(r, c) - mean);
    var /= static_cast<double>(rows.size());
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    m.col(c) = ((m.col(c).array() - mean) / sd).matrix();
  }
}

double LogMeanExp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().mean());
}

double LogAddExp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Shared DV training. `y_onehot_classes` > 0 marks y as one-hot labels, in
// which case the held-out product-of-marginals expectation is computed
// exactly over all classes instead of by shuffling.
MIEstimate TrainDv(MatrixXd x, MatrixXd y, int y_onehot_classes,
                   const DVConfig& config) {
  config.Validate();
  const long n = static_cast<long>(x.rows());
  if (n < 64) {
    throw InvalidArgument("neural_dv_mi: needs at least 64 samples, got " +
                          std::to_string(n));
  }
  if (y.rows() != n) throw ShapeError("neural_dv_mi: row count mismatch");

  // Canonical order first so that the seeded split/batching below only
  // depends on the multiset of samples.
  {
    const auto order = CanonicalOrder(x, y);
    x = nn::GatherRows(x, order);
    y = nn::GatherRows(y, order);
  }

  Rng rng(DeriveSeed(config.seed, {HashTag("neural_dv")}));
  std::vector<std::size_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const long n_hold = std::max<long>(
      2, static_cast<long>(std::floor(config.holdout_fraction * n)));
  const long n_train = n - n_hold;
  std::vector<std::size_t> train_rows(perm.begin(), perm.begin() + n_train);
  std::vector<std::size_t> hold_rows(perm.begin() + n_train, perm.end());

  Standardize(x, train_rows);
  if (y_onehot_classes == 0) Standardize(y, train_rows);

  const int in_width = static_cast<int>(x.cols() + y.cols());
  std::vector<nn::LayerSpec> specs;
  int width = in_width;
  for (int l = 0; l < config.hidden_layers; ++l) {
    specs.push_back({width, config.hidden_width, nn::Activation::kSoftplus});
    width = config.hidden_width;
  }
  specs.push_back({width, 1, nn::Activation::kIdentity});
  nn::Trainable stat(nn::Network(specs, rng));

  nn::TrainConfig adam;
  adam.learning_rate = config.learning_rate;

  const int batch = static_cast<int>(std::min<long>(config.batch_size, n_train));
  MatrixXd stacked(2 * batch, in_width);
  std::vector<std::size_t> epoch_order = train_rows;
  std::size_t cursor = epoch_order.size();
  std::vector<int> shuffle_idx(batch);
  double ema_log = 0.0;
  double dv_ema = 0.0;
  for (int it = 0; it < config.iterations; ++it) {
    if (cursor + batch > epoch_order.size()) {
      std::shuffle(epoch_order.begin(), epoch_order.end(), rng);
      cursor = 0;
    }
    std::iota(shuffle_idx.begin(), shuffle_idx.end(), 0);
    std::shuffle(shuffle_idx.begin(), shuffle_idx.end(), rng);
    for (int b = 0; b < batch; ++b) {
      const std::size_t r = epoch_order[cursor + b];
      const std::size_t rm = epoch_order[cursor + shuffle_idx[b]];
      stacked.row(b) << x.row(r), y.row(r);
      stacked.row(batch + b) << x.row(r), y.row(rm);
    }
    cursor += batch;

    const nn::Activations acts = nn::forward(stat.net, stacked);
    const Eigen::VectorXd t = acts.output().col(0);
    const Eigen::VectorXd t_joint = t.head(batch);
    const Eigen::VectorXd t_marg = t.tail(batch);
    const double lme = LogMeanExp(t_marg);
    const double dv = t_joint.mean() - lme;
    if (!std::isfinite(dv)) {
      throw TrainingDiverged("neural_dv_mi: non-finite DV objective", it);
    }
    ema_log = it == 0 ? lme
                      : LogAddExp(std::log(config.ema_rate) + ema_log,
                                  std::log1p(-config.ema_rate) + lme);
    dv_ema = it == 0 ? dv : 0.99 * dv_ema + 0.01 * dv;

    // Loss = -(mean T_joint) + mean(exp T_marg) / ema, whose gradient is the
    // bias-corrected DV gradient.
    MatrixXd grad(2 * batch, 1);
    for (int b = 0; b < batch; ++b) {
      grad(b, 0) = -1.0 / batch;
      grad(batch + b, 0) = std::exp(t_marg(b) - ema_log) / batch;
    }
    const nn::Gradients g = nn::backprop(stat.net, acts, grad);
    stat.Apply(g, adam);
    if (!stat.net.all_finite()) {
      throw TrainingDiverged("neural_dv_mi: non-finite parameters", it);
    }
  }

  // Held-out evaluation.
  MatrixXd joint(n_hold, in_width);
  for (long i = 0; i < n_hold; ++i) {
    joint.row(i) << x.row(hold_rows[i]), y.row(hold_rows[i]);
  }
  const double mean_joint = nn::forward(stat.net, joint).output().mean();

  double log_marg = 0.0;
  if (y_onehot_classes > 0) {
    std::vector<double> counts(y_onehot_classes, 0.0);
    for (long i = 0; i < n_hold; ++i) {
      Index c;
      y.row(hold_rows[i]).maxCoeff(&c);
      counts[c] += 1.0;
    }
    MatrixXd prod(n_hold, in_width);
    double log_sum = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < y_onehot_classes; ++c) {
      if (counts[c] == 0.0) continue;
      for (long i = 0; i < n_hold; ++i) {
        prod.row(i) << x.row(hold_rows[i]), Eigen::RowVectorXd::Unit(y_onehot_classes, c);
      }
      const Eigen::VectorXd tc = nn::forward(stat.net, prod).output().col(0);
      log_sum = LogAddExp(log_sum, std::log(counts[c] / n_hold) + LogMeanExp(tc));
    }
    log_marg = log_sum;
  } else {
    constexpr int kShuffles = 8;
    Eigen::VectorXd all(static_cast<Index>(kShuffles) * n_hold);
    std::vector<std::size_t> shuffled = hold_rows;
    MatrixXd prod(n_hold, in_width);
    for (int s = 0; s < kShuffles; ++s) {
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      for (long i = 0; i < n_hold; ++i) {
        prod.row(i) << x.row(hold_rows[i]), y.row(shuffled[i]);
      }
      all.segment(static_cast<Index>(s) * n_hold, n_hold) =
          nn::forward(stat.net, prod).output().col(0);
    }
    log_marg = LogMeanExp(all);
  }

  MIEstimate est;
  est.estimator = EstimatorKind::kNeuralDv;
  est.n_samples = n;
  est.diagnostics["iterations"] = config.iterations;
  est.diagnostics["train_dv_ema"] = dv_ema;
  est.diagnostics["holdout_n"] = static_cast<double>(n_hold);
  est.diagnostics["batch_size"] = batch;
  const double raw = mean_joint - log_marg;
  if (!std::isfinite(raw)) {
    throw TrainingDiverged("neural_dv_mi: non-finite held-out value",
                           config.iterations);
  }
  Finalize(est, raw);
  return est;
}

}  // namespace

std::string ToString(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kPlugin:
      return "plugin";
    case EstimatorKind::kBinned:
      return "binned";
    case EstimatorKind::kKnn:
      return "knn";
    case EstimatorKind::kNeuralDv:
      return "neural_dv";
  }
  return "plugin";
}

EstimatorKind EstimatorFromString(const std::string& name) {
  if (name == "plugin") return EstimatorKind::kPlugin;
  if (name == "binned") return EstimatorKind::kBinned;
  if (name == "knn") return EstimatorKind::kKnn;
  if (name == "neural_dv") return EstimatorKind::kNeuralDv;
  throw InvalidArgument("unknown estimator \"" + name +
                        "\" (expected plugin, binned, knn or neural_dv)");
}

nlohmann::json MIEstimate::ToJson() const {
  return {{"estimator", ToString(estimator)},
          {"value_nats", value},
          {"n", n_samples},
          {"diagnostics", diagnostics}};
}

MIEstimate MIEstimate::FromJson(const nlohmann::json& doc) {
  try {
    MIEstimate e;
    e.estimator = EstimatorFromString(doc.at("estimator").get<std::string>());
    e.value = doc.at("value_nats").get<double>();
    e.n_samples = doc.at("n").get<long>();
    e.diagnostics = doc.at("diagnostics").get<std::map<std::string, double>>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("MIEstimate JSON: ") + ex.what());
  }
}

void SamplePairs::Validate() const {
  if (continuous.rows() != static_cast<Index>(labels.size())) {
    throw ShapeError("SamplePairs: " + std::to_string(continuous.rows()) +
                     " feature rows but " + std::to_string(labels.size()) +
                     " labels");
  }
  CheckLabels(labels, "SamplePairs");
  if (!continuous.allFinite()) {
    throw InvalidArgument("SamplePairs: non-finite feature value");
  }
}

MIEstimate plugin_mi(std::span<const int> x, std::span<const int> y) {
  if (x.size() != y.size()) {
    throw ShapeError("plugin_mi: length mismatch (" + std::to_string(x.size()) +
                     " vs " + std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) throw InvalidArgument("plugin_mi: needs n >= 2");
  CheckLabels(x, "plugin_mi");
  CheckLabels(y, "plugin_mi");
  const int nx = AlphabetSize(x);
  const int ny = AlphabetSize(y);
  std::vector<double> counts(static_cast<std::size_t>(nx) * ny, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) counts[x[i] * ny + y[i]] += 1.0;
  const auto joint = info::JointPMF::FromCounts({nx, ny, 1}, counts);
  MIEstimate est;
  est.estimator = EstimatorKind::kPlugin;
  est.n_samples = static_cast<long>(x.size());
  est.diagnostics["x_alphabet"] = nx;
  est.diagnostics["y_alphabet"] = ny;
  Finalize(est, info::mutual_information(joint, info::Axis::kZ, info::Axis::kY));
  return est;
}

MIEstimate binned_mi(const SamplePairs& pairs, int bins_per_dim) {
  pairs.Validate();
  const Index d = pairs.continuous.cols();
  if (d > 4) {
    throw InvalidArgument("binned_mi: unsupported dimension " +
                          std::to_string(d) + " (at most 4)");
  }
  if (d < 1) throw InvalidArgument("binned_mi: no feature columns");
  if (bins_per_dim < 2) throw InvalidArgument("binned_mi: bins_per_dim < 2");
  const long n = pairs.size();
  std::vector<int> cell(static_cast<std::size_t>(n), 0);
  for (Index c = 0; c < d; ++c) {
    const double lo = pairs.continuous.col(c).minCoeff();
    const double hi = pairs.continuous.col(c).maxCoeff();
    const int bins = hi > lo ? bins_per_dim : 1;
    for (long i = 0; i < n; ++i) {
      int b = 0;
      if (bins > 1) {
        b = static_cast<int>(
            std::floor((pairs.continuous(i, c) - lo) / (hi - lo) * bins));
        b = std::clamp(b, 0, bins - 1);
      }
      cell[i] = cell[i] * bins_per_dim + b;
    }
  }
  // Densify occupied cells so the plug-in alphabet stays small.
  std::vector<int> sorted = cell;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (int& v : cell) {
    v = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), v) -
                         sorted.begin());
  }
  MIEstimate est;
  if (n < 2) {
    est.estimator = EstimatorKind::kBinned;
    est.n_samples = n;
    est.diagnostics["low_sample"] = 1.0;
    Finalize(est, 0.0);
    return est;
  }
  est = plugin_mi(cell, pairs.labels);
  est.estimator = EstimatorKind::kBinned;
  est.diagnostics["bins_per_dim"] = bins_per_dim;
  est.diagnostics["occupied_bins"] = static_cast<double>(sorted.size());
  const double total_bins = std::pow(static_cast<double>(bins_per_dim), d);
  if (n < 5.0 * total_bins) est.diagnostics["low_sample"] = 1.0;
  return est;
}

MIEstimate knn_mi(const SamplePairs& pairs, int k) {
  pairs.Validate();
  if (k < 1) throw InvalidArgument("knn_mi: k must be >= 1");
  const long n = pairs.size();
  const int classes = AlphabetSize(pairs.labels);
  std::vector<long> class_count(classes, 0);
  for (int v : pairs.labels) ++class_count[v];
  for (int c = 0; c < classes; ++c) {
    if (class_count[c] > 0 && class_count[c] <= k) {
      throw InvalidArgument("knn_mi: label class " + std::to_string(c) +
                            " has " + std::to_string(class_count[c]) +
                            " samples, needs more than k = " +
                            std::to_string(k));
    }
  }
  MIEstimate est;
  est.estimator = EstimatorKind::kKnn;
  est.n_samples = n;
  est.diagnostics["k"] = k;
  const long present =
      std::count_if(class_count.begin(), class_count.end(),
                    [](long c) { return c > 0; });
  if (present <= 1) {
    Finalize(est, 0.0);
    return est;
  }

  // Canonical order, then a deterministic per-coordinate jitter so that
  // duplicated points never produce zero neighbour distances.
  MatrixXd labels_col(n, 1);
  for (long i = 0; i < n; ++i) labels_col(i, 0) = pairs.labels[i];
  const auto order = CanonicalOrder(pairs.continuous, labels_col);
  MatrixXd pts = nn::GatherRows(pairs.continuous, order);
  std::vector<int> lab(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) lab[i] = pairs.labels[order[i]];
  const Index d = pts.cols();
  for (Index c = 0; c < d; ++c) {
    const double mean = pts.col(c).mean();
    const double sd =
        std::sqrt((pts.col(c).array() - mean).square().mean());
    const double scale = kJitterScale * (sd > 0.0 ? sd : 1.0);
    for (long i = 0; i < n; ++i) {
      const std::uint64_t h = Mix64(static_cast<std::uint64_t>(i) * 131 + c);
      const double u = static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
      pts(i, c) += scale * u;
    }
  }

  const MatrixXd pts_t = pts.transpose();  // column per point
  const auto psi = DigammaTable(n);
  std::vector<double> dist(static_cast<std::size_t>(n));
  std::vector<double> same;
  same.reserve(static_cast<std::size_t>(n));
  double sum_psi_class = 0.0;
  double sum_psi_m = 0.0;
  for (long i = 0; i < n; ++i) {
    same.clear();
    const auto pi = pts_t.col(i);
    for (long j = 0; j < n; ++j) {
      dist[j] = (pts_t.col(j) - pi).squaredNorm();
      if (j != i && lab[j] == lab[i]) same.push_back(dist[j]);
    }
    std::nth_element(same.begin(), same.begin() + (k - 1), same.end());
    const double radius = same[k - 1];
    long m = 0;
    for (long j = 0; j < n; ++j) {
      if (j != i && dist[j] <= radius) ++m;
    }
    sum_psi_class += psi[class_count[lab[i]]];
    sum_psi_m += psi[m];
  }
  const double raw =
      psi[n] - sum_psi_class / n + psi[k] - sum_psi_m / n;
  Finalize(est, raw);
  return est;
}

void DVConfig::Validate() const {
  if (hidden_width < 1 || hidden_layers < 1) {
    throw InvalidArgument("DVConfig: hidden layers and width must be >= 1");
  }
  if (!(learning_rate > 0.0)) throw InvalidArgument("DVConfig: learning_rate");
  if (batch_size < 2) throw InvalidArgument("DVConfig: batch_size < 2");
  if (iterations < 1) throw InvalidArgument("DVConfig: iterations < 1");
  if (!(ema_rate > 0.0 && ema_rate < 1.0)) {
    throw InvalidArgument("DVConfig: ema_rate must lie in (0, 1)");
  }
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw InvalidArgument("DVConfig: holdout_fraction must lie in (0, 1)");
  }
}

MIEstimate neural_dv_mi(const SamplePairs& pairs, const DVConfig& config) {
  pairs.Validate();
  const int classes = AlphabetSize(pairs.labels);
  MIEstimate est =
      TrainDv(pairs.continuous, OneHot(pairs.labels, classes), classes, config);
  est.diagnostics["label_alphabet"] = classes;
  return est;
}

MIEstimate neural_dv_mi(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                        const DVConfig& config) {
  if (!x.allFinite() || !y.allFinite()) {
    throw InvalidArgument("neural_dv_mi: non-finite input");
  }
  return TrainDv(x, y, 0, config);
}

}  // namespace bbl::mi
