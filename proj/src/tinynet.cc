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
#include <string>

#include "bbl/error.h"

namespace bbl::nn {
namespace {

constexpr int kFormatVersion = 1;

Matrix Apply(Activation act, const Matrix& pre) {
  switch (act) {
    case Activation::kIdentity:
      return pre;
    case Activation::kRelu:
      return pre.cwiseMax(0.0);
    case Activation::kTanh:
      return pre.array().tanh().matrix();
    case Activation::kSoftplus:
      // log(1 + e^x) = max(x, 0) + log1p(e^-|x|)
      return pre.unaryExpr([](double x) {
        return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
      });
  }
  return pre;
}

// Elementwise derivative of the activation, expressed through pre/post.
Matrix Derivative(Activation act, const Matrix& pre, const Matrix& post) {
  switch (act) {
    case Activation::kIdentity:
      return Matrix::Ones(pre.rows(), pre.cols());
    case Activation::kRelu:
      return pre.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; });
    case Activation::kTanh:
      return (1.0 - post.array().square()).matrix();
    case Activation::kSoftplus:
      return pre.unaryExpr([](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                        : std::exp(x) / (1.0 + std::exp(x));
      });
  }
  return Matrix::Ones(pre.rows(), pre.cols());
}

void CheckTargets(const Matrix& logits, std::span<const int> targets) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows()) {
    throw ShapeError("loss: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(logits.rows()) +
                     " rows");
  }
  for (int t : targets) {
    if (t < 0 || t >= logits.cols()) {
      throw InvalidArgument("loss: target " + std::to_string(t) +
                            " outside label alphabet of size " +
                            std::to_string(logits.cols()));
    }
  }
}

}  // namespace

std::string ToString(Activation act) {
  switch (act) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
    case Activation::kSoftplus:
      return "softplus";
  }
  return "identity";
}

Activation ActivationFromString(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "softplus") return Activation::kSoftplus;
  throw FormatError("unknown activation \"" + name + "\"");
}

std::string ToString(Loss loss) {
  switch (loss) {
    case Loss::kCrossEntropy:
      return "cross_entropy";
    case Loss::kGeneralizedCrossEntropy:
      return "generalized_cross_entropy";
  }
  return "cross_entropy";
}

Loss LossFromString(const std::string& name) {
  if (name == "cross_entropy") return Loss::kCrossEntropy;
  if (name == "generalized_cross_entropy") return Loss::kGeneralizedCrossEntropy;
  throw InvalidArgument("unknown loss \"" + name + "\"");
}

Network::Network(std::vector<LayerSpec> specs, Rng& rng)
    : specs_(std::move(specs)) {
  Validate();
  layers_.reserve(specs_.size());
  for (const LayerSpec& s : specs_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.in));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseParams p{Matrix(s.out, s.in), Vector(s.out)};
    for (Eigen::Index r = 0; r < p.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < p.weight.cols(); ++c) p.weight(r, c) = u(rng);
    for (Eigen::Index r = 0; r < p.bias.size(); ++r) p.bias(r) = u(rng);
    layers_.push_back(std::move(p));
  }
}

Network::Network(std::vector<LayerSpec> specs) : specs_(std::move(specs)) {
  Validate();
  for (const LayerSpec& s : specs_) {
    layers_.push_back({Matrix::Zero(s.out, s.in), Vector::Zero(s.out)});
  }
}

void Network::Validate() const {
  if (specs_.empty()) throw InvalidArgument("Network: no layers");
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].in < 1 || specs_[i].out < 1) {
      throw InvalidArgument("Network: layer widths must be positive");
    }
    if (i > 0 && specs_[i].in != specs_[i - 1].out) {
      throw ShapeError("Network: layer " + std::to_string(i) + " expects " +
                       std::to_string(specs_[i].in) + " inputs but layer " +
                       std::to_string(i - 1) + " produces " +
                       std::to_string(specs_[i - 1].out));
    }
  }
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

bool Network::all_finite() const {
  for (const auto& l : layers_) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

nlohmann::json Network::ToJson() const {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const auto& s = specs_[i];
    const auto& p = layers_[i];
    std::vector<double> w;
    w.reserve(p.weight.size());
    for (Eigen::Index r = 0; r < p.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < p.weight.cols(); ++c)
        w.push_back(p.weight(r, c));
    layers.push_back({{"in", s.in},
                      {"out", s.out},
                      {"activation", ToString(s.act)},
                      {"weight", w},
                      {"bias", std::vector<double>(p.bias.data(),
                                                   p.bias.data() + p.bias.size())}});
  }
  return {{"format", "bbl.tinynet"}, {"version", kFormatVersion},
          {"layers", layers}};
}

Network Network::FromJson(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "bbl.tinynet") {
      throw FormatError("network JSON: unexpected format tag");
    }
    if (doc.at("version").get<int>() != kFormatVersion) {
      throw FormatError("network JSON: unsupported version");
    }
    std::vector<LayerSpec> specs;
    for (const auto& l : doc.at("layers")) {
      specs.push_back({l.at("in").get<int>(), l.at("out").get<int>(),
                       ActivationFromString(l.at("activation"))});
    }
    Network net(specs);
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto& l = doc.at("layers")[i];
      const auto w = l.at("weight").get<std::vector<double>>();
      const auto b = l.at("bias").get<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(specs[i].in * specs[i].out) ||
          b.size() != static_cast<std::size_t>(specs[i].out)) {
        throw FormatError("network JSON: layer " + std::to_string(i) +
                          " has the wrong number of parameters");
      }
      auto& p = net.layers_[i];
      for (int r = 0; r < specs[i].out; ++r)
        for (int c = 0; c < specs[i].in; ++c) p.weight(r, c) = w[r * specs[i].in + c];
      for (int r = 0; r < specs[i].out; ++r) p.bias(r) = b[r];
    }
    if (!net.all_finite()) throw FormatError("network JSON: non-finite parameter");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("network JSON: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("network JSON: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("network JSON: ") + e.what());
  }
}

Gradients Gradients::ZerosLike(const Network& net) {
  Gradients g;
  for (const auto& l : net.layers()) {
    g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()),
                        Vector::Zero(l.bias.size())});
  }
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.layers.size() != layers.size()) {
    throw ShapeError("Gradients: layer count mismatch");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weight += other.layers[i].weight;
    layers[i].bias += other.layers[i].bias;
  }
  return *this;
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& l : layers) s += l.weight.squaredNorm() + l.bias.squaredNorm();
  return s;
}

Activations forward(const Network& net, const Matrix& batch) {
  if (batch.cols() != net.input_width()) {
    throw ShapeError("forward: batch width " + std::to_string(batch.cols()) +
                     " does not match input width " +
                     std::to_string(net.input_width()));
  }
  Activations acts;
  acts.input = batch;
  const Matrix* x = &acts.input;
  for (std::size_t i = 0; i < net.specs().size(); ++i) {
    const auto& p = net.layers()[i];
    Matrix pre = (*x) * p.weight.transpose();
    pre.rowwise() += p.bias.transpose();
    acts.post.push_back(Apply(net.specs()[i].act, pre));
    acts.pre.push_back(std::move(pre));
    x = &acts.post.back();
  }
  return acts;
}

Gradients backprop(const Network& net, const Activations& acts,
                   const Matrix& grad_output, Matrix* grad_input) {
  const Matrix& out = acts.output();
  if (grad_output.rows() != out.rows() || grad_output.cols() != out.cols()) {
    throw ShapeError("backprop: upstream gradient shape mismatch");
  }
  Gradients g = Gradients::ZerosLike(net);
  Matrix delta = grad_output;
  for (int i = static_cast<int>(net.specs().size()) - 1; i >= 0; --i) {
    delta = delta.cwiseProduct(
        Derivative(net.specs()[i].act, acts.pre[i], acts.post[i]));
    const Matrix& prev = i == 0 ? acts.input : acts.post[i - 1];
    g.layers[i].weight.noalias() = delta.transpose() * prev;
    g.layers[i].bias = delta.colwise().sum().transpose();
    if (i > 0 || grad_input != nullptr) {
      Matrix next = delta * net.layers()[i].weight;
      delta = std::move(next);
    }
  }
  if (grad_input != nullptr) *grad_input = std::move(delta);
  return g;
}

Matrix softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Vector log_sum_exp_rows(const Matrix& logits) {
  Vector out(logits.rows());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out(r) = m + std::log((logits.row(r).array() - m).exp().sum());
  }
  return out;
}

Vector cross_entropy_per_sample(const Matrix& logits,
                                std::span<const int> targets) {
  CheckTargets(logits, targets);
  const Vector lse = log_sum_exp_rows(logits);
  Vector ce(logits.rows());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    ce(r) = lse(r) - logits(r, targets[r]);
  }
  return ce;
}

LossValue cross_entropy(const Matrix& logits, std::span<const int> targets,
                        std::span<const double> weights) {
  CheckTargets(logits, targets);
  if (!weights.empty() &&
      static_cast<Eigen::Index>(weights.size()) != logits.rows()) {
    throw ShapeError("cross_entropy: weight count mismatch");
  }
  const Vector ce = cross_entropy_per_sample(logits, targets);
  LossValue out;
  out.grad = softmax(logits);
  const double n = static_cast<double>(logits.rows());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double w = weights.empty() ? 1.0 : weights[r];
    out.grad(r, targets[r]) -= 1.0;
    out.grad.row(r) *= w / n;
    out.loss += w * ce(r);
  }
  out.loss /= n;
  return out;
}

LossValue generalized_cross_entropy(const Matrix& logits,
                                    std::span<const int> targets, double q) {
  CheckTargets(logits, targets);
  if (!(q > 0.0)) throw InvalidArgument("generalized_cross_entropy: q <= 0");
  LossValue out;
  out.grad = softmax(logits);
  const double n = static_cast<double>(logits.rows());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double pq = std::pow(out.grad(r, targets[r]), q);
    out.loss += (1.0 - pq) / q;
    out.grad(r, targets[r]) -= 1.0;
    out.grad.row(r) *= pq / n;
  }
  out.loss /= n;
  return out;
}

BackwardResult backward(const Network& net, const Matrix& batch,
                        std::span<const int> targets, Loss loss,
                        double gce_q) {
  const Activations acts = forward(net, batch);
  LossValue lv;
  switch (loss) {
    case Loss::kCrossEntropy:
      lv = cross_entropy(acts.output(), targets);
      break;
    case Loss::kGeneralizedCrossEntropy:
      lv = generalized_cross_entropy(acts.output(), targets, gce_q);
      break;
    default:
      throw InvalidArgument("backward: unknown loss tag");
  }
  if (!std::isfinite(lv.loss)) throw TrainingDiverged("non-finite loss", 0);
  return {backprop(net, acts, lv.grad), lv.loss};
}

Matrix gradient_reversal(const Matrix& upstream, double lambda) {
  return -lambda * upstream;
}

void TrainConfig::Validate() const {
  if (!(learning_rate > 0.0)) {
    throw InvalidArgument("TrainConfig: learning_rate must be positive");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidArgument("TrainConfig: betas must lie in [0, 1)");
  }
  if (batch_size < 1) throw InvalidArgument("TrainConfig: batch_size < 1");
  if (!(epsilon > 0.0)) throw InvalidArgument("TrainConfig: epsilon <= 0");
  if (epochs < 0) throw InvalidArgument("TrainConfig: epochs < 0");
}

AdamState AdamState::ZerosLike(const Network& net) {
  AdamState s;
  s.m = Gradients::ZerosLike(net).layers;
  s.v = s.m;
  return s;
}

void adam_step(Network& net, const Gradients& grads, AdamState& state,
               const TrainConfig& config, long t) {
  if (t < 1) throw InvalidArgument("adam_step: step index must be >= 1");
  auto& layers = net.mutable_layers();
  if (grads.layers.size() != layers.size() ||
      state.m.size() != layers.size() || state.v.size() != layers.size()) {
    throw ShapeError("adam_step: layer count mismatch");
  }
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  const double lr = config.learning_rate;
  const double eps = config.epsilon;
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    if (param.rows() != g.rows() || param.cols() != g.cols()) {
      throw ShapeError("adam_step: gradient block shape mismatch");
    }
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    update(layers[i].weight, grads.layers[i].weight, state.m[i].weight,
           state.v[i].weight);
    update(layers[i].bias, grads.layers[i].bias, state.m[i].bias,
           state.v[i].bias);
  }
}

Matrix GatherRows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace bbl::nn
