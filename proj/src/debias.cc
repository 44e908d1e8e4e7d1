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

#include "bbl/debias.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>

#include "bbl/error.h"
#include "bbl/rng.h"

namespace bbl::debias {
namespace {

using nn::Activation;
using nn::Matrix;

constexpr int kCheckpointVersion = 1;

std::vector<nn::LayerSpec> ExtractorSpecs(int input_dim,
                                          const DebiasConfig& c) {
  return {{input_dim, c.hidden_width, Activation::kRelu},
          {c.hidden_width, c.feature_dim, Activation::kIdentity}};
}

std::vector<nn::LayerSpec> HeadSpecs(int feature_dim, int classes) {
  return {{feature_dim, classes, Activation::kIdentity}};
}

std::vector<nn::LayerSpec> AuxClassifierSpecs(int in, int hidden, int out) {
  return {{in, hidden, Activation::kRelu}, {hidden, out, Activation::kIdentity}};
}

std::vector<nn::LayerSpec> StatisticsSpecs(int in, int hidden) {
  return {{in, hidden, Activation::kSoftplus},
          {hidden, hidden, Activation::kSoftplus},
          {hidden, 1, Activation::kIdentity}};
}

int ArgMax(const Matrix& m, Eigen::Index row) {
  Eigen::Index best;
  m.row(row).maxCoeff(&best);
  return static_cast<int>(best);
}

double LogMeanExp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().mean());
}

// Mean of cos(z_i, z_j)^power over pairs i < j accepted by `keep`.
template <typename Keep>
RegularizerValue PairwiseCosine(const Matrix& z, int power, Keep&& keep) {
  const Eigen::Index n = z.rows();
  RegularizerValue out;
  out.grad = Matrix::Zero(n, z.cols());
  Eigen::VectorXd norms(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    norms(i) = z.row(i).norm();
    if (norms(i) == 0.0) out.degenerate = true;
  }
  long pairs = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (!keep(i, j)) continue;
      ++pairs;
      if (norms(i) == 0.0 || norms(j) == 0.0) continue;
      const double c = z.row(i).dot(z.row(j)) / (norms(i) * norms(j));
      out.value += power == 2 ? c * c : c;
      const double outer = power == 2 ? 2.0 * c : 1.0;
      // d cos / d z_i = z_j / (|z_i||z_j|) - cos z_i / |z_i|^2
      out.grad.row(i) += outer * (z.row(j) / (norms(i) * norms(j)) -
                                  c * z.row(i) / (norms(i) * norms(i)));
      out.grad.row(j) += outer * (z.row(i) / (norms(i) * norms(j)) -
                                  c * z.row(j) / (norms(j) * norms(j)));
    }
  }
  if (pairs > 0) {
    out.value /= static_cast<double>(pairs);
    out.grad /= static_cast<double>(pairs);
  }
  return out;
}

void CheckFinite(double loss, long step, const char* what) {
  if (!std::isfinite(loss)) {
    throw TrainingDiverged(std::string("train: non-finite ") + what, step);
  }
}

// Mutable training state for one run.
class Trainer {
 public:
  Trainer(Method method, const data::LabeledDataset& data,
          const DebiasConfig& config)
      : method_(method),
        data_(data),
        config_(config),
        model_(initialize_model(method, data.dim(), data.target_card,
                                data.attribute_card, config)),
        extractor_(model_.extractor),
        aux_rng_(DeriveSeed(config.base.seed, {HashTag("aux")})) {
    for (const auto& h : model_.heads) heads_.emplace_back(h);
    const int fd = config.feature_dim;
    const int na = data.attribute_card;
    switch (method) {
      case Method::kLnlAdv:
      case Method::kBlindeye:
        aux_.emplace(nn::Network(
            AuxClassifierSpecs(fd, config.aux_hidden_width, na), aux_rng_));
        break;
      case Method::kMineAdv:
        aux_.emplace(nn::Network(
            StatisticsSpecs(fd + na, config.aux_hidden_width), aux_rng_));
        break;
      case Method::kLff:
        biased_extractor_.emplace(
            nn::Network(ExtractorSpecs(data.dim(), config), aux_rng_));
        biased_head_.emplace(
            nn::Network(HeadSpecs(fd, data.target_card), aux_rng_));
        ema_biased_.assign(static_cast<std::size_t>(data.size()), -1.0);
        ema_debiased_.assign(static_cast<std::size_t>(data.size()), -1.0);
        break;
      default:
        break;
    }
  }

  TrainedModel Run() {
    const long n = data_.size();
    const auto& base = config_.base;
    Rng batch_rng(DeriveSeed(base.seed, {HashTag("batches")}));
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 1; epoch <= base.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), batch_rng);
      diag_sums_.clear();
      double loss_sum = 0.0;
      long batches = 0;
      for (long start = 0; start < n; start += base.batch_size) {
        const long stop = std::min<long>(n, start + base.batch_size);
        std::span<const std::size_t> rows(order.data() + start,
                                          static_cast<std::size_t>(stop - start));
        loss_sum += Step(rows);
        ++batches;
      }
      SyncModel();
      EpochLog log;
      log.epoch = epoch;
      log.loss = loss_sum / static_cast<double>(batches);
      log.accuracy = accuracy(model_, data_);
      for (const auto& [k, v] : diag_sums_) {
        log.diagnostics[k] = v / static_cast<double>(batches);
      }
      model_.log.push_back(std::move(log));
    }
    return model_;
  }

 private:
  void SyncModel() {
    model_.extractor = extractor_.net;
    for (std::size_t i = 0; i < heads_.size(); ++i) model_.heads[i] = heads_[i].net;
  }

  // One optimizer step on the given rows; returns the objective value.
  double Step(std::span<const std::size_t> rows) {
    ++step_;
    const auto& base = config_.base;
    const double lambda = config_.lambda;
    const Matrix x = nn::GatherRows(data_.features, rows);
    std::vector<int> y(rows.size()), a(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      y[i] = data_.targets[rows[i]];
      a[i] = data_.attributes[rows[i]];
    }
    const auto bsz = static_cast<Eigen::Index>(rows.size());

    const nn::Activations ext_acts = nn::forward(extractor_.net, x);
    const Matrix& z = ext_acts.output();
    Matrix dz = Matrix::Zero(z.rows(), z.cols());
    std::vector<nn::Gradients> head_grads;
    double loss = 0.0;

    if (method_ == Method::kDi) {
      // Each sample is classified by the head of its own domain; per-domain
      // losses are weighted by their share of the batch.
      for (std::size_t d = 0; d < heads_.size(); ++d) {
        std::vector<std::size_t> idx;
        std::vector<int> yd;
        for (std::size_t i = 0; i < rows.size(); ++i) {
          if (a[i] == static_cast<int>(d)) {
            idx.push_back(i);
            yd.push_back(y[i]);
          }
        }
        if (idx.empty()) {
          head_grads.push_back(nn::Gradients::ZerosLike(heads_[d].net));
          continue;
        }
        const double share = static_cast<double>(idx.size()) / bsz;
        const Matrix zd = nn::GatherRows(z, idx);
        const nn::Activations acts = nn::forward(heads_[d].net, zd);
        nn::LossValue lv = nn::cross_entropy(acts.output(), yd);
        lv.grad *= share;
        loss += share * lv.loss;
        Matrix dzd;
        head_grads.push_back(nn::backprop(heads_[d].net, acts, lv.grad, &dzd));
        for (std::size_t r = 0; r < idx.size(); ++r) {
          dz.row(static_cast<Eigen::Index>(idx[r])) += dzd.row(static_cast<Eigen::Index>(r));
        }
      }
    } else {
      const nn::Activations head_acts = nn::forward(heads_[0].net, z);
      const Matrix& logits = head_acts.output();
      nn::LossValue lv;
      if (method_ == Method::kLff) {
        lv = LffWeightedLoss(x, logits, y, rows);
      } else {
        lv = nn::cross_entropy(logits, y);
      }
      loss = lv.loss;
      head_grads.push_back(nn::backprop(heads_[0].net, head_acts, lv.grad, &dz));
    }
    CheckFinite(loss, step_, "classification loss");

    switch (method_) {
      case Method::kLnlAdv: {
        const nn::Activations acts = nn::forward(aux_->net, z);
        const nn::LossValue lv = nn::cross_entropy(acts.output(), a);
        CheckFinite(lv.loss, step_, "adversary loss");
        Matrix dz_adv;
        const nn::Gradients g = nn::backprop(aux_->net, acts, lv.grad, &dz_adv);
        aux_->Apply(g, base);
        if (lambda != 0.0) dz += nn::gradient_reversal(dz_adv, lambda);
        diag_sums_["adversary_loss"] += lv.loss;
        break;
      }
      case Method::kMineAdv:
        MineStep(z, a, lambda, dz, loss);
        break;
      case Method::kEnd: {
        const RegularizerValue reg = end_regularizer(z, a);
        double total = reg.value;
        if (lambda != 0.0) dz += lambda * reg.grad;
        if (config_.end_entangle) {
          const RegularizerValue ent = end_entangle_term(z, y, a);
          total += config_.end_entangle_weight * ent.value;
          if (lambda != 0.0) dz += lambda * config_.end_entangle_weight * ent.grad;
          diag_sums_["entangle"] += ent.value;
        }
        loss += lambda * total;
        diag_sums_["end_reg"] += reg.value;
        break;
      }
      case Method::kBlindeye: {
        const nn::Activations acts = nn::forward(aux_->net, z);
        const nn::LossValue lv = nn::cross_entropy(acts.output(), a);
        CheckFinite(lv.loss, step_, "attribute classifier loss");
        const nn::Gradients g = nn::backprop(aux_->net, acts, lv.grad);
        const RegularizerValue reg = blindeye_regularizer(acts.output());
        if (lambda != 0.0) {
          Matrix dz_reg;
          nn::backprop(aux_->net, acts, reg.grad, &dz_reg);
          dz += lambda * dz_reg;
        }
        aux_->Apply(g, base);
        loss += lambda * reg.value;
        diag_sums_["attribute_loss"] += lv.loss;
        diag_sums_["blindeye_reg"] += reg.value;
        break;
      }
      default:
        break;
    }
    CheckFinite(loss, step_, "objective");

    const nn::Gradients ext_grad = nn::backprop(extractor_.net, ext_acts, dz);
    extractor_.Apply(ext_grad, base);
    for (std::size_t i = 0; i < heads_.size(); ++i) heads_[i].Apply(head_grads[i], base);
    if (!extractor_.net.all_finite()) {
      throw TrainingDiverged("train: non-finite extractor parameters", step_);
    }
    return loss;
  }

  // Trains the biased GCE model on the batch and returns the relative-
  // difficulty weighted cross-entropy of the main model.
  nn::LossValue LffWeightedLoss(const Matrix& x, const Matrix& logits,
                                std::span<const int> y,
                                std::span<const std::size_t> rows) {
    const auto& base = config_.base;
    const nn::Activations bz = nn::forward(biased_extractor_->net, x);
    const nn::Activations bh = nn::forward(biased_head_->net, bz.output());
    const nn::LossValue gce =
        nn::generalized_cross_entropy(bh.output(), y, config_.gce_q);
    CheckFinite(gce.loss, step_, "biased model loss");
    Matrix dzb;
    const nn::Gradients gh = nn::backprop(biased_head_->net, bh, gce.grad, &dzb);
    const nn::Gradients ge = nn::backprop(biased_extractor_->net, bz, dzb);
    biased_head_->Apply(gh, base);
    biased_extractor_->Apply(ge, base);

    const Eigen::VectorXd ce_b = nn::cross_entropy_per_sample(bh.output(), y);
    const Eigen::VectorXd ce_d = nn::cross_entropy_per_sample(logits, y);
    std::vector<double> w(rows.size());
    const double r = config_.lff_ema;
    double w_sum = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double& eb = ema_biased_[rows[i]];
      double& ed = ema_debiased_[rows[i]];
      eb = eb < 0.0 ? ce_b(i) : r * eb + (1.0 - r) * ce_b(i);
      ed = ed < 0.0 ? ce_d(i) : r * ed + (1.0 - r) * ce_d(i);
      w[i] = lff_weight(eb, ed);
      w_sum += w[i];
    }
    diag_sums_["biased_gce"] += gce.loss;
    diag_sums_["mean_weight"] += w_sum / static_cast<double>(rows.size());
    return nn::cross_entropy(logits, y, w);
  }

  void MineStep(const Matrix& z, std::span<const int> a, double lambda,
                Matrix& dz, double& loss) {
    const auto bsz = z.rows();
    const int fd = static_cast<int>(z.cols());
    const int na = data_.attribute_card;
    std::vector<int> perm(static_cast<std::size_t>(bsz));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), aux_rng_);
    Matrix input = Matrix::Zero(2 * bsz, fd + na);
    for (Eigen::Index i = 0; i < bsz; ++i) {
      input.row(i).head(fd) = z.row(i);
      input(i, fd + a[i]) = 1.0;
      input.row(bsz + i).head(fd) = z.row(i);
      input(bsz + i, fd + a[perm[i]]) = 1.0;
    }
    const nn::Activations acts = nn::forward(aux_->net, input);
    const Eigen::VectorXd t = acts.output().col(0);
    const Eigen::VectorXd t_marg = t.tail(bsz);
    const double lme = LogMeanExp(t_marg);
    const double dv = t.head(bsz).mean() - lme;
    CheckFinite(dv, step_, "DV objective");
    mine_ema_log_ = mine_steps_++ == 0
                        ? lme
                        : std::log(0.99 * std::exp(mine_ema_log_ - lme) + 0.01) + lme;

    // Statistics network ascends the bias-corrected DV bound.
    Matrix grad_t(2 * bsz, 1);
    for (Eigen::Index i = 0; i < bsz; ++i) {
      grad_t(i, 0) = -1.0 / bsz;
      grad_t(bsz + i, 0) = std::exp(t_marg(i) - mine_ema_log_) / bsz;
    }
    const nn::Gradients g = nn::backprop(aux_->net, acts, grad_t);

    if (lambda != 0.0) {
      // d DV / d T: 1/B on joint rows, -softmax(T_marg) on marginal rows.
      Matrix grad_dv(2 * bsz, 1);
      const Eigen::VectorXd soft = (t_marg.array() - t_marg.maxCoeff()).exp();
      const double norm = soft.sum();
      for (Eigen::Index i = 0; i < bsz; ++i) {
        grad_dv(i, 0) = 1.0 / bsz;
        grad_dv(bsz + i, 0) = -soft(i) / norm;
      }
      Matrix gin;
      nn::backprop(aux_->net, acts, grad_dv, &gin);
      dz += lambda * (gin.topRows(bsz).leftCols(fd) + gin.bottomRows(bsz).leftCols(fd));
    }
    aux_->Apply(g, config_.base);
    loss += lambda * dv;
    diag_sums_["dv"] += dv;
  }

  Method method_;
  const data::LabeledDataset& data_;
  DebiasConfig config_;
  TrainedModel model_;
  nn::Trainable extractor_;
  std::vector<nn::Trainable> heads_;
  Rng aux_rng_;
  std::optional<nn::Trainable> aux_;
  std::optional<nn::Trainable> biased_extractor_;
  std::optional<nn::Trainable> biased_head_;
  std::vector<double> ema_biased_;
  std::vector<double> ema_debiased_;
  double mine_ema_log_ = 0.0;
  long mine_steps_ = 0;
  long step_ = 0;
  std::map<std::string, double> diag_sums_;
};

}  // namespace

std::string ToString(Method method) {
  switch (method) {
    case Method::kBaseline:
      return "baseline";
    case Method::kLnlAdv:
      return "lnl_adv";
    case Method::kMineAdv:
      return "mine_adv";
    case Method::kEnd:
      return "end";
    case Method::kLff:
      return "lff";
    case Method::kDi:
      return "di";
    case Method::kBlindeye:
      return "blindeye";
  }
  return "baseline";
}

Method MethodFromString(const std::string& name) {
  for (Method m : AllMethods()) {
    if (ToString(m) == name) return m;
  }
  throw InvalidArgument("unknown method \"" + name +
                        "\" (expected baseline, lnl_adv, mine_adv, end, lff, "
                        "di or blindeye)");
}

const std::vector<Method>& AllMethods() {
  static const std::vector<Method> kAll = {
      Method::kBaseline, Method::kLnlAdv, Method::kMineAdv, Method::kEnd,
      Method::kLff,      Method::kDi,     Method::kBlindeye};
  return kAll;
}

void DebiasConfig::Validate() const {
  base.Validate();
  if (!(lambda >= 0.0)) throw InvalidArgument("DebiasConfig: lambda must be >= 0");
  if (hidden_width < 1 || feature_dim < 1 || aux_hidden_width < 1) {
    throw InvalidArgument("DebiasConfig: widths must be >= 1");
  }
  if (!(gce_q > 0.0 && gce_q <= 1.0)) {
    throw InvalidArgument("DebiasConfig: gce_q must lie in (0, 1]");
  }
  if (!(lff_ema >= 0.0 && lff_ema < 1.0)) {
    throw InvalidArgument("DebiasConfig: lff_ema must lie in [0, 1)");
  }
}

nlohmann::json DebiasConfig::ToJson() const {
  return {{"learning_rate", base.learning_rate},
          {"batch_size", base.batch_size},
          {"beta1", base.beta1},
          {"beta2", base.beta2},
          {"epsilon", base.epsilon},
          {"epochs", base.epochs},
          {"seed", base.seed},
          {"lambda", lambda},
          {"hidden_width", hidden_width},
          {"feature_dim", feature_dim},
          {"aux_hidden_width", aux_hidden_width},
          {"gce_q", gce_q},
          {"lff_ema", lff_ema},
          {"end_entangle", end_entangle},
          {"end_entangle_weight", end_entangle_weight}};
}

DebiasConfig DefaultConfig(Method method) {
  // Frozen from a coarse grid {0.1, 0.5, 1, 5} on the q = 0.9 Gaussian task.
  DebiasConfig c;
  switch (method) {
    case Method::kLnlAdv:
    case Method::kMineAdv:
      c.lambda = 1.0;
      break;
    case Method::kEnd:
    case Method::kBlindeye:
      c.lambda = 0.1;
      break;
    default:
      break;
  }
  return c;
}

void TrainedModel::Validate() const {
  if (heads.empty()) throw InvalidArgument("TrainedModel: no heads");
  if (extractor.output_width() != feature_dim) {
    throw ShapeError("TrainedModel: extractor width " +
                     std::to_string(extractor.output_width()) +
                     " != feature_dim " + std::to_string(feature_dim));
  }
  for (const auto& h : heads) {
    if (h.input_width() != feature_dim) {
      throw ShapeError("TrainedModel: head input width != feature_dim");
    }
    if (h.output_width() != target_card) {
      throw ShapeError("TrainedModel: head output width != target alphabet");
    }
  }
}

nlohmann::json TrainedModel::ToJson() const {
  nlohmann::json heads_json = nlohmann::json::array();
  for (const auto& h : heads) heads_json.push_back(h.ToJson());
  nlohmann::json log_json = nlohmann::json::array();
  for (const auto& e : log) {
    log_json.push_back({{"epoch", e.epoch},
                        {"loss", e.loss},
                        {"accuracy", e.accuracy},
                        {"diagnostics", e.diagnostics}});
  }
  return {{"format", "bbl.model"},
          {"version", kCheckpointVersion},
          {"feature_dim", feature_dim},
          {"target_card", target_card},
          {"attribute_card", attribute_card},
          {"extractor", extractor.ToJson()},
          {"heads", heads_json},
          {"metadata",
           {{"method", ToString(method)},
            {"lambda", lambda},
            {"seed", seed},
            {"provenance", provenance}}},
          {"log", log_json}};
}

TrainedModel TrainedModel::FromJson(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "bbl.model") {
      throw FormatError("checkpoint: unexpected format tag");
    }
    if (doc.at("version").get<int>() != kCheckpointVersion) {
      throw FormatError("checkpoint: unsupported version");
    }
    TrainedModel m;
    m.feature_dim = doc.at("feature_dim").get<int>();
    m.target_card = doc.at("target_card").get<int>();
    m.attribute_card = doc.at("attribute_card").get<int>();
    m.extractor = nn::Network::FromJson(doc.at("extractor"));
    for (const auto& h : doc.at("heads")) m.heads.push_back(nn::Network::FromJson(h));
    const auto& meta = doc.at("metadata");
    m.method = MethodFromString(meta.at("method").get<std::string>());
    m.lambda = meta.at("lambda").get<double>();
    m.seed = meta.at("seed").get<std::uint64_t>();
    m.provenance = meta.at("provenance").get<std::string>();
    for (const auto& e : doc.at("log")) {
      EpochLog l;
      l.epoch = e.at("epoch").get<int>();
      l.loss = e.at("loss").get<double>();
      l.accuracy = e.at("accuracy").get<double>();
      l.diagnostics = e.at("diagnostics").get<std::map<std::string, double>>();
      m.log.push_back(std::move(l));
    }
    m.Validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void TrainedModel::Save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << ToJson().dump(1) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

TrainedModel TrainedModel::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint " + path.string() + ": " + e.what());
  }
  return FromJson(doc);
}

TrainedModel initialize_model(Method method, int input_dim, int target_card,
                              int attribute_card, const DebiasConfig& config) {
  config.Validate();
  if (input_dim < 1) throw InvalidArgument("initialize_model: input_dim < 1");
  if (target_card < 2 || attribute_card < 1) {
    throw InvalidArgument("initialize_model: need >= 2 targets and >= 1 attribute");
  }
  TrainedModel m;
  m.method = method;
  m.feature_dim = config.feature_dim;
  m.target_card = target_card;
  m.attribute_card = attribute_card;
  m.lambda = config.lambda;
  m.seed = config.base.seed;
  Rng ext_rng(DeriveSeed(config.base.seed, {HashTag("extractor")}));
  Rng head_rng(DeriveSeed(config.base.seed, {HashTag("head")}));
  m.extractor = nn::Network(ExtractorSpecs(input_dim, config), ext_rng);
  const int n_heads = method == Method::kDi ? attribute_card : 1;
  for (int h = 0; h < n_heads; ++h) {
    m.heads.emplace_back(HeadSpecs(config.feature_dim, target_card), head_rng);
  }
  return m;
}

TrainedModel train(Method method, const data::LabeledDataset& data,
                   const DebiasConfig& config) {
  config.Validate();
  data.Validate();
  if (data.size() == 0) throw InvalidArgument("train: empty dataset");
  if (config.base.epochs < 1) {
    throw InvalidArgument("train: epochs must be >= 1 (the log would be empty)");
  }
  if (method == Method::kBlindeye && data.attribute_card < 2) {
    throw InvalidArgument("train: blindeye needs at least two attribute values");
  }
  Trainer trainer(method, data, config);
  TrainedModel model = trainer.Run();
  model.provenance = data.provenance;
  return model;
}

nn::Matrix extract_features(const TrainedModel& model, const nn::Matrix& x) {
  return nn::forward(model.extractor, x).output();
}

nn::Matrix predict_logits(const TrainedModel& model, const nn::Matrix& x) {
  const Matrix z = extract_features(model, x);
  Matrix logits = nn::forward(model.heads[0], z).output();
  for (std::size_t h = 1; h < model.heads.size(); ++h) {
    logits += nn::forward(model.heads[h], z).output();
  }
  return logits;
}

std::vector<int> predict(const TrainedModel& model, const nn::Matrix& x) {
  const Matrix logits = predict_logits(model, x);
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) out[r] = ArgMax(logits, r);
  return out;
}

double accuracy(const TrainedModel& model, const data::LabeledDataset& data) {
  if (data.size() == 0) throw InvalidArgument("accuracy: empty dataset");
  const auto pred = predict(model, data.features);
  long correct = 0;
  for (long i = 0; i < data.size(); ++i) correct += pred[i] == data.targets[i];
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

RegularizerValue end_regularizer(const nn::Matrix& features,
                                 std::span<const int> attributes) {
  if (features.rows() < 2) throw InvalidArgument("end_regularizer: batch < 2");
  if (static_cast<Eigen::Index>(attributes.size()) != features.rows()) {
    throw ShapeError("end_regularizer: attribute count mismatch");
  }
  return PairwiseCosine(features, 2, [&](Eigen::Index i, Eigen::Index j) {
    return attributes[i] == attributes[j];
  });
}

RegularizerValue end_entangle_term(const nn::Matrix& features,
                                   std::span<const int> targets,
                                   std::span<const int> attributes) {
  if (static_cast<Eigen::Index>(attributes.size()) != features.rows() ||
      static_cast<Eigen::Index>(targets.size()) != features.rows()) {
    throw ShapeError("end_entangle_term: label count mismatch");
  }
  RegularizerValue r = PairwiseCosine(features, 1, [&](Eigen::Index i, Eigen::Index j) {
    return targets[i] == targets[j] && attributes[i] != attributes[j];
  });
  r.value = -r.value;
  r.grad = -r.grad;
  return r;
}

double lff_weight(double ce_biased, double ce_debiased) {
  if (ce_biased < 0.0 || ce_debiased < 0.0) {
    throw InvalidArgument("lff_weight: losses must be non-negative");
  }
  const double total = ce_biased + ce_debiased;
  if (total == 0.0) return 0.5;
  return ce_biased / total;
}

RegularizerValue blindeye_regularizer(const nn::Matrix& attribute_logits) {
  if (attribute_logits.cols() < 2) {
    throw InvalidArgument("blindeye_regularizer: needs at least two attribute values");
  }
  const Eigen::Index n = attribute_logits.rows();
  const double k = static_cast<double>(attribute_logits.cols());
  RegularizerValue out;
  const Eigen::VectorXd lse = nn::log_sum_exp_rows(attribute_logits);
  const Matrix p = nn::softmax(attribute_logits);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.value += lse(i) - attribute_logits.row(i).mean();
  }
  out.value /= static_cast<double>(n);
  out.grad = ((p.array() - 1.0 / k) / static_cast<double>(n)).matrix();
  return out;
}

}  // namespace bbl::debias
