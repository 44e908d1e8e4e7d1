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

#include "bbl/exact_info.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bbl/error.h"
#include "bbl/rng.h"

namespace bbl::info {
namespace {

constexpr double kSumTolerance = 1e-9;

using Coords = std::array<int, 3>;

// Flat row-major index of `c` restricted to the axes in `set`.
std::size_t ProjectIndex(const AlphabetSizes& sizes, AxisSet set,
                         const Coords& c) {
  std::size_t idx = 0;
  for (int ax = 0; ax < 3; ++ax) {
    if (set.contains(static_cast<Axis>(ax))) idx = idx * sizes[ax] + c[ax];
  }
  return idx;
}

std::size_t CellCount(const AlphabetSizes& sizes, AxisSet set) {
  std::size_t n = 1;
  for (int ax = 0; ax < 3; ++ax) {
    if (set.contains(static_cast<Axis>(ax))) n *= sizes[ax];
  }
  return n;
}

// Calls fn(coords) for every cell of the marginal over `set`; axes outside the
// set are pinned at zero.
template <typename Fn>
void ForEachCell(const AlphabetSizes& sizes, AxisSet set, Fn&& fn) {
  const int nz = set.contains(Axis::kZ) ? sizes[0] : 1;
  const int ny = set.contains(Axis::kY) ? sizes[1] : 1;
  const int na = set.contains(Axis::kA) ? sizes[2] : 1;
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int a = 0; a < na; ++a) fn(Coords{z, y, a});
}

void RequireDisjoint(AxisSet a, AxisSet b, const char* what) {
  if (a.intersects(b)) {
    throw InvalidArgument(std::string(what) + ": axes must be distinct");
  }
}

}  // namespace

JointPMF::JointPMF(AlphabetSizes sizes, std::vector<double> probs)
    : sizes_(sizes), probs_(std::move(probs)) {
  for (int s : sizes_) {
    if (s < 1) throw InvalidArgument("JointPMF: alphabet sizes must be >= 1");
  }
  const std::size_t cells =
      static_cast<std::size_t>(sizes_[0]) * sizes_[1] * sizes_[2];
  if (probs_.size() != cells) {
    throw ShapeError("JointPMF: expected " + std::to_string(cells) +
                     " probabilities, got " + std::to_string(probs_.size()));
  }
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw InvalidDistribution("JointPMF: negative or non-finite entry");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw InvalidDistribution("JointPMF: entries sum to " +
                              std::to_string(total) + ", expected 1");
  }
}

JointPMF JointPMF::FromCounts(AlphabetSizes sizes,
                              std::span<const double> counts) {
  double total = 0.0;
  for (double c : counts) {
    if (!(c >= 0.0)) throw InvalidDistribution("FromCounts: negative count");
    total += c;
  }
  if (total <= 0.0) throw InvalidDistribution("FromCounts: all counts zero");
  std::vector<double> probs(counts.begin(), counts.end());
  for (double& p : probs) p /= total;
  return JointPMF(sizes, std::move(probs));
}

std::vector<double> JointPMF::Marginal(AxisSet keep) const {
  std::vector<double> out(CellCount(sizes_, keep), 0.0);
  ForEachCell(sizes_, AxisSet{Axis::kZ, Axis::kY, Axis::kA},
              [&](const Coords& c) {
                out[ProjectIndex(sizes_, keep, c)] += at(c[0], c[1], c[2]);
              });
  return out;
}

nlohmann::json JointPMF::ToJson() const {
  return nlohmann::json{{"sizes", sizes_}, {"probs", probs_}};
}

JointPMF JointPMF::FromJson(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("sizes") || !doc.contains("probs")) {
    throw FormatError("JointPMF JSON needs \"sizes\" and \"probs\"");
  }
  const auto& s = doc.at("sizes");
  if (!s.is_array() || s.size() != 3) {
    throw FormatError("JointPMF JSON: \"sizes\" must have three entries");
  }
  try {
    AlphabetSizes sizes{s[0].get<int>(), s[1].get<int>(), s[2].get<int>()};
    return JointPMF(sizes, doc.at("probs").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("JointPMF JSON: ") + e.what());
  }
}

double entropy(std::span<const double> pmf) {
  double total = 0.0;
  double h = 0.0;
  for (double p : pmf) {
    if (!(p >= 0.0)) throw InvalidDistribution("entropy: negative entry");
    total += p;
    if (p > 0.0) h -= p * std::log(p);
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw InvalidDistribution("entropy: entries sum to " +
                              std::to_string(total));
  }
  return std::max(h, 0.0);
}

double entropy(const JointPMF& joint, AxisSet axes) {
  return entropy(joint.Marginal(axes));
}

double conditional_entropy(const JointPMF& joint, AxisSet target,
                           AxisSet given) {
  RequireDisjoint(target, given, "conditional_entropy");
  if (target.empty()) throw InvalidArgument("conditional_entropy: no target");
  const AxisSet both = target | given;
  const auto p_tg = joint.Marginal(both);
  const auto p_g = joint.Marginal(given);
  double h = 0.0;
  ForEachCell(joint.sizes(), both, [&](const Coords& c) {
    const double p = p_tg[ProjectIndex(joint.sizes(), both, c)];
    if (p <= 0.0) return;
    h -= p * std::log(p / p_g[ProjectIndex(joint.sizes(), given, c)]);
  });
  return std::max(h, 0.0);
}

double conditional_entropy(const JointPMF& joint, Axis target, Axis given) {
  return conditional_entropy(joint, AxisSet(target), AxisSet(given));
}

double conditional_mi(const JointPMF& joint, AxisSet first, AxisSet second,
                      AxisSet given) {
  RequireDisjoint(first, second, "mutual_information");
  RequireDisjoint(first, given, "conditional_mi");
  RequireDisjoint(second, given, "conditional_mi");
  if (first.empty() || second.empty()) {
    throw InvalidArgument("mutual_information: empty axis set");
  }
  const auto& sizes = joint.sizes();
  const AxisSet all = first | second | given;
  const AxisSet fg = first | given;
  const AxisSet sg = second | given;
  const auto p_all = joint.Marginal(all);
  const auto p_fg = joint.Marginal(fg);
  const auto p_sg = joint.Marginal(sg);
  const auto p_g = joint.Marginal(given);
  double mi = 0.0;
  ForEachCell(sizes, all, [&](const Coords& c) {
    const double p = p_all[ProjectIndex(sizes, all, c)];
    if (p <= 0.0) return;
    const double num = p * p_g[ProjectIndex(sizes, given, c)];
    const double den = p_fg[ProjectIndex(sizes, fg, c)] *
                       p_sg[ProjectIndex(sizes, sg, c)];
    mi += p * std::log(num / den);
  });
  return mi;
}

double conditional_mi(const JointPMF& joint, Axis first, Axis second,
                      Axis given) {
  return conditional_mi(joint, AxisSet(first), AxisSet(second),
                        AxisSet(given));
}

double mutual_information(const JointPMF& joint, AxisSet first,
                          AxisSet second) {
  return conditional_mi(joint, first, second, AxisSet{});
}

double mutual_information(const JointPMF& joint, Axis first, Axis second) {
  return mutual_information(joint, AxisSet(first), AxisSet(second));
}

double interaction_information(const JointPMF& joint) {
  return mutual_information(joint, Axis::kZ, Axis::kY) -
         conditional_mi(joint, Axis::kZ, Axis::kY, Axis::kA);
}

BoundTerms bound_margin(const JointPMF& joint) {
  BoundTerms t;
  t.izy = mutual_information(joint, Axis::kZ, Axis::kY);
  t.iza = mutual_information(joint, Axis::kZ, Axis::kA);
  t.hya = conditional_entropy(joint, Axis::kY, Axis::kA);
  t.margin = t.iza + t.hya - t.izy;
  return t;
}

double strong_bound_margin(const JointPMF& joint) {
  const BoundTerms t = bound_margin(joint);
  const double h_y_za =
      conditional_entropy(joint, AxisSet(Axis::kY), {Axis::kZ, Axis::kA});
  return t.margin - h_y_za;
}

bool interaction_min_property(const JointPMF& joint, double tolerance) {
  const double interaction = interaction_information(joint);
  const double smallest =
      std::min({mutual_information(joint, Axis::kZ, Axis::kY),
                mutual_information(joint, Axis::kY, Axis::kA),
                mutual_information(joint, Axis::kZ, Axis::kA)});
  return interaction <= smallest + tolerance;
}

JointPMF random_joint(AlphabetSizes sizes, double concentration,
                      std::uint64_t seed) {
  for (int s : sizes) {
    if (s < 1) throw InvalidArgument("random_joint: sizes must be >= 1");
  }
  if (!(concentration > 0.0)) {
    throw InvalidArgument("random_joint: concentration must be positive");
  }
  const std::size_t cells =
      static_cast<std::size_t>(sizes[0]) * sizes[1] * sizes[2];
  Rng rng(seed);
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> probs(cells);
  double total = 0.0;
  // Small concentrations can underflow every draw; redraw until one is
  // positive.
  while (total <= 0.0) {
    total = 0.0;
    for (double& p : probs) {
      p = gamma(rng);
      total += p;
    }
  }
  for (double& p : probs) p /= total;
  return JointPMF(sizes, std::move(probs));
}

JointPMF extreme_bias_joint(std::span<const double> pz,
                            std::span<const double> pa,
                            std::span<const int> g, int y_size) {
  if (g.size() != pa.size()) {
    throw ShapeError("extreme_bias_joint: g must map every attribute value");
  }
  if (y_size < 1) throw InvalidArgument("extreme_bias_joint: y_size < 1");
  for (int y : g) {
    if (y < 0 || y >= y_size) {
      throw InvalidArgument("extreme_bias_joint: g(a) outside target alphabet");
    }
  }
  entropy(pz);
  entropy(pa);
  const AlphabetSizes sizes{static_cast<int>(pz.size()), y_size,
                            static_cast<int>(pa.size())};
  std::vector<double> probs(
      static_cast<std::size_t>(sizes[0]) * sizes[1] * sizes[2], 0.0);
  for (int z = 0; z < sizes[0]; ++z) {
    for (int a = 0; a < sizes[2]; ++a) {
      probs[(static_cast<std::size_t>(z) * y_size + g[a]) * sizes[2] + a] =
          pz[z] * pa[a];
    }
  }
  return JointPMF(sizes, std::move(probs));
}

double binary_entropy(double p) {
  if (p < 0.0 || p > 1.0) throw InvalidArgument("binary_entropy: p not in [0,1]");
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  return h;
}

}  // namespace bbl::info
