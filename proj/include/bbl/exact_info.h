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

// Exact entropies and mutual informations of a finite joint distribution
// over (Z, Y, A). Every quantity is in nats with the convention 0 ln 0 = 0.
// These are the ground-truth oracle for the sample estimators and for the
// bound 0 <= I(Z;Y) <= I(Z;A) + H(Y|A).

#ifndef BBL_EXACT_INFO_H_
#define BBL_EXACT_INFO_H_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

namespace bbl::info {

enum class Axis : int { kZ = 0, kY = 1, kA = 2 };

// A subset of {Z, Y, A}, stored as a bitmask.
class AxisSet {
 public:
  constexpr AxisSet() = default;
  constexpr AxisSet(Axis a) : mask_(1u << static_cast<int>(a)) {}  // NOLINT
  constexpr AxisSet(std::initializer_list<Axis> axes) {
    for (Axis a : axes) mask_ |= 1u << static_cast<int>(a);
  }
  constexpr bool contains(Axis a) const {
    return (mask_ >> static_cast<int>(a)) & 1u;
  }
  constexpr bool empty() const { return mask_ == 0; }
  constexpr bool intersects(AxisSet o) const { return (mask_ & o.mask_) != 0; }
  constexpr AxisSet operator|(AxisSet o) const {
    AxisSet r;
    r.mask_ = mask_ | o.mask_;
    return r;
  }
  constexpr unsigned mask() const { return mask_; }

 private:
  unsigned mask_ = 0;
};

using AlphabetSizes = std::array<int, 3>;

class JointPMF {
 public:
  // Validates sizes >= 1, probs.size() == |Z||Y||A|, entries >= 0 and a total
  // within 1e-9 of one. Never renormalizes. `probs` is row-major (z, y, a).
  JointPMF(AlphabetSizes sizes, std::vector<double> probs);

  // Normalizes a table of non-negative counts (at least one positive).
  static JointPMF FromCounts(AlphabetSizes sizes,
                             std::span<const double> counts);

  const AlphabetSizes& sizes() const { return sizes_; }
  int size(Axis axis) const { return sizes_[static_cast<int>(axis)]; }
  std::span<const double> probs() const { return probs_; }
  double at(int z, int y, int a) const {
    return probs_[(static_cast<std::size_t>(z) * sizes_[1] + y) * sizes_[2] +
                  a];
  }

  // Marginal over the axes in `keep`, flattened row-major in (Z, Y, A) order
  // of the kept axes.
  std::vector<double> Marginal(AxisSet keep) const;

  nlohmann::json ToJson() const;
  static JointPMF FromJson(const nlohmann::json& doc);

 private:
  AlphabetSizes sizes_;
  std::vector<double> probs_;
};

// Throws InvalidDistribution on a negative entry or a total more than 1e-9
// away from one.
double entropy(std::span<const double> pmf);

double entropy(const JointPMF& joint, AxisSet axes);

// H(target | given) = sum_g p(g) H(target | G = g); zero-probability
// conditioning values contribute nothing.
double conditional_entropy(const JointPMF& joint, AxisSet target,
                           AxisSet given);
double conditional_entropy(const JointPMF& joint, Axis target, Axis given);

double mutual_information(const JointPMF& joint, AxisSet first,
                          AxisSet second);
double mutual_information(const JointPMF& joint, Axis first, Axis second);

double conditional_mi(const JointPMF& joint, AxisSet first, AxisSet second,
                      AxisSet given);
double conditional_mi(const JointPMF& joint, Axis first, Axis second,
                      Axis given);

// I(Z;Y;A) = I(Z;Y) - I(Z;Y|A). Can be negative (XOR).
double interaction_information(const JointPMF& joint);

struct BoundTerms {
  double izy = 0.0;
  double iza = 0.0;
  double hya = 0.0;
  // I(Z;A) + H(Y|A) - I(Z;Y); never below zero up to rounding.
  double margin = 0.0;
};

BoundTerms bound_margin(const JointPMF& joint);

// I(Z;A) + H(Y|A) - I(Z;Y) - H(Y|Z,A). Tighter than bound_margin by H(Y|Z,A).
double strong_bound_margin(const JointPMF& joint);

// Checks I(Z;Y;A) <= min{I(Z;Y), I(Y;A), I(Z;A)} within `tolerance`.
bool interaction_min_property(const JointPMF& joint, double tolerance = 1e-9);

// Dirichlet(concentration, ..., concentration) draw over all cells.
JointPMF random_joint(AlphabetSizes sizes, double concentration,
                      std::uint64_t seed);

// p(z, y, a) = p(z) p(a) 1[y = g(a)]: the target is a function of the
// attribute and the feature is independent of the attribute.
JointPMF extreme_bias_joint(std::span<const double> pz,
                            std::span<const double> pa,
                            std::span<const int> g, int y_size);

// Binary entropy in nats.
double binary_entropy(double p);

}  // namespace bbl::info

#endif  // BBL_EXACT_INFO_H_
