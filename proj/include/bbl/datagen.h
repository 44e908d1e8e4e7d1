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

// Bias-controlled labeled datasets: synthetic Gaussian tasks, colorized digit
// images, biased/bias-conflicting mixtures, balanced evaluation splits, and
// the IDX / BBL1 / CSV file formats.

#ifndef BBL_DATAGEN_H_
#define BBL_DATAGEN_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace bbl::data {

struct LabeledDataset {
  Eigen::MatrixXd features;  // n x d
  std::vector<int> targets;
  std::vector<int> attributes;
  int target_card = 2;
  int attribute_card = 2;
  std::string provenance;

  long size() const { return static_cast<long>(targets.size()); }
  int dim() const { return static_cast<int>(features.cols()); }
  void Validate() const;
  LabeledDataset Subset(std::span<const std::size_t> rows) const;
};

// Rows of `a` followed by rows of `b`; keeps the provenance of `a`.
LabeledDataset Concatenate(const LabeledDataset& a, const LabeledDataset& b);

enum class BiasKind { kColorVariance, kConflictFraction, kAgreementProb };

std::string ToString(BiasKind kind);
BiasKind BiasKindFromString(const std::string& name);

struct BiasSpec {
  BiasKind kind = BiasKind::kAgreementProb;
  double value = 1.0;
  double derived_hya = 0.0;  // nats, filled in by Make()

  // Validates the range for `kind` and computes the implied H(Y|A).
  static BiasSpec Make(BiasKind kind, double value);
};

// H(Y|A) from empirical joint counts, in nats.
double empirical_hya(std::span<const int> targets,
                     std::span<const int> attributes);

struct GaussianTaskOptions {
  int signal_dims = 2;
  int spurious_dims = 8;
  double noise_sigma = 1.0;
};

// Y uniform binary; A = Y with probability q, else 1 - Y. Features are
// (2Y-1) on the signal block and (2A-1) on the spurious block plus
// N(0, sigma^2) noise.
LabeledDataset gen_gaussian_biased(long n, double agreement_prob,
                                   const GaussianTaskOptions& opts,
                                   std::uint64_t seed);

// Pool with exactly balanced targets where every sample is biased (A = Y) or,
// with `conflicting`, every sample is bias-conflicting (A = 1 - Y).
LabeledDataset gen_gaussian_pool(long n, bool conflicting,
                                 const GaussianTaskOptions& opts,
                                 std::uint64_t seed);

// ---- IDX -------------------------------------------------------------------

struct IdxPayload {
  enum class Kind { kImages, kLabels };
  Kind kind = Kind::kLabels;
  std::vector<std::uint32_t> dims;
  Eigen::MatrixXd images;   // count x (rows * cols), scaled to [0, 1]
  std::vector<int> labels;  // for label payloads
  int rows = 0;
  int cols = 0;
};

// Big-endian IDX with magic 0x00000803 (u8 images, 3 dims) or 0x00000801 (u8
// labels, 1 dim). Throws FormatError on a bad magic or trailing bytes and
// TruncationError on a short payload.
IdxPayload parse_idx(std::span<const std::uint8_t> bytes);
IdxPayload read_idx_file(const std::filesystem::path& path);

// ---- colorized digits ------------------------------------------------------

struct GrayImages {
  Eigen::MatrixXd pixels;  // n x (rows * cols), values in [0, 1]
  int rows = 28;
  int cols = 28;
};

// Ten well-separated RGB means in [0,1]^3, one per digit class.
const std::array<std::array<double, 3>, 10>& ColorPalette();

enum class Split { kTrain, kTest };

struct ColorizeOptions {
  int downsample = 2;  // average-pool factor; 1 keeps full resolution
};

// Train: color ~ N(palette[y], variance * I) clipped to [0,1]^3. Test: the
// mean is a uniformly random palette entry independent of the digit. The
// foreground (intensity > 0) is tinted by intensity * color; the attribute is
// the index of the palette entry nearest to the sampled color.
LabeledDataset colorize(const GrayImages& images, std::span<const int> labels,
                        double variance, Split split, std::uint64_t seed,
                        const ColorizeOptions& opts = {});

// Procedural seven-segment digits with random placement, stroke width and
// intensity. Stand-in when no IDX files are supplied.
std::pair<GrayImages, std::vector<int>> synth_digits(long n,
                                                     std::uint64_t seed,
                                                     int side = 28);

// ---- mixing and evaluation splits ------------------------------------------

enum class MixMode {
  kConstantTotal,   // |output| = total_n
  kConstantBiased,  // total_n biased samples plus the conflicting share
};

// Draws biased and conflicting samples so that a `conflict_fraction` share of
// the output is bias-conflicting. Counts are stratified over the pool cells,
// so symmetric pools give H(Y|A) = H_b(conflict_fraction) exactly.
LabeledDataset mix_bias(const LabeledDataset& biased_pool,
                        const LabeledDataset& conflicting_pool,
                        double conflict_fraction, long total_n, MixMode mode,
                        std::uint64_t seed);

struct EvalSplits {
  LabeledDataset unbiased;
  LabeledDataset bias_conflicting;
};

// Exactly `per_cell` samples for every (y, a) cell; the bias-conflicting split
// drops the aligned cells (y == a).
EvalSplits split_eval(const LabeledDataset& source, long per_cell,
                      std::uint64_t seed);

// ---- persistence -----------------------------------------------------------

// 16-byte header: "BBL1", u32 n, u32 d, u16 |Y|, u16 |A| (little endian);
// then n*d f64 features, n u16 targets, n u16 attributes, u32 length and the
// provenance bytes.
std::vector<std::uint8_t> EncodeContainer(const LabeledDataset& ds);
LabeledDataset DecodeContainer(std::span<const std::uint8_t> bytes);
void WriteContainer(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset ReadContainer(const std::filesystem::path& path);

// Two-file CSV: features (header f0..f{d-1}) and labels
// (target,attribute,provenance).
void WriteCsv(const LabeledDataset& ds, const std::filesystem::path& features,
              const std::filesystem::path& labels);
LabeledDataset ReadCsv(const std::filesystem::path& features,
                       const std::filesystem::path& labels);

// Loads either format: a path ending in ".csv" is the features half of a CSV
// pair whose labels live next to it as "<stem>.labels.csv".
LabeledDataset LoadDataset(const std::filesystem::path& path);

std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path);

}  // namespace bbl::data

#endif  // BBL_DATAGEN_H_
