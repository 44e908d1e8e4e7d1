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

#include "bbl/datagen.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "bbl/error.h"
#include "bbl/exact_info.h"
#include "bbl/rng.h"

namespace bbl::data {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr char kContainerMagic[4] = {'B', 'B', 'L', '1'};
constexpr double kMaxColorVariance = 0.05;

std::string FormatDouble(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double ParseDouble(std::string_view s, const std::string& where) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw FormatError(where + ": cannot parse number \"" + std::string(s) + "\"");
  }
  return v;
}

void CheckLabelRange(std::span<const int> labels, int card, const char* what) {
  for (int v : labels) {
    if (v < 0 || v >= card) {
      throw InvalidArgument(std::string(what) + ": label " + std::to_string(v) +
                            " outside alphabet of size " + std::to_string(card));
    }
  }
}

std::array<double, 3> Clip01(std::array<double, 3> c) {
  for (double& v : c) v = std::clamp(v, 0.0, 1.0);
  return c;
}

int NearestPaletteIndex(const std::array<double, 3>& color) {
  const auto& pal = ColorPalette();
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(pal.size()); ++i) {
    double d = 0.0;
    for (int c = 0; c < 3; ++c) d += (color[c] - pal[i][c]) * (color[c] - pal[i][c]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::array<double, 3> SampleColor(int mean_index, double variance, Rng& rng) {
  std::array<double, 3> c = ColorPalette()[mean_index];
  if (variance > 0.0) {
    std::normal_distribution<double> noise(0.0, std::sqrt(variance));
    for (double& v : c) v += noise(rng);
  }
  return Clip01(c);
}

void PutU32LE(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void PutU16LE(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  void Need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw TruncationError(what_ + ": truncated payload (need " +
                            std::to_string(pos_ + n) + " bytes, have " +
                            std::to_string(bytes_.size()) + ")");
    }
  }
  std::uint32_t U32BE() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_++];
    return v;
  }
  std::uint32_t U32LE() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint16_t U16LE() {
    Need(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  double F64LE() {
    Need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    double d;
    std::memcpy(&d, &v, sizeof(d));
    return d;
  }
  std::uint8_t U8() {
    Need(1);
    return bytes_[pos_++];
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

// Splits one CSV line, honoring double-quoted fields.
std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string QuoteCsv(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void RequireAllBiased(const LabeledDataset& ds, bool conflicting,
                      const char* what) {
  for (long i = 0; i < ds.size(); ++i) {
    if ((ds.targets[i] == ds.attributes[i]) == conflicting) {
      throw InvalidArgument(std::string(what) + ": sample " + std::to_string(i) +
                            (conflicting ? " is biased" : " is bias-conflicting"));
    }
  }
}

// Largest-remainder allocation of `total` over cells proportional to `avail`.
std::vector<long> Allocate(long total, const std::vector<long>& avail) {
  const long sum = std::accumulate(avail.begin(), avail.end(), 0L);
  std::vector<long> out(avail.size(), 0);
  if (total == 0 || sum == 0) return out;
  std::vector<std::pair<double, std::size_t>> rema;
  long used = 0;
  for (std::size_t i = 0; i < avail.size(); ++i) {
    const double exact = static_cast<double>(total) * avail[i] / sum;
    out[i] = static_cast<long>(std::floor(exact));
    used += out[i];
    rema.push_back({exact - out[i], i});
  }
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; used < total && j < rema.size(); ++j, ++used) {
    ++out[rema[j].second];
  }
  return out;
}

// Picks alloc[c] random rows from every (y, a) cell of `pool`.
std::vector<std::size_t> DrawFromCells(const LabeledDataset& pool,
                                       long needed, Rng& rng,
                                       const char* pool_name) {
  if (needed > pool.size()) {
    throw InvalidArgument(std::string("mix_bias: insufficient ") + pool_name +
                          " pool: needed " + std::to_string(needed) +
                          ", available " + std::to_string(pool.size()));
  }
  std::map<std::pair<int, int>, std::vector<std::size_t>> cells;
  for (long i = 0; i < pool.size(); ++i) {
    cells[{pool.targets[i], pool.attributes[i]}].push_back(static_cast<std::size_t>(i));
  }
  std::vector<long> avail;
  for (const auto& [key, rows] : cells) avail.push_back(static_cast<long>(rows.size()));
  const auto alloc = Allocate(needed, avail);
  std::vector<std::size_t> out;
  std::size_t c = 0;
  for (auto& [key, rows] : cells) {
    if (alloc[c] > static_cast<long>(rows.size())) {
      throw InvalidArgument(std::string("mix_bias: insufficient ") + pool_name +
                            " pool cell (y=" + std::to_string(key.first) +
                            ", a=" + std::to_string(key.second) + "): needed " +
                            std::to_string(alloc[c]) + ", available " +
                            std::to_string(rows.size()));
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    out.insert(out.end(), rows.begin(), rows.begin() + alloc[c]);
    ++c;
  }
  return out;
}

LabeledDataset Concat(const LabeledDataset& a, const LabeledDataset& b) {
  LabeledDataset out;
  out.features.resize(a.size() + b.size(), std::max(a.dim(), b.dim()));
  if (a.size() > 0) out.features.topRows(a.size()) = a.features;
  if (b.size() > 0) out.features.bottomRows(b.size()) = b.features;
  out.targets = a.targets;
  out.targets.insert(out.targets.end(), b.targets.begin(), b.targets.end());
  out.attributes = a.attributes;
  out.attributes.insert(out.attributes.end(), b.attributes.begin(), b.attributes.end());
  out.target_card = std::max(a.target_card, b.target_card);
  out.attribute_card = std::max(a.attribute_card, b.attribute_card);
  return out;
}

LabeledDataset Shuffled(const LabeledDataset& ds, Rng& rng) {
  std::vector<std::size_t> order(static_cast<std::size_t>(ds.size()));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return ds.Subset(order);
}

void FillGaussianRow(LabeledDataset& ds, long i, int y, int a,
                     const GaussianTaskOptions& opts,
                     std::normal_distribution<double>& noise, Rng& rng) {
  for (int j = 0; j < opts.signal_dims; ++j) {
    ds.features(i, j) = (2.0 * y - 1.0) + noise(rng);
  }
  for (int j = 0; j < opts.spurious_dims; ++j) {
    ds.features(i, opts.signal_dims + j) = (2.0 * a - 1.0) + noise(rng);
  }
  ds.targets[i] = y;
  ds.attributes[i] = a;
}

void ValidateGaussianOptions(const GaussianTaskOptions& opts) {
  if (opts.signal_dims < 0 || opts.spurious_dims < 0 ||
      opts.signal_dims + opts.spurious_dims < 1) {
    throw InvalidArgument("gaussian task: need at least one feature dimension");
  }
  if (!(opts.noise_sigma >= 0.0)) {
    throw InvalidArgument("gaussian task: noise_sigma must be >= 0");
  }
}

std::string GaussianTag(const GaussianTaskOptions& opts) {
  return " signal_dims=" + std::to_string(opts.signal_dims) +
         " spurious_dims=" + std::to_string(opts.spurious_dims) +
         " noise_sigma=" + FormatDouble(opts.noise_sigma);
}

}  // namespace

void LabeledDataset::Validate() const {
  if (features.rows() != size() ||
      attributes.size() != targets.size()) {
    throw ShapeError("LabeledDataset: " + std::to_string(features.rows()) +
                     " feature rows, " + std::to_string(targets.size()) +
                     " targets, " + std::to_string(attributes.size()) +
                     " attributes");
  }
  if (target_card < 1 || attribute_card < 1) {
    throw InvalidArgument("LabeledDataset: alphabet sizes must be >= 1");
  }
  CheckLabelRange(targets, target_card, "LabeledDataset targets");
  CheckLabelRange(attributes, attribute_card, "LabeledDataset attributes");
  if (!features.allFinite()) {
    throw InvalidArgument("LabeledDataset: non-finite feature value");
  }
}

LabeledDataset Concatenate(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.size() > 0 && b.size() > 0 && a.dim() != b.dim()) {
    throw ShapeError("Concatenate: feature widths differ (" +
                     std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) + ")");
  }
  LabeledDataset out = Concat(a, b);
  out.provenance = a.provenance;
  return out;
}

LabeledDataset LabeledDataset::Subset(std::span<const std::size_t> rows) const {
  LabeledDataset out;
  out.features.resize(static_cast<Index>(rows.size()), features.cols());
  out.targets.reserve(rows.size());
  out.attributes.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Index>(i)) = features.row(static_cast<Index>(rows[i]));
    out.targets.push_back(targets[rows[i]]);
    out.attributes.push_back(attributes[rows[i]]);
  }
  out.target_card = target_card;
  out.attribute_card = attribute_card;
  out.provenance = provenance;
  return out;
}

std::string ToString(BiasKind kind) {
  switch (kind) {
    case BiasKind::kColorVariance:
      return "color_variance";
    case BiasKind::kConflictFraction:
      return "conflict_fraction";
    case BiasKind::kAgreementProb:
      return "agreement_prob";
  }
  return "agreement_prob";
}

BiasKind BiasKindFromString(const std::string& name) {
  if (name == "color_variance") return BiasKind::kColorVariance;
  if (name == "conflict_fraction") return BiasKind::kConflictFraction;
  if (name == "agreement_prob") return BiasKind::kAgreementProb;
  throw InvalidArgument("unknown bias kind \"" + name +
                        "\" (expected color_variance, conflict_fraction or "
                        "agreement_prob)");
}

BiasSpec BiasSpec::Make(BiasKind kind, double value) {
  BiasSpec spec{kind, value, 0.0};
  switch (kind) {
    case BiasKind::kAgreementProb:
      if (!(value >= 0.5 && value <= 1.0)) {
        throw InvalidArgument("agreement_prob must lie in [0.5, 1], got " +
                              FormatDouble(value));
      }
      spec.derived_hya = info::binary_entropy(value);
      break;
    case BiasKind::kConflictFraction:
      if (!(value >= 0.0 && value <= 0.5)) {
        throw InvalidArgument("conflict_fraction must lie in [0, 0.5], got " +
                              FormatDouble(value));
      }
      spec.derived_hya = info::binary_entropy(value);
      break;
    case BiasKind::kColorVariance: {
      if (!(value >= 0.0 && value <= kMaxColorVariance)) {
        throw InvalidArgument("color_variance must lie in [0, 0.05], got " +
                              FormatDouble(value));
      }
      // Implied H(Y|A) of the colour channel alone, by a fixed-seed Monte
      // Carlo over the palette.
      constexpr long kDraws = 20000;
      Rng rng(HashTag("color_variance_hya"));
      std::vector<int> y(kDraws), a(kDraws);
      for (long i = 0; i < kDraws; ++i) {
        y[i] = static_cast<int>(i % 10);
        a[i] = NearestPaletteIndex(SampleColor(y[i], value, rng));
      }
      spec.derived_hya = empirical_hya(y, a);
      break;
    }
  }
  return spec;
}

double empirical_hya(std::span<const int> targets,
                     std::span<const int> attributes) {
  if (targets.size() != attributes.size()) {
    throw ShapeError("empirical_hya: length mismatch (" +
                     std::to_string(targets.size()) + " vs " +
                     std::to_string(attributes.size()) + ")");
  }
  if (targets.empty()) throw InvalidArgument("empirical_hya: empty input");
  int ny = 0, na = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || attributes[i] < 0) {
      throw InvalidArgument("empirical_hya: labels must be >= 0");
    }
    ny = std::max(ny, targets[i] + 1);
    na = std::max(na, attributes[i] + 1);
  }
  std::vector<double> counts(static_cast<std::size_t>(ny) * na, 0.0);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    counts[targets[i] * na + attributes[i]] += 1.0;
  }
  const auto joint = info::JointPMF::FromCounts({1, ny, na}, counts);
  return info::conditional_entropy(joint, info::Axis::kY, info::Axis::kA);
}

LabeledDataset gen_gaussian_biased(long n, double agreement_prob,
                                   const GaussianTaskOptions& opts,
                                   std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("gen_gaussian_biased: n must be >= 1");
  if (!(agreement_prob >= 0.5 && agreement_prob <= 1.0)) {
    throw InvalidArgument("agreement_prob must lie in [0.5, 1], got " +
                          FormatDouble(agreement_prob));
  }
  ValidateGaussianOptions(opts);
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution agree(agreement_prob);
  std::normal_distribution<double> noise(0.0, opts.noise_sigma);
  LabeledDataset ds;
  ds.features.resize(n, opts.signal_dims + opts.spurious_dims);
  ds.targets.resize(n);
  ds.attributes.resize(n);
  for (long i = 0; i < n; ++i) {
    const int y = coin(rng) ? 1 : 0;
    const int a = agree(rng) ? y : 1 - y;
    FillGaussianRow(ds, i, y, a, opts, noise, rng);
  }
  ds.provenance = "gaussian_biased agreement_prob=" +
                  FormatDouble(agreement_prob) + GaussianTag(opts) +
                  " n=" + std::to_string(n) + " seed=" + std::to_string(seed);
  return ds;
}

LabeledDataset gen_gaussian_pool(long n, bool conflicting,
                                 const GaussianTaskOptions& opts,
                                 std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("gen_gaussian_pool: n must be >= 1");
  ValidateGaussianOptions(opts);
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, opts.noise_sigma);
  LabeledDataset ds;
  ds.features.resize(n, opts.signal_dims + opts.spurious_dims);
  ds.targets.resize(n);
  ds.attributes.resize(n);
  for (long i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    FillGaussianRow(ds, i, y, conflicting ? 1 - y : y, opts, noise, rng);
  }
  ds = Shuffled(ds, rng);
  ds.provenance = std::string("gaussian_pool ") +
                  (conflicting ? "conflicting" : "biased") + GaussianTag(opts) +
                  " n=" + std::to_string(n) + " seed=" + std::to_string(seed);
  return ds;
}

IdxPayload parse_idx(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "IDX");
  const std::uint32_t magic = r.U32BE();
  IdxPayload out;
  std::size_t count = 0;
  if (magic == kIdxImagesMagic) {
    out.kind = IdxPayload::Kind::kImages;
    for (int i = 0; i < 3; ++i) out.dims.push_back(r.U32BE());
    count = static_cast<std::size_t>(out.dims[0]) * out.dims[1] * out.dims[2];
  } else if (magic == kIdxLabelsMagic) {
    out.kind = IdxPayload::Kind::kLabels;
    out.dims.push_back(r.U32BE());
    count = out.dims[0];
  } else {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0x%08X", magic);
    throw FormatError(std::string("IDX: unsupported magic ") + buf +
                      " (expected 0x00000803 images or 0x00000801 labels)");
  }
  r.Need(count);
  if (r.remaining() != count) {
    throw FormatError("IDX: " + std::to_string(r.remaining() - count) +
                      " trailing bytes after the declared data");
  }
  if (out.kind == IdxPayload::Kind::kImages) {
    out.rows = static_cast<int>(out.dims[1]);
    out.cols = static_cast<int>(out.dims[2]);
    const Index pix = static_cast<Index>(out.rows) * out.cols;
    out.images.resize(out.dims[0], pix);
    for (Index i = 0; i < static_cast<Index>(out.dims[0]); ++i)
      for (Index p = 0; p < pix; ++p) out.images(i, p) = r.U8() / 255.0;
  } else {
    out.labels.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.labels.push_back(r.U8());
  }
  return out;
}

std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

IdxPayload read_idx_file(const std::filesystem::path& path) {
  return parse_idx(ReadFileBytes(path));
}

const std::array<std::array<double, 3>, 10>& ColorPalette() {
  static const std::array<std::array<double, 3>, 10> kPalette = {{
      {1.0, 0.0, 0.0},  // red
      {0.0, 1.0, 0.0},  // green
      {0.0, 0.0, 1.0},  // blue
      {1.0, 1.0, 0.0},  // yellow
      {1.0, 0.0, 1.0},  // magenta
      {0.0, 1.0, 1.0},  // cyan
      {1.0, 1.0, 1.0},  // white
      {1.0, 0.5, 0.0},  // orange
      {0.5, 0.0, 1.0},  // violet
      {0.0, 0.5, 0.5},  // teal
  }};
  return kPalette;
}

LabeledDataset colorize(const GrayImages& images, std::span<const int> labels,
                        double variance, Split split, std::uint64_t seed,
                        const ColorizeOptions& opts) {
  if (!(variance >= 0.0 && variance <= kMaxColorVariance)) {
    throw InvalidArgument("color_variance must lie in [0, 0.05], got " +
                          FormatDouble(variance));
  }
  if (images.pixels.rows() != static_cast<Index>(labels.size())) {
    throw ShapeError("colorize: image and label counts differ");
  }
  if (images.pixels.cols() != static_cast<Index>(images.rows) * images.cols) {
    throw ShapeError("colorize: pixel width does not match rows x cols");
  }
  CheckLabelRange(labels, 10, "colorize");
  if (opts.downsample < 1) throw InvalidArgument("colorize: downsample < 1");
  const int f = opts.downsample;
  const int out_rows = images.rows / f;
  const int out_cols = images.cols / f;
  const Index plane = static_cast<Index>(out_rows) * out_cols;
  const long n = static_cast<long>(labels.size());

  Rng rng(seed);
  std::uniform_int_distribution<int> pick(0, 9);
  LabeledDataset ds;
  ds.features = MatrixXd::Zero(n, 3 * plane);
  ds.targets.assign(labels.begin(), labels.end());
  ds.attributes.resize(n);
  ds.target_card = 10;
  ds.attribute_card = 10;
  const double inv_area = 1.0 / (f * f);
  for (long i = 0; i < n; ++i) {
    const int mean_index = split == Split::kTrain ? labels[i] : pick(rng);
    const auto color = SampleColor(mean_index, variance, rng);
    ds.attributes[i] = NearestPaletteIndex(color);
    for (int r = 0; r < out_rows; ++r) {
      for (int c = 0; c < out_cols; ++c) {
        double intensity = 0.0;
        for (int dr = 0; dr < f; ++dr)
          for (int dc = 0; dc < f; ++dc)
            intensity += images.pixels(i, (r * f + dr) * images.cols + c * f + dc);
        intensity *= inv_area;
        if (intensity <= 0.0) continue;
        for (int ch = 0; ch < 3; ++ch) {
          ds.features(i, ch * plane + r * out_cols + c) = intensity * color[ch];
        }
      }
    }
  }
  ds.provenance = std::string("colorize split=") +
                  (split == Split::kTrain ? "train" : "test") +
                  " variance=" + FormatDouble(variance) +
                  " downsample=" + std::to_string(f) +
                  " seed=" + std::to_string(seed);
  return ds;
}

std::pair<GrayImages, std::vector<int>> synth_digits(long n, std::uint64_t seed,
                                                     int side) {
  if (n < 1) throw InvalidArgument("synth_digits: n must be >= 1");
  if (side < 16) throw InvalidArgument("synth_digits: side must be >= 16");
  // Segment bits: a=top b=upper-right c=lower-right d=bottom e=lower-left
  // f=upper-left g=middle.
  static constexpr std::array<unsigned, 10> kSegments = {
      0b0111111, 0b0000110, 0b1011011, 0b1001111, 0b1100110,
      0b1101101, 0b1111101, 0b0000111, 0b1111111, 0b1101111};
  Rng rng(seed);
  std::uniform_int_distribution<int> digit(0, 9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GrayImages img;
  img.rows = side;
  img.cols = side;
  img.pixels = MatrixXd::Zero(n, static_cast<Index>(side) * side);
  std::vector<int> labels(n);
  for (long i = 0; i < n; ++i) {
    const int d = digit(rng);
    labels[i] = d;
    const int w = side * 10 / 28 + static_cast<int>(unit(rng) * 4);
    const int h = side * 16 / 28 + static_cast<int>(unit(rng) * 4);
    const int t = 2 + static_cast<int>(unit(rng) * 2);
    const int x0 = (side - w) / 2 + static_cast<int>(unit(rng) * 5) - 2;
    const int y0 = (side - h) / 2 + static_cast<int>(unit(rng) * 5) - 2;
    const double level = 0.6 + 0.4 * unit(rng);
    auto fill = [&](int r0, int r1, int c0, int c1) {
      for (int r = std::max(r0, 0); r < std::min(r1, side); ++r)
        for (int c = std::max(c0, 0); c < std::min(c1, side); ++c)
          img.pixels(i, r * side + c) = level * (0.85 + 0.15 * unit(rng));
    };
    const unsigned seg = kSegments[d];
    const int mid = y0 + h / 2;
    if (seg & 1u) fill(y0, y0 + t, x0, x0 + w);                     // a
    if (seg & 2u) fill(y0, mid + 1, x0 + w - t, x0 + w);            // b
    if (seg & 4u) fill(mid, y0 + h, x0 + w - t, x0 + w);            // c
    if (seg & 8u) fill(y0 + h - t, y0 + h, x0, x0 + w);             // d
    if (seg & 16u) fill(mid, y0 + h, x0, x0 + t);                   // e
    if (seg & 32u) fill(y0, mid + 1, x0, x0 + t);                   // f
    if (seg & 64u) fill(mid - t / 2, mid - t / 2 + t, x0, x0 + w);  // g
  }
  return {std::move(img), std::move(labels)};
}

LabeledDataset mix_bias(const LabeledDataset& biased_pool,
                        const LabeledDataset& conflicting_pool,
                        double conflict_fraction, long total_n, MixMode mode,
                        std::uint64_t seed) {
  biased_pool.Validate();
  conflicting_pool.Validate();
  if (!(conflict_fraction >= 0.0 && conflict_fraction <= 0.5)) {
    throw InvalidArgument("conflict_fraction must lie in [0, 0.5], got " +
                          FormatDouble(conflict_fraction));
  }
  if (total_n < 1) throw InvalidArgument("mix_bias: total_n must be >= 1");
  if (biased_pool.dim() != conflicting_pool.dim()) {
    throw ShapeError("mix_bias: pools have different feature widths");
  }
  RequireAllBiased(biased_pool, false, "mix_bias biased pool");
  RequireAllBiased(conflicting_pool, true, "mix_bias conflicting pool");

  long n_conf = 0;
  long n_bias = 0;
  if (mode == MixMode::kConstantTotal) {
    n_conf = std::lround(conflict_fraction * total_n);
    n_bias = total_n - n_conf;
  } else {
    n_bias = total_n;
    n_conf = std::lround(conflict_fraction / (1.0 - conflict_fraction) * total_n);
  }
  Rng rng(seed);
  const auto bias_rows = DrawFromCells(biased_pool, n_bias, rng, "biased");
  const auto conf_rows =
      DrawFromCells(conflicting_pool, n_conf, rng, "conflicting");
  LabeledDataset out =
      Concat(biased_pool.Subset(bias_rows), conflicting_pool.Subset(conf_rows));
  out = Shuffled(out, rng);
  out.provenance = std::string("mix_bias mode=") +
                   (mode == MixMode::kConstantTotal ? "constant_total"
                                                    : "constant_biased") +
                   " conflict_fraction=" + FormatDouble(conflict_fraction) +
                   " biased=" + std::to_string(n_bias) +
                   " conflicting=" + std::to_string(n_conf) +
                   " seed=" + std::to_string(seed);
  return out;
}

EvalSplits split_eval(const LabeledDataset& source, long per_cell,
                      std::uint64_t seed) {
  source.Validate();
  if (per_cell < 1) throw InvalidArgument("split_eval: per_cell must be >= 1");
  std::vector<std::vector<std::size_t>> cells(
      static_cast<std::size_t>(source.target_card) * source.attribute_card);
  for (long i = 0; i < source.size(); ++i) {
    cells[source.targets[i] * source.attribute_card + source.attributes[i]]
        .push_back(static_cast<std::size_t>(i));
  }
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  for (int y = 0; y < source.target_card; ++y) {
    for (int a = 0; a < source.attribute_card; ++a) {
      auto& rows = cells[y * source.attribute_card + a];
      if (static_cast<long>(rows.size()) < per_cell) {
        throw InvalidArgument("split_eval: cell (y=" + std::to_string(y) +
                              ", a=" + std::to_string(a) + ") has " +
                              std::to_string(rows.size()) +
                              " samples, needs " + std::to_string(per_cell));
      }
      std::shuffle(rows.begin(), rows.end(), rng);
      chosen.insert(chosen.end(), rows.begin(), rows.begin() + per_cell);
    }
  }
  std::shuffle(chosen.begin(), chosen.end(), rng);
  EvalSplits out;
  out.unbiased = source.Subset(chosen);
  out.unbiased.provenance = source.provenance + " | unbiased per_cell=" +
                            std::to_string(per_cell);
  std::vector<std::size_t> conflicting;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    if (out.unbiased.targets[i] != out.unbiased.attributes[i]) conflicting.push_back(i);
  }
  out.bias_conflicting = out.unbiased.Subset(conflicting);
  out.bias_conflicting.provenance =
      source.provenance + " | bias_conflicting per_cell=" + std::to_string(per_cell);
  return out;
}

std::vector<std::uint8_t> EncodeContainer(const LabeledDataset& ds) {
  ds.Validate();
  if (ds.target_card > 0xFFFF || ds.attribute_card > 0xFFFF) {
    throw InvalidArgument("EncodeContainer: alphabet too large for u16");
  }
  std::vector<std::uint8_t> out(kContainerMagic, kContainerMagic + 4);
  PutU32LE(out, static_cast<std::uint32_t>(ds.size()));
  PutU32LE(out, static_cast<std::uint32_t>(ds.dim()));
  PutU16LE(out, static_cast<std::uint16_t>(ds.target_card));
  PutU16LE(out, static_cast<std::uint16_t>(ds.attribute_card));
  out.reserve(out.size() + ds.size() * (8 * ds.dim() + 4) + ds.provenance.size() + 4);
  for (long i = 0; i < ds.size(); ++i) {
    for (int j = 0; j < ds.dim(); ++j) {
      std::uint64_t bits;
      const double v = ds.features(i, j);
      std::memcpy(&bits, &v, sizeof(bits));
      for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
  }
  for (int t : ds.targets) PutU16LE(out, static_cast<std::uint16_t>(t));
  for (int a : ds.attributes) PutU16LE(out, static_cast<std::uint16_t>(a));
  PutU32LE(out, static_cast<std::uint32_t>(ds.provenance.size()));
  out.insert(out.end(), ds.provenance.begin(), ds.provenance.end());
  return out;
}

LabeledDataset DecodeContainer(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "BBL1 container");
  r.Need(4);
  if (!std::equal(kContainerMagic, kContainerMagic + 4, bytes.begin())) {
    throw FormatError("BBL1 container: bad magic");
  }
  for (int i = 0; i < 4; ++i) r.U8();
  const std::uint32_t n = r.U32LE();
  const std::uint32_t d = r.U32LE();
  LabeledDataset ds;
  ds.target_card = r.U16LE();
  ds.attribute_card = r.U16LE();
  r.Need(static_cast<std::size_t>(n) * d * 8 + static_cast<std::size_t>(n) * 4);
  ds.features.resize(n, d);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < d; ++j) ds.features(i, j) = r.F64LE();
  ds.targets.resize(n);
  ds.attributes.resize(n);
  for (auto& t : ds.targets) t = r.U16LE();
  for (auto& a : ds.attributes) a = r.U16LE();
  const std::uint32_t len = r.U32LE();
  r.Need(len);
  ds.provenance.assign(bytes.begin() + r.pos(), bytes.begin() + r.pos() + len);
  if (r.remaining() != len) throw FormatError("BBL1 container: trailing bytes");
  try {
    ds.Validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("BBL1 container: ") + e.what());
  }
  return ds;
}

void WriteContainer(const LabeledDataset& ds, const std::filesystem::path& path) {
  const auto bytes = EncodeContainer(ds);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

LabeledDataset ReadContainer(const std::filesystem::path& path) {
  return DecodeContainer(ReadFileBytes(path));
}

void WriteCsv(const LabeledDataset& ds, const std::filesystem::path& features,
              const std::filesystem::path& labels) {
  ds.Validate();
  std::ofstream f(features);
  if (!f) throw IoError("cannot open " + features.string() + " for writing");
  for (int j = 0; j < ds.dim(); ++j) f << (j ? "," : "") << 'f' << j;
  f << '\n';
  for (long i = 0; i < ds.size(); ++i) {
    for (int j = 0; j < ds.dim(); ++j) f << (j ? "," : "") << FormatDouble(ds.features(i, j));
    f << '\n';
  }
  std::ofstream l(labels);
  if (!l) throw IoError("cannot open " + labels.string() + " for writing");
  l << "target,attribute,provenance\n";
  const std::string prov = QuoteCsv(ds.provenance);
  for (long i = 0; i < ds.size(); ++i) {
    l << ds.targets[i] << ',' << ds.attributes[i] << ',' << prov << '\n';
  }
  if (!f || !l) throw IoError("write failed for CSV dataset");
}

LabeledDataset ReadCsv(const std::filesystem::path& features,
                       const std::filesystem::path& labels) {
  std::ifstream f(features);
  if (!f) throw IoError("cannot open " + features.string());
  std::ifstream l(labels);
  if (!l) throw IoError("cannot open " + labels.string());
  std::string line;
  std::getline(f, line);
  const std::size_t d = line.empty() ? 0 : SplitCsv(line).size();
  std::vector<std::vector<double>> rows;
  long lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = SplitCsv(line);
    if (cells.size() != d) {
      throw FormatError(features.string() + ":" + std::to_string(lineno) +
                        ": expected " + std::to_string(d) + " columns");
    }
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(ParseDouble(c, features.string()));
    rows.push_back(std::move(row));
  }
  LabeledDataset ds;
  std::getline(l, line);
  lineno = 1;
  int max_t = 0, max_a = 0;
  while (std::getline(l, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = SplitCsv(line);
    if (cells.size() != 3) {
      throw FormatError(labels.string() + ":" + std::to_string(lineno) +
                        ": expected target,attribute,provenance");
    }
    const int t = static_cast<int>(ParseDouble(cells[0], labels.string()));
    const int a = static_cast<int>(ParseDouble(cells[1], labels.string()));
    ds.targets.push_back(t);
    ds.attributes.push_back(a);
    ds.provenance = cells[2];
    max_t = std::max(max_t, t);
    max_a = std::max(max_a, a);
  }
  if (rows.size() != ds.targets.size()) {
    throw FormatError("CSV dataset: feature and label row counts differ");
  }
  ds.features.resize(static_cast<Index>(rows.size()), static_cast<Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) ds.features(i, j) = rows[i][j];
  ds.target_card = std::max(2, max_t + 1);
  ds.attribute_card = std::max(2, max_a + 1);
  try {
    ds.Validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("CSV dataset: ") + e.what());
  }
  return ds;
}

LabeledDataset LoadDataset(const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    auto labels = path;
    labels.replace_extension(".labels.csv");
    return ReadCsv(path, labels);
  }
  return ReadContainer(path);
}

}  // namespace bbl::data
