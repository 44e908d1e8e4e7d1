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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "bbl/error.h"
#include "bbl/mi_estim.h"

namespace bbl::data {
namespace {

double Hb(double p) { return -p * std::log(p) - (1 - p) * std::log(1 - p); }

std::filesystem::path TempPath(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("bbl_test_datagen_" + name);
}

TEST(Gaussian, ExtremeBiasHasZeroHya) {
  const auto ds = gen_gaussian_biased(2000, 1.0, {}, 1);
  EXPECT_EQ(ds.targets, ds.attributes);
  EXPECT_EQ(empirical_hya(ds.targets, ds.attributes), 0.0);
  EXPECT_EQ(ds.dim(), 10);
}

TEST(Gaussian, NoBiasNearLn2) {
  const auto ds = gen_gaussian_biased(10000, 0.5, {}, 2);
  EXPECT_NEAR(empirical_hya(ds.targets, ds.attributes), std::log(2.0), 0.01);
}

TEST(Gaussian, AgreementRateConcentrates) {
  for (double q : {0.6, 0.9, 0.975}) {
    const long n = 40000;
    const auto ds = gen_gaussian_biased(n, q, {}, 3);
    long agree = 0;
    for (long i = 0; i < n; ++i) agree += ds.targets[i] == ds.attributes[i];
    EXPECT_NEAR(double(agree) / n, q, 3.0 / std::sqrt(double(n)));
  }
  const auto big = gen_gaussian_biased(200000, 0.9, {}, 4);
  EXPECT_NEAR(empirical_hya(big.targets, big.attributes), Hb(0.9), 0.005);
  EXPECT_NEAR(Hb(0.9), 0.3251, 1e-4);
}

TEST(Gaussian, DeterministicAndValidated) {
  const auto a = gen_gaussian_biased(300, 0.8, {}, 5);
  const auto b = gen_gaussian_biased(300, 0.8, {}, 5);
  EXPECT_EQ(EncodeContainer(a), EncodeContainer(b));
  EXPECT_NE(EncodeContainer(a), EncodeContainer(gen_gaussian_biased(300, 0.8, {}, 6)));
  EXPECT_THROW(gen_gaussian_biased(10, 0.4, {}, 1), InvalidArgument);
  EXPECT_THROW(gen_gaussian_biased(0, 0.8, {}, 1), InvalidArgument);
}

TEST(Gaussian, PoolsAreBalancedAndPure) {
  const auto biased = gen_gaussian_pool(100, false, {}, 1);
  const auto conf = gen_gaussian_pool(100, true, {}, 1);
  int ones = 0;
  for (long i = 0; i < 100; ++i) {
    EXPECT_EQ(biased.targets[i], biased.attributes[i]);
    EXPECT_NE(conf.targets[i], conf.attributes[i]);
    ones += biased.targets[i];
  }
  EXPECT_EQ(ones, 50);
}

TEST(BiasSpec, RangesAndHya) {
  EXPECT_NEAR(BiasSpec::Make(BiasKind::kAgreementProb, 0.9).derived_hya, Hb(0.9), 1e-12);
  EXPECT_NEAR(BiasSpec::Make(BiasKind::kConflictFraction, 0.25).derived_hya, 0.5623, 1e-4);
  EXPECT_EQ(BiasSpec::Make(BiasKind::kAgreementProb, 1.0).derived_hya, 0.0);
  EXPECT_THROW(BiasSpec::Make(BiasKind::kColorVariance, 0.06), InvalidArgument);
  EXPECT_THROW(BiasSpec::Make(BiasKind::kConflictFraction, 0.51), InvalidArgument);
  EXPECT_THROW(BiasSpec::Make(BiasKind::kAgreementProb, 0.49), InvalidArgument);
  EXPECT_THROW(BiasKindFromString("sigma"), InvalidArgument);
}

TEST(EmpiricalHya, Examples) {
  const std::vector<int> y = {0, 1, 1, 0, 1};
  EXPECT_EQ(empirical_hya(y, y), 0.0);
  // Skewed group rates realized as exact counts: 2% of 4167 and 24% of 5833.
  std::vector<int> t, a;
  auto add = [&](int attr, int total, int positives) {
    for (int i = 0; i < total; ++i) {
      a.push_back(attr);
      t.push_back(i < positives ? 1 : 0);
    }
  };
  add(0, 4167, 83);
  add(1, 5833, 1400);
  EXPECT_NEAR(empirical_hya(t, a), 0.362, 0.002);
  const std::vector<int> shorter = {0, 1};
  EXPECT_THROW(empirical_hya(y, shorter), ShapeError);
}

std::vector<std::uint8_t> LabelPayload() {
  return {0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x01, 0x07};
}

TEST(Idx, Labels) {
  const auto bytes = LabelPayload();
  const auto p = parse_idx(bytes);
  EXPECT_EQ(p.kind, IdxPayload::Kind::kLabels);
  EXPECT_EQ(p.labels, std::vector<int>{7});
}

TEST(Idx, Images) {
  const std::vector<std::uint8_t> bytes = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2,
                                           0, 0, 0, 2, 0, 255, 0, 255};
  const auto p = parse_idx(bytes);
  ASSERT_EQ(p.kind, IdxPayload::Kind::kImages);
  EXPECT_EQ(p.rows, 2);
  EXPECT_EQ(p.cols, 2);
  ASSERT_EQ(p.images.rows(), 1);
  EXPECT_EQ(p.images(0, 0), 0.0);
  EXPECT_EQ(p.images(0, 1), 1.0);
  EXPECT_EQ(p.images(0, 2), 0.0);
  EXPECT_EQ(p.images(0, 3), 1.0);
}

TEST(Idx, Rejections) {
  auto bad_magic = LabelPayload();
  bad_magic[2] = 0x09;
  bad_magic[3] = 0x99;
  EXPECT_THROW(parse_idx(bad_magic), FormatError);
  auto truncated = LabelPayload();
  truncated.pop_back();
  EXPECT_THROW(parse_idx(truncated), TruncationError);
  auto trailing = LabelPayload();
  trailing.push_back(1);
  EXPECT_THROW(parse_idx(trailing), FormatError);
  const std::vector<std::uint8_t> header_only = {0, 0, 8};
  EXPECT_THROW(parse_idx(header_only), TruncationError);
}

TEST(Colorize, ZeroVarianceTrainCopiesLabel) {
  auto [gray, labels] = synth_digits(500, 1);
  const auto ds = colorize(gray, labels, 0.0, Split::kTrain, 2);
  EXPECT_EQ(ds.attributes, ds.targets);
  EXPECT_EQ(empirical_hya(ds.targets, ds.attributes), 0.0);
  EXPECT_EQ(ds.dim(), 3 * 14 * 14);
  EXPECT_GE(ds.features.minCoeff(), 0.0);
  EXPECT_LE(ds.features.maxCoeff(), 1.0);
}

TEST(Colorize, TestSplitIsIndependent) {
  auto [gray, labels] = synth_digits(10000, 3);
  const auto ds = colorize(gray, labels, 0.0, Split::kTest, 4);
  EXPECT_LE(mi::plugin_mi(ds.targets, ds.attributes).value, 0.02);
}

TEST(Colorize, HyaGrowsWithVariance) {
  auto [gray, labels] = synth_digits(5000, 5);
  const auto low = colorize(gray, labels, 0.01, Split::kTrain, 6);
  const auto high = colorize(gray, labels, 0.05, Split::kTrain, 6);
  EXPECT_GT(empirical_hya(high.targets, high.attributes),
            empirical_hya(low.targets, low.attributes));
}

TEST(Colorize, Validation) {
  auto [gray, labels] = synth_digits(10, 7);
  EXPECT_THROW(colorize(gray, labels, 0.06, Split::kTrain, 1), InvalidArgument);
  EXPECT_THROW(colorize(gray, labels, -0.01, Split::kTrain, 1), InvalidArgument);
  labels.pop_back();
  EXPECT_THROW(colorize(gray, labels, 0.0, Split::kTrain, 1), ShapeError);
}

TEST(Colorize, PaletteIsSeparated) {
  const auto& pal = ColorPalette();
  std::set<std::array<double, 3>> distinct(pal.begin(), pal.end());
  EXPECT_EQ(distinct.size(), 10u);
}

struct Pools {
  LabeledDataset biased = gen_gaussian_pool(4000, false, {}, 10);
  LabeledDataset conflicting = gen_gaussian_pool(4000, true, {}, 11);
};

TEST(MixBias, Examples) {
  Pools p;
  const auto none = mix_bias(p.biased, p.conflicting, 0.0, 2000, MixMode::kConstantTotal, 1);
  EXPECT_EQ(none.size(), 2000);
  EXPECT_EQ(empirical_hya(none.targets, none.attributes), 0.0);
  const auto half = mix_bias(p.biased, p.conflicting, 0.5, 2000, MixMode::kConstantTotal, 1);
  EXPECT_NEAR(empirical_hya(half.targets, half.attributes), std::log(2.0), 0.01);
  const auto quarter = mix_bias(p.biased, p.conflicting, 0.25, 2000, MixMode::kConstantTotal, 1);
  EXPECT_NEAR(empirical_hya(quarter.targets, quarter.attributes), 0.5623, 0.01);
  EXPECT_NE(quarter.provenance.find("constant_total"), std::string::npos);
}

TEST(MixBias, ConstantBiasedMode) {
  Pools p;
  const auto ds = mix_bias(p.biased, p.conflicting, 0.2, 1000, MixMode::kConstantBiased, 2);
  long conflicting = 0;
  for (long i = 0; i < ds.size(); ++i) conflicting += ds.targets[i] != ds.attributes[i];
  EXPECT_EQ(ds.size() - conflicting, 1000);
  EXPECT_EQ(conflicting, 250);
}

TEST(MixBias, MonotoneInFraction) {
  Pools p;
  double prev = -1.0;
  for (int i = 0; i <= 10; ++i) {
    const auto ds = mix_bias(p.biased, p.conflicting, 0.05 * i, 2000,
                             MixMode::kConstantTotal, 3);
    const double h = empirical_hya(ds.targets, ds.attributes);
    EXPECT_GT(h, prev) << "fraction " << 0.05 * i;
    prev = h;
  }
}

TEST(MixBias, Errors) {
  Pools p;
  try {
    mix_bias(p.biased, p.conflicting, 0.5, 20000, MixMode::kConstantTotal, 1);
    FAIL() << "expected an error";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient"), std::string::npos);
  }
  EXPECT_THROW(mix_bias(p.conflicting, p.biased, 0.1, 100, MixMode::kConstantTotal, 1),
               InvalidArgument);
  EXPECT_THROW(mix_bias(p.biased, p.conflicting, 0.6, 100, MixMode::kConstantTotal, 1),
               InvalidArgument);
}

TEST(MixBias, Deterministic) {
  Pools p;
  EXPECT_EQ(EncodeContainer(mix_bias(p.biased, p.conflicting, 0.3, 500,
                                     MixMode::kConstantTotal, 9)),
            EncodeContainer(mix_bias(p.biased, p.conflicting, 0.3, 500,
                                     MixMode::kConstantTotal, 9)));
}

TEST(SplitEval, PaperSizes) {
  const auto src = gen_gaussian_biased(8000, 0.5, {}, 12);
  const auto small = split_eval(src, 180, 1);
  EXPECT_EQ(small.unbiased.size(), 720);
  EXPECT_EQ(small.bias_conflicting.size(), 360);
  const auto big = split_eval(src, 1769, 1);
  EXPECT_EQ(big.unbiased.size(), 7076);
  EXPECT_EQ(big.bias_conflicting.size(), 3538);
  EXPECT_EQ(mi::plugin_mi(big.unbiased.targets, big.unbiased.attributes).value, 0.0);
  for (long i = 0; i < big.bias_conflicting.size(); ++i) {
    EXPECT_NE(big.bias_conflicting.targets[i], big.bias_conflicting.attributes[i]);
  }
}

TEST(SplitEval, ConflictingIsSubsetOfUnbiased) {
  const auto src = gen_gaussian_biased(2000, 0.5, {}, 13);
  const auto s = split_eval(src, 100, 2);
  std::set<std::vector<double>> rows;
  for (long i = 0; i < s.unbiased.size(); ++i) {
    const Eigen::VectorXd r = s.unbiased.features.row(i);
    rows.insert(std::vector<double>(r.data(), r.data() + r.size()));
  }
  for (long i = 0; i < s.bias_conflicting.size(); ++i) {
    const Eigen::VectorXd r = s.bias_conflicting.features.row(i);
    EXPECT_TRUE(rows.count(std::vector<double>(r.data(), r.data() + r.size())));
  }
}

TEST(SplitEval, NamesShortCell) {
  const auto src = gen_gaussian_biased(1000, 1.0, {}, 14);
  try {
    split_eval(src, 10, 1);
    FAIL() << "expected an error";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("cell (y=0, a=1)"), std::string::npos) << e.what();
  }
}

TEST(Persistence, ContainerRoundTrip) {
  auto ds = gen_gaussian_biased(50, 0.7, {}, 15);
  ds.provenance = "round trip";
  const auto bytes = EncodeContainer(ds);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "BBL1");
  const auto back = DecodeContainer(bytes);
  EXPECT_EQ(back.features, ds.features);
  EXPECT_EQ(back.targets, ds.targets);
  EXPECT_EQ(back.attributes, ds.attributes);
  EXPECT_EQ(back.provenance, ds.provenance);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(DecodeContainer(bad), FormatError);
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  EXPECT_THROW(DecodeContainer(cut), FormatError);

  const auto path = TempPath("ds.bbl");
  WriteContainer(ds, path);
  EXPECT_EQ(EncodeContainer(LoadDataset(path)), bytes);
  std::filesystem::remove(path);
}

TEST(Persistence, CsvRoundTrip) {
  auto ds = gen_gaussian_biased(40, 0.7, {}, 16);
  ds.provenance = "csv";
  const auto f = TempPath("ds.csv");
  const auto l = TempPath("ds.labels.csv");
  WriteCsv(ds, f, l);
  const auto back = LoadDataset(f);
  EXPECT_EQ(back.features, ds.features);
  EXPECT_EQ(back.targets, ds.targets);
  EXPECT_EQ(back.attributes, ds.attributes);
  std::filesystem::remove(f);
  std::filesystem::remove(l);
  EXPECT_THROW(LoadDataset(TempPath("missing.bbl")), IoError);
}

TEST(Dataset, ConcatenateAndSubset) {
  const auto a = gen_gaussian_biased(5, 0.7, {}, 17);
  const auto b = gen_gaussian_biased(3, 0.7, {}, 18);
  const auto c = Concatenate(a, b);
  EXPECT_EQ(c.size(), 8);
  EXPECT_EQ(c.features.row(5), b.features.row(0));
  const std::vector<std::size_t> rows = {7, 0};
  const auto s = c.Subset(rows);
  EXPECT_EQ(s.targets[0], b.targets[2]);
  auto narrow = b;
  narrow.features = narrow.features.leftCols(2);
  EXPECT_THROW(Concatenate(a, narrow), ShapeError);
}

}  // namespace
}  // namespace bbl::data
