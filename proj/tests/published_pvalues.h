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

// Published p-value rows of the colour-variance hypothesis tests, shared by
// the unit, CLI and acceptance tests.

#ifndef BBL_TESTS_PUBLISHED_PVALUES_H_
#define BBL_TESTS_PUBLISHED_PVALUES_H_

#include <string>
#include <vector>

namespace bbl::testing {

struct PublishedRow {
  std::string method;
  std::vector<double> p_values;
  double breaking_point;  // the bold entry
};

inline std::vector<double> PublishedGrid() {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i / 1000.0);
  for (int i = 5; i <= 10; ++i) grid.push_back(i * 5 / 1000.0);
  return grid;
}

inline const std::vector<PublishedRow>& PublishedRows() {
  static const std::vector<PublishedRow> rows = {
      {"LNL",
       {0.025, 0.044, 0.000, 0.000, 0.048, 0.040, 0.032, 0.025, 0.040,
        0.045, 0.436, 0.990, 1.000, 0.970, 0.970, 1.000, 1.000, 1.000,
        0.999, 1.000, 1.000, 0.999, 1.000, 1.000, 1.000, 1.000, 0.998},
       0.009},
      {"BackMI",
       {0.034, 0.020, 0.043, 0.010, 0.023, 0.037, 0.042, 0.036, 0.540,
        0.960, 1.000, 1.000, 0.990, 0.960, 0.990, 1.000, 0.980, 1.000,
        0.996, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000},
       0.007},
      {"EnD",
       {0.043, 0.000, 0.042, 0.016, 0.017, 0.048, 0.025, 0.016, 0.018,
        0.044, 0.034, 0.018, 0.040, 0.999, 0.999, 0.996, 0.998, 0.999,
        0.994, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000, 0.999},
       0.012},
      {"CSAD",
       {0.038, 0.048, 0.040, 0.723, 1.000, 1.000, 1.000, 1.000, 1.000,
        1.000, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000,
        1.000, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000},
       0.002},
  };
  return rows;
}

}  // namespace bbl::testing

#endif  // BBL_TESTS_PUBLISHED_PVALUES_H_
