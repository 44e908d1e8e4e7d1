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


// INI-style experiment configuration for the command-line tool.
//
// Sections: [task] [grid] [methods] [training] [estimators] [output].
// Lines are "key = value"; '#' or ';' start a comment line. Unknown sections
// and keys are rejected with their line number.

#ifndef BBL_CLI_CONFIG_H_
#define BBL_CLI_CONFIG_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bbl/error.h"
#include "bbl/harness.h"

namespace bbl::cli {

class ConfigError : public FormatError {
 public:
  ConfigError(const std::string& what, int line)
      : FormatError(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct CliConfig {
  harness::SweepConfig sweep;
  std::string baseline = "baseline";
  std::string csv_path = "sweep.csv";
  std::string json_path = "sweep.json";
  std::string svg_path = "sweep.svg";
};

// Eight-point grid per task, all seven methods, 7 trials.
CliConfig DefaultCliConfig();
std::vector<double> DefaultGrid(harness::Task task);

CliConfig ParseConfig(std::string_view text);
CliConfig LoadConfig(const std::filesystem::path& path);

// The fully resolved configuration in the same INI syntax.
std::string DescribeConfig(const CliConfig& config);

// Valid keys of a section, in documentation order.
std::vector<std::string> SectionKeys(const std::string& section);

std::size_t EditDistance(std::string_view a, std::string_view b);
std::string NearestKey(std::string_view key, const std::vector<std::string>& candidates);

}  // namespace bbl::cli

#endif  // BBL_CLI_CONFIG_H_
