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

#ifndef BBL_ERROR_H_
#define BBL_ERROR_H_

#include <stdexcept>
#include <string>

namespace bbl {

// Input violates a documented precondition (bad range, bad shape, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Probability vector or joint table that is negative or does not sum to one.
class InvalidDistribution : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Matrix widths or vector lengths that do not line up.
class ShapeError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Malformed serialized payload (IDX, BBL1 container, JSON checkpoint).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A payload that ends before its declared size.
class TruncationError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Non-finite loss during gradient training.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, long iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) +
                           ")"),
        iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bbl

#endif  // BBL_ERROR_H_
