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

#ifndef BBL_RNG_H_
#define BBL_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace bbl {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
std::uint64_t Mix64(std::uint64_t x);

// Stable 64-bit FNV-1a hash; unlike std::hash it does not vary by platform.
std::uint64_t HashTag(std::string_view tag);

// Derives an independent stream seed from a base seed and a list of
// coordinates (method tag hash, level index, trial index, ...).
std::uint64_t DeriveSeed(std::uint64_t base,
                         std::initializer_list<std::uint64_t> parts);

}  // namespace bbl

#endif  // BBL_RNG_H_
