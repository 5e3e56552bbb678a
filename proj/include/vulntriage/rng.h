// Copyright 2026 The vulntriage Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VULNTRIAGE_RNG_H_
#define VULNTRIAGE_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace vulntriage {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr uint64_t Mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// FNV-1a, used to turn component names into stream tags.
constexpr uint64_t HashTag(std::string_view tag) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Seed splitting rule: every random stream is derived from the root seed by
// mixing in a component tag and an index. Distinct (tag, index) pairs give
// statistically independent streams.
constexpr uint64_t DeriveSeed(uint64_t root, std::string_view tag,
                              uint64_t index = 0) {
  return Mix64(Mix64(root ^ HashTag(tag)) + Mix64(index));
}

inline Rng MakeRng(uint64_t root, std::string_view tag, uint64_t index = 0) {
  return Rng(DeriveSeed(root, tag, index));
}

}  // namespace vulntriage

#endif  // VULNTRIAGE_RNG_H_
