// Copyright 2026 The ppaudit Authors
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

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

#include "absl/strings/string_view.h"

namespace ppaudit {

inline uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Named sub-stream of a root seed, e.g. DeriveSeed(seed, "noise", {trial, g}).
// FNV-1a over the name, then SplitMix64 chaining over the indices.
inline uint64_t DeriveSeed(uint64_t root, absl::string_view stream,
                           std::initializer_list<uint64_t> indices = {}) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  uint64_t state = SplitMix64(root ^ SplitMix64(h));
  for (uint64_t index : indices) state = SplitMix64(state ^ SplitMix64(index + 1));
  return state;
}

// Seeded random stream with platform-independent transforms. The standard
// <random> distributions are implementation-defined, so uniforms and normals
// are derived here directly from the 64-bit engine output.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }

  // Uniform on the open interval (0, 1) with 53 bits of resolution.
  double Uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound), bound > 0. Lemire's rejection method.
  uint64_t Below(uint64_t bound) {
    uint64_t threshold = (0 - bound) % bound;
    while (true) {
      uint64_t x = engine_();
      unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
      if (static_cast<uint64_t>(m) >= threshold) {
        return static_cast<uint64_t>(m >> 64);
      }
    }
  }

  bool Bernoulli(double p) { return Uniform() < p; }

  // Standard normal via Box-Muller; the second variate is cached.
  double Normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double radius = std::sqrt(-2.0 * std::log(Uniform()));
    double angle = 2.0 * std::numbers::pi * Uniform();
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ppaudit
