// Copyright 2026 The vbdiar Authors.
//
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

#ifndef VBDIAR_RNG_HPP_
#define VBDIAR_RNG_HPP_

#include <cmath>
#include <cstdint>

namespace vbdiar {

// Counter-based generator. Draw i of a stream keyed by k is
//   SplitMix64Finalize(k + (i + 1) * 0x9E3779B97F4A7C15)
// where SplitMix64Finalize is the standard SplitMix64 output mix. Child
// streams are keyed by Finalize(k ^ Finalize(stream_id + 0xD1B54A32D192ED03)).
// Uniform doubles take the top 53 bits; normals use Box-Muller (cosine
// branch first, the sine branch is cached for the next call).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(Finalize(seed)) {}

  static std::uint64_t Finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t NextU64() {
    ++counter_;
    return Finalize(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  /// Uniform in [0, 1).
  double Uniform() { return static_cast<double>(NextU64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t Below(std::uint64_t n) {
    // Lemire-style rejection keeps the draw unbiased.
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
    std::uint64_t x;
    do {
      x = NextU64();
    } while (x >= limit);
    return x % n;
  }

  double Normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = Uniform();
    while (u1 <= 0.0) u1 = Uniform();
    const double u2 = Uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Independent child stream; does not advance this generator.
  Rng Split(std::uint64_t stream_id) const {
    Rng child(0);
    child.key_ = Finalize(key_ ^ Finalize(stream_id + 0xD1B54A32D192ED03ULL));
    return child;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace vbdiar

#endif  // VBDIAR_RNG_HPP_
