/* Copyright 2026 The clasp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef CLASP_RNG_HPP_
#define CLASP_RNG_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>

namespace clasp {

// Deterministic, splittable random stream (xoshiro256++ seeded via
// splitmix64). std::mt19937 is portable but the std distributions are not,
// and reproducibility of datasets and training runs is a bit-exactness
// contract here, so sampling is done by hand.
class Rng {
 public:
  explicit Rng(uint64_t seed) : root_(seed) {
    uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  // Independent child stream. Children derived from the same (seed, stream)
  // pair are identical; different streams are decorrelated.
  Rng split(uint64_t stream) const {
    return Rng(root_ ^ splitmix_of(stream * 0x9E3779B97F4A7C15ULL + 0x1D8E4E27C47D124FULL));
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    // Rejection sampling keeps the distribution exact.
    const uint64_t threshold = (0 - n) % n;
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller, caching the spare value.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  static uint64_t splitmix_of(uint64_t x) { return splitmix64(x); }

  // Full state capture for checkpoint round trips. Words: root, 4 state
  // words, spare-cache flag, spare value bits.
  std::array<uint64_t, 7> save_state() const {
    std::array<uint64_t, 7> out{};
    out[0] = root_;
    for (int i = 0; i < 4; ++i) out[1 + i] = state_[i];
    out[5] = has_spare_ ? 1 : 0;
    uint64_t bits = 0;
    static_assert(sizeof(bits) == sizeof(spare_));
    std::memcpy(&bits, &spare_, sizeof(bits));
    out[6] = bits;
    return out;
  }

  void restore_state(const std::array<uint64_t, 7>& in) {
    root_ = in[0];
    for (int i = 0; i < 4; ++i) state_[i] = in[1 + i];
    has_spare_ = in[5] != 0;
    std::memcpy(&spare_, &in[6], sizeof(spare_));
  }

 private:
  static uint64_t splitmix64(uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  static uint64_t splitmix64(uint64_t&& x) {
    uint64_t v = x;
    return splitmix64(v);
  }
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t root_;
  uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace clasp

#endif  // CLASP_RNG_HPP_
