//
// Copyright 2026 The UnlearnLab Authors
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
//

#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace unlearnlab::rng {

inline constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

/// splitmix64 finalizer; full-avalanche 64-bit mixer.
constexpr uint64_t mix64(uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

/// Absorbs one word into a running 64-bit hash state.
constexpr uint64_t absorb(uint64_t h, uint64_t v) {
  return mix64(h ^ (v + kGolden + (h << 6) + (h >> 2)));
}

/// Keyed hash of a word sequence. Deterministic, locale- and
/// platform-independent.
inline uint64_t hash_words(uint64_t key, std::span<const uint64_t> words) {
  uint64_t h = mix64(key ^ kGolden);
  for (uint64_t w : words) h = absorb(h, w);
  return h;
}

/// Keyed hash of a byte string (portable alternative to std::hash).
inline uint64_t hash_bytes(uint64_t key, std::string_view bytes) {
  uint64_t h = mix64(key ^ kGolden);
  for (unsigned char c : bytes) h = absorb(h, c);
  return h;
}

struct SplitMix64 {
  uint64_t state;

  constexpr uint64_t next() {
    state += kGolden;
    return mix64(state);
  }
};

/// xoshiro256++ seeded through splitmix64. All derived draws use only
/// integer arithmetic and IEEE-754 scaling, so a fixed seed reproduces
/// the same stream on every platform.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(uint64_t seed) {
    SplitMix64 sm{seed};
    for (auto& w : s_) w = sm.next();
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased uniform integer in [0, n). n must be > 0.
  uint64_t below(uint64_t n) {
    const uint64_t threshold = (0 - n) % n;
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

 private:
  static constexpr uint64_t rotl(uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  uint64_t s_[4];
};

/// Derives an independent child seed, e.g. one stream per document.
inline uint64_t child_seed(uint64_t parent, uint64_t index) {
  return mix64(parent ^ absorb(kGolden, index));
}

}  // namespace unlearnlab::rng
