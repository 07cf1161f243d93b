// Copyright 2026 The penaltydp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PENALTYDP_RNG_HPP_
#define PENALTYDP_RNG_HPP_

#include <array>
#include <cmath>
#include <cstdint>

// Counter-based random streams (Philox4x32-10). Every consumer of randomness
// in the library asks for a named stream derived from (seed, stream_id), so
// replacing one draw site never perturbs the others and whole runs replay
// bit-identically from the seed.

namespace penaltydp {

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline std::array<std::uint32_t, 4> philox_round(std::array<std::uint32_t, 4> c,
                                                 std::uint32_t k0,
                                                 std::uint32_t k1) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
  return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k0,
          static_cast<std::uint32_t>(p1),
          static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k1,
          static_cast<std::uint32_t>(p0)};
}

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::uint32_t k0,
                                                  std::uint32_t k1) {
  ctr = philox_round(ctr, k0, k1);
  for (int r = 1; r < 10; ++r) {
    k0 += kPhiloxW0;
    k1 += kPhiloxW1;
    ctr = philox_round(ctr, k0, k1);
  }
  return ctr;
}

// splitmix64 finalizer, used only to spread (seed, stream_id) into a key.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

// Well-known stream ids. Party noise streams start at kNoise so that the
// single-party protocol draws from exactly the stream a single-owner
// penalty chain would use.
namespace streams {
inline constexpr std::uint64_t kProposal = 1;
inline constexpr std::uint64_t kAccept = 2;
inline constexpr std::uint64_t kNoise = 16;

inline constexpr std::uint64_t party_noise(std::uint32_t party_id) {
  return kNoise + (party_id - 1);
}
}  // namespace streams

class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}

  RngStream(std::uint64_t seed, std::uint64_t stream_id) {
    const std::uint64_t k = detail::mix64(detail::mix64(seed) ^ stream_id);
    key0_ = static_cast<std::uint32_t>(k);
    key1_ = static_cast<std::uint32_t>(k >> 32);
  }

  // One block per call; the upper half of the block is discarded so that
  // every primitive has a fixed, documented consumption of one counter tick.
  std::uint64_t next_u64() {
    const auto b = next_block();
    return (static_cast<std::uint64_t>(b[1]) << 32) | b[0];
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Standard normal via Box-Muller (cosine branch). Consumes one block:
  // the two 64-bit halves feed the radius and the angle.
  double normal() {
    const auto b = next_block();
    const std::uint64_t ua = (static_cast<std::uint64_t>(b[1]) << 32) | b[0];
    const std::uint64_t ub = (static_cast<std::uint64_t>(b[3]) << 32) | b[2];
    const double u1 = static_cast<double>((ua >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(ub >> 11) * 0x1.0p-53;        // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  std::uint64_t blocks_consumed() const { return ctr_; }

 private:
  std::array<std::uint32_t, 4> next_block() {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(ctr_), static_cast<std::uint32_t>(ctr_ >> 32), 0, 0};
    ++ctr_;
    return detail::philox4x32_10(ctr, key0_, key1_);
  }

  std::uint32_t key0_ = 0;
  std::uint32_t key1_ = 0;
  std::uint64_t ctr_ = 0;
};

}  // namespace penaltydp

#endif  // PENALTYDP_RNG_HPP_
