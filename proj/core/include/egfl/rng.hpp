// Copyright 2026 The egfl authors
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

#ifndef EGFL_RNG_HPP_
#define EGFL_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace egfl {

// splitmix64 finalizer; the standard mixer for deriving independent streams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic sub-stream seed derived from a root seed and a tag tuple,
// e.g. derive_seed(seed, {kStreamData, k, n, attempt}).
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> tag) {
  std::uint64_t h = mix64(root);
  for (std::uint64_t t : tag) h = mix64(h ^ t);
  return h;
}

inline std::mt19937_64 make_rng(std::uint64_t root, std::initializer_list<std::uint64_t> tag) {
  return std::mt19937_64(derive_seed(root, tag));
}

// Stream tags; keep distinct so sub-streams never collide.
inline constexpr std::uint64_t kStreamData = 0x01;
inline constexpr std::uint64_t kStreamResample = 0x02;
inline constexpr std::uint64_t kStreamSplit = 0x03;
inline constexpr std::uint64_t kStreamInit = 0x04;

}  // namespace egfl

#endif  // EGFL_RNG_HPP_
