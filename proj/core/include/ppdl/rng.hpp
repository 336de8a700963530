#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace ppdl {

using Rng = std::mt19937_64;

// Independent stream derived from a base seed and a tag path, e.g.
// make_stream(seed, {kTrainStream, node}). std::seed_seq is fully specified
// by the standard, so streams are identical across platforms.
inline Rng make_stream(std::uint64_t seed,
                       std::initializer_list<std::uint64_t> tags = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (tags.size() + 1));
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto t : tags) push(t);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace ppdl
