#pragma once

#include <cstdint>
#include <random>

namespace clkan {

/// Independent random streams derived from one seed. Stream ids name the
/// consumer so that, for example, data shuffling and parameter init never
/// share draws.
enum class Stream : std::uint64_t {
  Init = 1,
  Shuffle = 2,
  Grid = 3,
  Data = 4,
  Split = 5,
  Check = 6,
};

inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x636c6b61u};
  return std::mt19937_64(seq);
}

}  // namespace clkan
