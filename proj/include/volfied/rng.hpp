#pragma once

#include <cstdint>
#include <random>

namespace volfied {

// Independent random streams of one run. A stream's seed depends only on the
// master seed and its purpose, so every strategy and sweep point run with
// the same master seed sees the same PoAs, population, mobility and
// detection draws.
enum class RngStream : std::uint64_t {
  kPoAs = 1,
  kPopulation = 2,
  kTrace = 3,
  kDetection = 4,
  kRandomSelection = 5,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, RngStream stream) {
  return splitmix64(splitmix64(master) ^
                    (static_cast<std::uint64_t>(stream) * 0xd1b54a32d192ed03ULL));
}

inline std::mt19937_64 make_rng(std::uint64_t master, RngStream stream) {
  return std::mt19937_64(derive_seed(master, stream));
}

}  // namespace volfied
