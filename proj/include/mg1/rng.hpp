#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mg1 {

// splitmix64 step; used only to derive seeds, never as the run generator.
inline std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Named substreams keep arrivals, batch composition, per-job service paths,
// and policy randomness independent. Runs sharing a master seed are therefore
// common-random-number coupled across policies: the arrival process and every
// job's service path are identical no matter who schedules.
enum class Stream : std::uint64_t {
  Arrivals = 1,
  BatchMix = 2,
  JobPath = 3,
  Policy = 4,
};

inline std::mt19937_64 substream(std::uint64_t master, Stream tag, std::uint64_t id = 0) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s ^= static_cast<std::uint64_t>(tag) * 0x9e3779b97f4a7c15ull;
  std::uint64_t b = splitmix64(s);
  s ^= id * 0xda942042e4dd58b5ull;
  std::uint64_t c = splitmix64(s);
  return std::mt19937_64(a ^ (b * 0x2545f4914f6cdd1dull) ^ c);
}

// Uniform on (0, 1]; bounded away from zero so -log stays finite.
inline double uniform01(std::mt19937_64& g) {
  return (static_cast<double>(g() >> 11) + 1.0) * 0x1.0p-53;
}

// Hand-rolled so results are pinned by the engine alone; std::exponential_distribution
// is implementation-defined and would break reproducibility contracts.
inline double exponential(std::mt19937_64& g, double rate) {
  return -std::log(uniform01(g)) / rate;
}

}  // namespace mg1
