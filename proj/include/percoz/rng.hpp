#pragma once

#include <cstddef>
#include <cstdint>

namespace percoz {

// Counter-based uniforms: the variate of an edge slot depends only on
// (seed, stream, slot), so lazily probed and fully materialized
// configurations agree bit for bit, and one uniform per edge couples all p.

constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed) ^ (stream * 0xd1b54a32d192ed03ull + 0x8cb92ba72f3d8dd7ull));
}

constexpr double slot_uniform(std::uint64_t key, std::size_t slot) {
  return static_cast<double>(mix64(key ^ (static_cast<std::uint64_t>(slot) * 0x9e3779b97f4a7c15ull)) >> 11) * 0x1.0p-53;
}

/// Edge source that draws each slot on demand.
struct LazyBonds {
  std::uint64_t key;
  double p;
  bool open(std::size_t slot) const { return slot_uniform(key, slot) < p; }
};

}  // namespace percoz
