#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sgtmle {

// Derives an independent seed for a (master seed, replication, purpose) triple
// so that parallel replications draw from non-overlapping streams regardless of
// execution order.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t replication,
                                 std::string_view purpose) {
  // FNV-1a over the triple, then a splitmix64 finalizer.
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  mix(master);
  mix(replication);
  for (char c : purpose) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  h += 0x9e3779b97f4a7c15ull;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  return h ^ (h >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t master, std::uint64_t replication,
                                std::string_view purpose) {
  return std::mt19937_64(stream_seed(master, replication, purpose));
}

}  // namespace sgtmle
