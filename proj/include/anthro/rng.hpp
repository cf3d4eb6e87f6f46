#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace anthro {

/// SplitMix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Seed for one random stream, keyed by (master seed, stack id, purpose, extra).
/// Streams never depend on execution order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t id, std::string_view purpose,
                                    std::uint64_t extra = 0) {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ id);
  h = mix64(h ^ hash_tag(purpose));
  return mix64(h ^ extra);
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t master, std::uint64_t id, std::string_view purpose,
                          std::uint64_t extra = 0) {
  return Engine(derive_seed(master, id, purpose, extra));
}

}  // namespace anthro
