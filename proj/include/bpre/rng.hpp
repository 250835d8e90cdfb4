#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace bpre {

// All sampling in this library is driven by explicit 64-bit stream values.
// Replica i of an operation tagged `tag` under master seed s uses
//   stream = derive_stream(s, fnv1a64(tag), i)
// so results are independent of how replicas are distributed over workers.

using Rng = std::mt19937_64;

// splitmix64 step (Steele, Lea, Flood); doubles as a 64-bit finalizer.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t x) {
  std::uint64_t s = x;
  return splitmix64(s);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_stream(std::uint64_t master_seed, std::uint64_t tag,
                                   std::uint64_t index) {
  return mix64(mix64(mix64(master_seed) ^ tag) ^ index);
}

// Human-readable statement of the rule above; echoed into run manifests.
inline constexpr const char* kStreamRule =
    "stream(i) = mix64(mix64(mix64(master_seed) ^ fnv1a64(op_tag)) ^ i), "
    "mix64 = splitmix64 finalizer; engine = mt19937_64(stream)";

inline Rng make_rng(std::uint64_t stream) { return Rng(stream); }

}  // namespace bpre
