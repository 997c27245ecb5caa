#pragma once

#include <cstdint>
#include <random>

namespace fountain {

// splitmix64 finaliser
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based stream key: the engine for (seed, stream, index) does not
/// depend on which thread draws it or in what order.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream,
                                   std::uint64_t index) noexcept {
  return mix64(mix64(mix64(seed) ^ stream) ^ index);
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream,
                                   std::uint64_t index) {
  return std::mt19937_64(stream_key(seed, stream, index));
}

// Stream tags so that independent consumers never share draws.
namespace streams {
inline constexpr std::uint64_t cloud = 0x636c6f7564ULL;
inline constexpr std::uint64_t velocity = 0x76656c6fULL;
inline constexpr std::uint64_t detection = 0x646574ULL;
inline constexpr std::uint64_t servo = 0x7365727666ULL;
}  // namespace streams

}  // namespace fountain
