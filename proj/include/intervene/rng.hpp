#pragma once

#include <cstdint>
#include <random>

namespace intervene {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  return mix64(mix64(base) ^ (tag * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag1, std::uint64_t tag2) {
  return derive_seed(derive_seed(base, tag1), tag2);
}

inline Rng make_stream(std::uint64_t base, std::uint64_t tag) { return Rng(derive_seed(base, tag)); }

inline Rng make_stream(std::uint64_t base, std::uint64_t tag1, std::uint64_t tag2) {
  return Rng(derive_seed(base, tag1, tag2));
}

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Stream tags. Kept in one place so independent consumers never collide.
namespace stream {
inline constexpr std::uint64_t kValidation = 1;
inline constexpr std::uint64_t kLearnerInit = 2;
inline constexpr std::uint64_t kPolicyInit = 3;
inline constexpr std::uint64_t kWarmStart = 4;
inline constexpr std::uint64_t kEpisode = 5;
inline constexpr std::uint64_t kEnvironment = 6;
}  // namespace stream

}  // namespace intervene
