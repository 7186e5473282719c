#pragma once

#include <cstdint>
#include <random>

namespace teleport {

using Stream = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

enum class StreamPurpose : std::uint64_t {
  problem = 1,
  active_set = 2,
  token_permutation = 3,
  gradient_noise = 4,
};

/// Derives every random stream of a run from one master seed.
///
/// A stream is a pure function of (seed, purpose, id). `id` is the round
/// index for active-set sampling and token permutation, and the node id for
/// gradient noise, so a physical node draws the same noise sequence no matter
/// which algorithm drives it.
struct StreamPlan {
  std::uint64_t seed = 0;

  std::uint64_t derive(StreamPurpose purpose, std::uint64_t id) const {
    std::uint64_t h = detail::splitmix64(seed);
    h = detail::splitmix64(h ^ static_cast<std::uint64_t>(purpose));
    return detail::splitmix64(h ^ detail::splitmix64(id));
  }

  Stream stream(StreamPurpose purpose, std::uint64_t id) const {
    return Stream(derive(purpose, id));
  }

  Stream problem_stream() const { return stream(StreamPurpose::problem, 0); }

  bool operator==(const StreamPlan&) const = default;
};

}  // namespace teleport
