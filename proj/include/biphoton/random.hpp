#pragma once

#include <cstdint>
#include <random>

namespace biphoton {

/// Kinds of random streams drawn during one acquisition interval.
enum class StreamKind : std::uint64_t {
  pairs = 1,
  background = 2,
  detection = 3,
  sweep = 4,  // per-point master seeds of a power sweep
};

/// Seed of the substream for (interval, kind) under `master_seed`.
///
/// seed = splitmix64(splitmix64(master ^ splitmix64(interval + 1)) ^ kind).
/// Every acquisition interval owns independent substreams, so intervals can
/// be generated in any order or in parallel and the result is reproducible.
std::uint64_t substream_seed(std::uint64_t master_seed, std::uint64_t interval, StreamKind kind);

/// One step of the splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

using Rng = std::mt19937_64;

}  // namespace biphoton
