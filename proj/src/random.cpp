#include "biphoton/random.hpp"

namespace biphoton {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t master_seed, std::uint64_t interval, StreamKind kind) {
  const std::uint64_t per_interval = splitmix64(master_seed ^ splitmix64(interval + 1));
  return splitmix64(per_interval ^ static_cast<std::uint64_t>(kind));
}

}  // namespace biphoton
