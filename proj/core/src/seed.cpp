#include "vtpmd/seed.hpp"

#include <cstdlib>
#include <string>

namespace vtpmd {

std::uint64_t env_seed() {
  const char* env = std::getenv("VTPMD_SEED");
  if (!env || !*env) return 42;
  return std::strtoull(env, nullptr, 10);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace vtpmd
