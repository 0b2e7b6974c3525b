#pragma once

#include <cstdint>

namespace vtpmd {

// Seed for every synthetic-data path, taken from VTPMD_SEED (default 42).
std::uint64_t env_seed();

// splitmix-style mix so per-layer streams derived from one seed differ.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace vtpmd
