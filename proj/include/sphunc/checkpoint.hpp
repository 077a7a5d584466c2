#pragma once

#include <cstdint>
#include <string>

#include "sphunc/training.hpp"

// Versioned text checkpoints: header (format version, D, d, N, seed) plus
// named parameter sections, exact double round trip.
namespace sphunc {

struct Checkpoint {
  ModelParams params;
  std::uint64_t seed = 0;
};

void save_checkpoint(const std::string& path, const ModelParams& params,
                     std::uint64_t seed);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace sphunc
