#pragma once

#include <string>

#include "varscore/scorer.hpp"

namespace varscore {

struct Checkpoint {
  ScorerParams params;
  TrainConfig config;
};

// Versioned container: magic "VSCK", format version, JSON header holding the
// dimensions, the training configuration and the tensor table, then raw
// little-endian 64-bit floats. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ScorerParams& params,
                     const TrainConfig& config);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace varscore
