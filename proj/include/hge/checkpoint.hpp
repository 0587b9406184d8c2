#pragma once

#include <string>

#include "hge/adam.hpp"
#include "hge/model.hpp"

namespace hge {

// Flat directory: manifest.json (config, shapes, epoch, step) plus one
// little-endian float64 blob per parameter and per optimizer moment.
void save_checkpoint(const std::string& dir, ModelParams& params, const AdamState& opt,
                     int epoch);

struct LoadedCheckpoint {
  ModelParams params;
  AdamState opt;
  int epoch = 0;
};

// Throws IncompatibilityError on version or shape mismatches.
LoadedCheckpoint load_checkpoint(const std::string& dir);

// Reads just the embedded TrainConfig (cheap; no blobs touched).
TrainConfig peek_config(const std::string& dir);

}  // namespace hge
