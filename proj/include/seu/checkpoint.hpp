#pragma once

// Single-file checkpoint: magic + version, a JSON metadata section (config
// echo, sigma values, loss weights), then named little-endian float64
// parameter blocks. Round trips are byte-exact.

#include <string>
#include <utility>
#include <vector>

#include "seu/tensor.hpp"

namespace seu {

struct CheckpointBlock {
  std::string name;
  std::vector<int> shape;
  std::vector<double> data;
};

void save_checkpoint(const std::string& path, const std::string& metadata_json,
                     const std::vector<std::pair<std::string, Tensor>>& params);

struct Checkpoint {
  std::string metadata_json;
  std::vector<CheckpointBlock> blocks;
};

Checkpoint read_checkpoint(const std::string& path);

// Copies blocks into the named tensors; throws FormatError listing the
// offending block on any name or shape mismatch.
void load_into(const Checkpoint& ckpt,
               std::vector<std::pair<std::string, Tensor>> params);

}  // namespace seu
