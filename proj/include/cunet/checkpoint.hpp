// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CUNET_CHECKPOINT_HPP
#define CUNET_CHECKPOINT_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace cunet {

// Single-file container: a text manifest (name, element type, shape, byte
// offset) followed by a contiguous little-endian float32 payload.
struct Checkpoint {
  struct Entry {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
  };

  std::string config_text;  // canonical model/generator/pipeline serialization
  uint64_t config_digest = 0;
  int epoch = 0;
  double val_loss = 0.0;
  uint64_t opt_step = 0;
  std::vector<Entry> tensors;

  const Entry* find(const std::string& name) const;
};

uint64_t fnv1a64(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cunet

#endif  // CUNET_CHECKPOINT_HPP
