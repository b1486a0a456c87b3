#pragma once

#include <stdexcept>
#include <string>

#include "json.hpp"
#include "mpath/model.hpp"
#include "mpath/tokenizer.hpp"

namespace mpath {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ModelConfig config;
  Vocab vocab;
  ModelStateF state;
};

// Length-prefixed binary container:
//   "MPR1" | u32 version (LE) | u64 header length (LE) | JSON header | payload
// The header manifest maps each tensor name to (shape, dtype, payload offset,
// frozen flag); the payload is the concatenation of little-endian float32
// tensor data. Round trips are bit-exact.
void save_checkpoint(const std::string& path, const ModelStateF& state, const ModelConfig& cfg,
                     const Vocab& vocab);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace mpath
