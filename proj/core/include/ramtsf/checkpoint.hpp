#pragma once

#include <memory>
#include <string>

#include "ramtsf/model.hpp"

namespace ramtsf {

// Single-file checkpoint: an 8-byte magic/version header, the config hash,
// the canonical config JSON, then one length-prefixed blob per named
// parameter (name, rank, dims, row-major float64 data). All integers and
// floats are serialized little-endian regardless of host order.
void save_checkpoint(const AmtsfmModel& model, const std::string& path);

// Rebuilds the model from the embedded config and overwrites every
// parameter with the stored values. Throws IoError on malformed input,
// hash/registry mismatches, or non-finite stored values.
std::unique_ptr<AmtsfmModel> load_checkpoint(const std::string& path);

// Reads only the embedded config (header validation included).
ModelConfig peek_checkpoint_config(const std::string& path);

}  // namespace ramtsf
