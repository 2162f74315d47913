#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ramtsf/model.hpp"

namespace ramtsf {

// Which block stacks to rewrite and which sublayers the rewritten blocks
// keep. The default keep flags (all true) give the ResNormFFN block.
struct PruneSpec {
  bool encoder_temporal = false;
  bool encoder_spatial = false;
  bool decoder = false;
  bool keep_feedforward = true;
  bool keep_residual = true;
  bool keep_layernorm = true;

  static PruneSpec all() {
    PruneSpec s;
    s.encoder_temporal = s.encoder_spatial = s.decoder = true;
    return s;
  }
};

// Rewrites every block in the selected scopes to kind=mlp with the keep
// flags applied. Idempotent; unselected scopes are untouched. Selecting the
// decoder scope on a projection-decoder model is a recorded no-op.
ModelConfig prune_config(const ModelConfig& cfg, const PruneSpec& spec,
                         std::vector<std::string>* warnings = nullptr);

// Builds a fresh model on the pruned config and copies every parameter both
// models share (matched by name) bitwise. Parameters that exist only in the
// pruned model keep their fresh initialization.
std::unique_ptr<AmtsfmModel> prune_weights(const AmtsfmModel& model, const PruneSpec& spec,
                                           std::vector<std::string>* warnings = nullptr);

// The named config variants the block-replacement experiments sweep:
// the unmodified model, per-scope rewrites, and the rewrites with one kept
// sublayer removed. Variants whose config would equal the unmodified one
// are omitted.
std::vector<std::pair<std::string, ModelConfig>> ablation_grid(const ModelConfig& cfg);

}  // namespace ramtsf
