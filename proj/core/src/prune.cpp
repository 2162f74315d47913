#include "ramtsf/prune.hpp"

#include <algorithm>

namespace ramtsf {

namespace {

void rewrite(std::vector<BlockSpec>& stack, const PruneSpec& spec) {
  for (BlockSpec& b : stack) {
    b.kind = BlockKind::mlp;
    b.use_feedforward = spec.keep_feedforward;
    b.use_residual = spec.keep_residual;
    b.use_layernorm = spec.keep_layernorm;
  }
}

}  // namespace

ModelConfig prune_config(const ModelConfig& cfg, const PruneSpec& spec,
                         std::vector<std::string>* warnings) {
  cfg.validate();
  if (!spec.encoder_temporal && !spec.encoder_spatial && !spec.decoder) {
    throw ValueError("prune_config: no scope selected");
  }
  ModelConfig out = cfg;
  if (spec.encoder_temporal) rewrite(out.temporal_blocks, spec);
  if (spec.encoder_spatial) rewrite(out.spatial_blocks, spec);
  if (spec.decoder) {
    if (cfg.decoder == DecoderKind::projection) {
      if (warnings != nullptr) {
        warnings->push_back("decoder scope is a no-op on a projection decoder");
      }
    } else {
      rewrite(out.decoder_blocks, spec);
    }
  }
  out.validate();
  return out;
}

std::unique_ptr<AmtsfmModel> prune_weights(const AmtsfmModel& model, const PruneSpec& spec,
                                           std::vector<std::string>* warnings) {
  ModelConfig pruned_cfg = prune_config(model.config(), spec, warnings);
  auto pruned = std::make_unique<AmtsfmModel>(pruned_cfg);
  for (NamedParam& p : pruned->parameters()) {
    const Tensor* src = model.find_parameter(p.name);
    if (src == nullptr) continue;
    if (src->shape() != p.tensor.shape()) continue;
    auto dst = p.tensor.mutable_data();
    auto s = src->data();
    std::copy(s.begin(), s.end(), dst.begin());
  }
  return pruned;
}

std::vector<std::pair<std::string, ModelConfig>> ablation_grid(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<std::string, ModelConfig>> grid;
  grid.emplace_back("Origin", cfg);
  auto push = [&grid, &cfg](const std::string& name, const PruneSpec& spec) {
    ModelConfig variant = prune_config(cfg, spec);
    if (variant == cfg) return;
    grid.emplace_back(name, std::move(variant));
  };
  PruneSpec tm;
  tm.encoder_temporal = true;
  PruneSpec sp;
  sp.encoder_spatial = true;
  PruneSpec en;
  en.encoder_temporal = en.encoder_spatial = true;
  PruneSpec de;
  de.decoder = true;
  PruneSpec everything = PruneSpec::all();
  push("TM", tm);
  push("SP", sp);
  push("TM+SP", en);
  push("EN:TM+SP", en);
  push("DE:TM+SP", de);
  push("EN+DE:TM+SP", everything);
  PruneSpec no_ffn = everything;
  no_ffn.keep_feedforward = false;
  PruneSpec no_res = everything;
  no_res.keep_residual = false;
  PruneSpec no_ln = everything;
  no_ln.keep_layernorm = false;
  push("w/o FFN", no_ffn);
  push("w/o Residual", no_res);
  push("w/o LayerNorm", no_ln);
  return grid;
}

}  // namespace ramtsf
