#pragma once

#include <optional>

#include "ramtsf/attention.hpp"
#include "ramtsf/tensor.hpp"

namespace ramtsf {

enum class BlockKind { temporal_attention, spatial_attention, mlp };

// Where LayerNorm sits relative to the residual sum. `after_residual` is the
// default post-norm wiring LN(Dropout(S(E)) + E); `before_residual` is the
// alternative LN(Dropout(S(E))) + E. Both are supported because the two
// wirings coincide for every degenerate case the tests pin down, and the
// choice is worth keeping configurable.
enum class LnPlacement { after_residual, before_residual };

struct BlockSpec {
  BlockKind kind = BlockKind::mlp;
  bool use_feedforward = true;
  bool use_residual = true;
  bool use_layernorm = true;
  int64_t d_model = 0;
  int64_t d_ff = 0;
  int64_t heads = 1;
  double dropout = 0.0;
  LnPlacement ln_placement = LnPlacement::after_residual;

  bool operator==(const BlockSpec&) const = default;
};

// Parameters for one block. Which members are populated follows the BlockSpec
// flags: attention projections only for attention kinds, FFN weights only
// with use_feedforward, LN gains/biases only with use_layernorm. `cross`
// and `ln3` exist only on decoder attention blocks.
struct BlockParams {
  std::optional<MhaParams> attn;
  std::optional<MhaParams> cross;
  Tensor w_f, b_f;  // d_model -> d_ff
  Tensor w_b, b_b;  // d_ff -> d_model
  Tensor ln1_g, ln1_b;
  Tensor ln2_g, ln2_b;
  Tensor ln3_g, ln3_b;
};

// Self-attention sublayer + FFN sublayer, each wrapped in
// dropout/residual/LayerNorm per the BlockSpec flags.
Tensor attention_block(const Tensor& e, const BlockSpec& spec, const BlockParams& params,
                       RunMode mode, Rng& rng);

// The pruned block: the attention sublayer is deleted outright, the wrapper
// stays. R = LN(Dropout(E) + E), then the FFN sublayer as usual.
Tensor resnormffn_block(const Tensor& e, const BlockSpec& spec, const BlockParams& params,
                        RunMode mode, Rng& rng);

// Decoder block: causal self-attention, cross-attention over `memory`,
// then the FFN sublayer. An all-mlp decoder block is resnormffn_block.
Tensor decoder_attention_block(const Tensor& y, const Tensor& memory, const BlockSpec& spec,
                               const BlockParams& params, RunMode mode, Rng& rng);

// Dispatches on spec.kind.
Tensor run_block(const Tensor& e, const BlockSpec& spec, const BlockParams& params,
                 RunMode mode, Rng& rng);

// Learnable-scalar counts implied by a spec (encoder blocks).
int64_t block_param_count(const BlockSpec& spec);
// Same for a decoder block (two attention sublayers when kind != mlp).
int64_t decoder_block_param_count(const BlockSpec& spec);

// Eval-mode forward cost of one encoder block on an [n, d_model] input under
// the library-wide accounting convention (see cost.hpp).
int64_t block_flops(const BlockSpec& spec, int64_t n);
// Decoder block cost: self-attention over H positions, cross-attention
// against T memory positions.
int64_t decoder_block_flops(const BlockSpec& spec, int64_t horizon, int64_t memory_len);

// Cost of one multi-head attention evaluation (used by block_flops and the
// model-level analytic roll-up). `masked` adds the additive-mask pass.
int64_t mha_flops(int64_t n, int64_t d_model, int64_t heads, bool masked);
int64_t cross_attention_flops(int64_t nq, int64_t nkv, int64_t d_model, int64_t heads);
int64_t ffn_flops(int64_t n, int64_t d_model, int64_t d_ff);

}  // namespace ramtsf
