#include "ramtsf/blocks.hpp"

namespace ramtsf {

namespace {

void validate_spec(const BlockSpec& spec) {
  if (spec.d_model <= 0) throw ValueError("block: d_model must be positive");
  if (spec.use_feedforward && spec.d_ff <= 0) {
    throw ValueError("block: d_ff must be positive when the FFN is enabled");
  }
  if (spec.kind != BlockKind::mlp && spec.heads <= 0) {
    throw ValueError("block: head count must be positive");
  }
  if (spec.dropout < 0.0 || spec.dropout >= 1.0) {
    throw ValueError("block: dropout must be in [0, 1)");
  }
}

// Dropout -> optional residual -> optional LayerNorm, with the two LN
// placements sharing one code path.
Tensor wrap_sublayer(const Tensor& residual_src, const Tensor& sublayer_out,
                     const BlockSpec& spec, const Tensor& ln_g, const Tensor& ln_b,
                     RunMode mode, Rng& rng) {
  Tensor d = dropout(sublayer_out, spec.dropout, mode, rng);
  if (spec.ln_placement == LnPlacement::after_residual) {
    Tensor t = spec.use_residual ? add(d, residual_src) : d;
    return spec.use_layernorm ? layer_norm(t, ln_g, ln_b) : t;
  }
  Tensor t = spec.use_layernorm ? layer_norm(d, ln_g, ln_b) : d;
  return spec.use_residual ? add(t, residual_src) : t;
}

Tensor ffn_sublayer(const Tensor& r, const BlockParams& params) {
  return linear(relu(linear(r, params.w_f, params.b_f)), params.w_b, params.b_b);
}

Tensor ffn_stage(const Tensor& r, const BlockSpec& spec, const BlockParams& params,
                 RunMode mode, Rng& rng) {
  if (!spec.use_feedforward) return r;
  return wrap_sublayer(r, ffn_sublayer(r, params), spec, params.ln2_g, params.ln2_b, mode, rng);
}

}  // namespace

Tensor attention_block(const Tensor& e, const BlockSpec& spec, const BlockParams& params,
                       RunMode mode, Rng& rng) {
  validate_spec(spec);
  if (spec.kind == BlockKind::mlp || !params.attn.has_value()) {
    throw ValueError("attention_block: spec/params carry no attention sublayer");
  }
  Tensor sub = multi_head_attention(e, *params.attn, /*causal=*/false);
  Tensor r = wrap_sublayer(e, sub, spec, params.ln1_g, params.ln1_b, mode, rng);
  return ffn_stage(r, spec, params, mode, rng);
}

Tensor resnormffn_block(const Tensor& e, const BlockSpec& spec, const BlockParams& params,
                        RunMode mode, Rng& rng) {
  validate_spec(spec);
  Tensor r = wrap_sublayer(e, e, spec, params.ln1_g, params.ln1_b, mode, rng);
  return ffn_stage(r, spec, params, mode, rng);
}

Tensor decoder_attention_block(const Tensor& y, const Tensor& memory, const BlockSpec& spec,
                               const BlockParams& params, RunMode mode, Rng& rng) {
  validate_spec(spec);
  if (spec.kind == BlockKind::mlp) {
    return resnormffn_block(y, spec, params, mode, rng);
  }
  if (!params.attn.has_value() || !params.cross.has_value()) {
    throw ValueError("decoder_attention_block: missing attention parameters");
  }
  Tensor self_out = multi_head_attention(y, *params.attn, /*causal=*/true);
  Tensor r1 = wrap_sublayer(y, self_out, spec, params.ln1_g, params.ln1_b, mode, rng);
  Tensor cross_out = multi_head_cross_attention(r1, memory, *params.cross, /*causal=*/false);
  Tensor r2 = wrap_sublayer(r1, cross_out, spec, params.ln3_g, params.ln3_b, mode, rng);
  return ffn_stage(r2, spec, params, mode, rng);
}

Tensor run_block(const Tensor& e, const BlockSpec& spec, const BlockParams& params,
                 RunMode mode, Rng& rng) {
  if (spec.kind == BlockKind::mlp) return resnormffn_block(e, spec, params, mode, rng);
  return attention_block(e, spec, params, mode, rng);
}

int64_t block_param_count(const BlockSpec& spec) {
  validate_spec(spec);
  const int64_t d = spec.d_model, f = spec.d_ff;
  int64_t p = 0;
  if (spec.kind != BlockKind::mlp) p += 4 * d * d + 4 * d;
  if (spec.use_feedforward) p += d * f + f + f * d + d;
  if (spec.use_layernorm) {
    p += 2 * d;                            // LN around the first sublayer
    if (spec.use_feedforward) p += 2 * d;  // LN around the FFN
  }
  return p;
}

int64_t decoder_block_param_count(const BlockSpec& spec) {
  validate_spec(spec);
  if (spec.kind == BlockKind::mlp) return block_param_count(spec);
  const int64_t d = spec.d_model;
  int64_t p = block_param_count(spec);
  p += 4 * d * d + 4 * d;                  // cross-attention projections
  if (spec.use_layernorm) p += 2 * d;      // LN around the cross sublayer
  return p;
}

int64_t mha_flops(int64_t n, int64_t d_model, int64_t heads, bool masked) {
  // 4 projections, per-head logits/scores/values, concat (free), output bias
  // included in the projection term.
  int64_t f = 4 * (2 * n * d_model * d_model + n * d_model);
  f += 4 * n * n * d_model;        // Q K^T and S V across all heads
  f += 6 * heads * n * n;          // logit scaling + 5n softmax per row
  if (masked) f += heads * n * n;  // additive mask
  return f;
}

int64_t cross_attention_flops(int64_t nq, int64_t nkv, int64_t d_model, int64_t heads) {
  int64_t f = 2 * nq * d_model * d_model + nq * d_model;         // Q projection
  f += 2 * (2 * nkv * d_model * d_model + nkv * d_model);        // K, V projections
  f += 4 * nq * nkv * d_model;                                   // logits + S V
  f += 6 * heads * nq * nkv;                                     // scaling + softmax
  f += 2 * nq * d_model * d_model + nq * d_model;                // output projection
  return f;
}

int64_t ffn_flops(int64_t n, int64_t d_model, int64_t d_ff) {
  // linear up (with bias), relu, linear down (with bias)
  return 2 * n * d_model * d_ff + n * d_ff + n * d_ff + 2 * n * d_ff * d_model + n * d_model;
}

namespace {

int64_t wrap_flops(const BlockSpec& spec, int64_t n) {
  const int64_t nd = n * spec.d_model;
  int64_t f = 0;
  if (spec.use_residual) f += nd;
  if (spec.use_layernorm) f += 8 * nd;
  return f;
}

}  // namespace

int64_t block_flops(const BlockSpec& spec, int64_t n) {
  validate_spec(spec);
  if (n <= 0) throw ValueError("block_flops: sequence length must be positive");
  int64_t f = 0;
  if (spec.kind != BlockKind::mlp) {
    f += mha_flops(n, spec.d_model, spec.heads, /*masked=*/false);
  }
  f += wrap_flops(spec, n);
  if (spec.use_feedforward) {
    f += ffn_flops(n, spec.d_model, spec.d_ff);
    f += wrap_flops(spec, n);
  }
  return f;
}

int64_t decoder_block_flops(const BlockSpec& spec, int64_t horizon, int64_t memory_len) {
  validate_spec(spec);
  if (horizon <= 0 || memory_len <= 0) {
    throw ValueError("decoder_block_flops: lengths must be positive");
  }
  if (spec.kind == BlockKind::mlp) return block_flops(spec, horizon);
  int64_t f = mha_flops(horizon, spec.d_model, spec.heads, /*masked=*/true);
  f += wrap_flops(spec, horizon);
  f += cross_attention_flops(horizon, memory_len, spec.d_model, spec.heads);
  f += wrap_flops(spec, horizon);
  if (spec.use_feedforward) {
    f += ffn_flops(horizon, spec.d_model, spec.d_ff);
    f += wrap_flops(spec, horizon);
  }
  return f;
}

}  // namespace ramtsf
