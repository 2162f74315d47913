#pragma once

#include "ramtsf/tensor.hpp"

namespace ramtsf {

// Multi-head self/cross attention parameters. All four projections are
// [d_model, d_model] with per-feature biases; d_model must divide evenly
// into `heads`.
struct MhaParams {
  Tensor w_q, b_q;
  Tensor w_k, b_k;
  Tensor w_v, b_v;
  Tensor w_o, b_o;
  int64_t heads = 1;
};

// softmax(Q K^T / sqrt(d_head)) V per head, concatenated and projected.
// With `causal` set, position i attends only to positions <= i (pre-softmax
// logits above the diagonal are pushed to kMaskedLogit, which underflows to
// an exact zero weight).
Tensor multi_head_attention(const Tensor& x, const MhaParams& p, bool causal = false);

// Queries come from `q_in`, keys/values from `kv_in`. `causal` requires both
// sequences to have equal length.
Tensor multi_head_cross_attention(const Tensor& q_in, const Tensor& kv_in,
                                  const MhaParams& p, bool causal = false);

// The [n, n] row-stochastic score matrix of one head (unmasked).
Tensor attention_scores(const Tensor& x, const MhaParams& p, int64_t head);

enum class Activation { relu, identity };

// Graph-convolution parameters; the adjacency builder mirrors a single
// unmasked attention head over the full feature width, so these projections
// carry no biases.
struct GcnParams {
  Tensor w_q;
  Tensor w_k;
  Tensor theta;
  Activation act = Activation::relu;
};

// Data-dependent adjacency: softmax((Z W_q)(Z W_k)^T / sqrt(d_model)) row-wise.
Tensor dynamic_adjacency(const Tensor& z, const GcnParams& p);

// One graph-convolution step: act(A~ Z theta). With `normalize` the adjacency
// is symmetrically degree-normalized (A~ = D^-1/2 A D^-1/2, no implicit
// self-loops); a zero-degree row is a degenerate graph and an error.
// The adjacency must be non-negative.
Tensor gcn_layer(const Tensor& z, const Tensor& adj, const GcnParams& p, bool normalize);

// act(dynamic_adjacency(Z) Z theta), composed inline. Coincides with
// gcn_layer(z, dynamic_adjacency(z, p), p, /*normalize=*/false): attention
// with a row-stochastic score matrix is graph convolution on a learned graph.
Tensor modified_attention(const Tensor& z, const GcnParams& p);

}  // namespace ramtsf
