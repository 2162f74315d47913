#include "ramtsf/attention.hpp"

#include <cmath>
#include <string>

namespace ramtsf {

namespace {

void validate_mha(const Tensor& q_in, const Tensor& kv_in, const MhaParams& p, bool causal) {
  if (q_in.dim() != 2 || kv_in.dim() != 2) {
    throw ShapeError("attention: inputs must be [n, d_model]");
  }
  int64_t d = q_in.size(1);
  if (kv_in.size(1) != d) {
    throw ShapeError("attention: query and key/value feature widths disagree");
  }
  if (p.heads <= 0) throw ValueError("attention: head count must be positive");
  if (d % p.heads != 0) {
    throw ShapeError("attention: d_model " + std::to_string(d) + " not divisible by " +
                     std::to_string(p.heads) + " heads");
  }
  auto check_proj = [&](const Tensor& w, const Tensor& b, const char* name) {
    if (w.dim() != 2 || w.size(0) != d || w.size(1) != d || b.dim() != 1 || b.size(0) != d) {
      throw ShapeError(std::string("attention: ") + name + " projection must be [d_model, d_model]");
    }
  };
  check_proj(p.w_q, p.b_q, "query");
  check_proj(p.w_k, p.b_k, "key");
  check_proj(p.w_v, p.b_v, "value");
  check_proj(p.w_o, p.b_o, "output");
  if (causal && q_in.size(0) != kv_in.size(0)) {
    throw ShapeError("attention: causal masking needs equal sequence lengths");
  }
}

}  // namespace

Tensor multi_head_cross_attention(const Tensor& q_in, const Tensor& kv_in,
                                  const MhaParams& p, bool causal) {
  validate_mha(q_in, kv_in, p, causal);
  const int64_t d = q_in.size(1);
  const int64_t dh = d / p.heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor q = linear(q_in, p.w_q, p.b_q);
  Tensor k = linear(kv_in, p.w_k, p.b_k);
  Tensor v = linear(kv_in, p.w_v, p.b_v);
  Tensor mask;
  if (causal) mask = causal_mask(q_in.size(0));

  std::vector<Tensor> head_values;
  head_values.reserve(static_cast<size_t>(p.heads));
  for (int64_t h = 0; h < p.heads; ++h) {
    Tensor qh = slice_last_axis(q, h * dh, dh);
    Tensor kh = slice_last_axis(k, h * dh, dh);
    Tensor vh = slice_last_axis(v, h * dh, dh);
    Tensor logits = scale(matmul(qh, transpose(kh)), inv_sqrt_dh);
    if (causal) logits = add(logits, mask);
    Tensor scores = softmax(logits, -1);
    head_values.push_back(matmul(scores, vh));
  }
  Tensor cat = concat_last_axis(head_values);
  return linear(cat, p.w_o, p.b_o);
}

Tensor multi_head_attention(const Tensor& x, const MhaParams& p, bool causal) {
  return multi_head_cross_attention(x, x, p, causal);
}

Tensor attention_scores(const Tensor& x, const MhaParams& p, int64_t head) {
  validate_mha(x, x, p, false);
  if (head < 0 || head >= p.heads) {
    throw ValueError("attention_scores: head " + std::to_string(head) + " out of range [0, " +
                     std::to_string(p.heads) + ")");
  }
  const int64_t d = x.size(1);
  const int64_t dh = d / p.heads;
  Tensor q = slice_last_axis(linear(x, p.w_q, p.b_q), head * dh, dh);
  Tensor k = slice_last_axis(linear(x, p.w_k, p.b_k), head * dh, dh);
  Tensor logits = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(dh)));
  return softmax(logits, -1);
}

namespace {

void validate_gcn(const Tensor& z, const GcnParams& p) {
  if (z.dim() != 2) throw ShapeError("gcn: input must be [N, d]");
  int64_t d = z.size(1);
  if (!p.theta.defined() || p.theta.dim() != 2 || p.theta.size(0) != d) {
    throw ShapeError("gcn: theta must be [d, d_out]");
  }
}

void validate_adjacency_projections(const Tensor& z, const GcnParams& p) {
  int64_t d = z.size(1);
  if (!p.w_q.defined() || p.w_q.dim() != 2 || p.w_q.size(0) != d || p.w_q.size(1) != d ||
      !p.w_k.defined() || p.w_k.dim() != 2 || p.w_k.size(0) != d || p.w_k.size(1) != d) {
    throw ShapeError("gcn: adjacency projections must be [d, d]");
  }
}

Tensor apply_activation(const Tensor& h, Activation act) {
  return act == Activation::relu ? relu(h) : h;
}

}  // namespace

Tensor dynamic_adjacency(const Tensor& z, const GcnParams& p) {
  if (z.dim() != 2) throw ShapeError("gcn: input must be [N, d]");
  validate_adjacency_projections(z, p);
  const int64_t d = z.size(1);
  Tensor q = matmul(z, p.w_q);
  Tensor k = matmul(z, p.w_k);
  Tensor logits = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(d)));
  return softmax(logits, -1);
}

Tensor gcn_layer(const Tensor& z, const Tensor& adj, const GcnParams& p, bool normalize) {
  validate_gcn(z, p);
  const int64_t n = z.size(0);
  if (adj.dim() != 2 || adj.size(0) != n || adj.size(1) != n) {
    throw ShapeError("gcn_layer: adjacency must be [N, N] with N matching Z");
  }
  for (double a : adj.data()) {
    if (a < 0.0) throw GraphError("gcn_layer: adjacency has negative weights");
  }
  Tensor effective = adj;
  if (normalize) {
    Tensor degree = matmul(adj, Tensor::full({n, 1}, 1.0));
    for (double dv : degree.data()) {
      if (dv <= 0.0) {
        throw GraphError("gcn_layer: zero-degree node, normalization is undefined");
      }
    }
    Tensor r = rsqrt(degree);                         // [N,1]
    Tensor scaling = matmul(r, transpose(r));         // [N,N], r_i * r_j
    effective = mul(adj, scaling);
  }
  Tensor h = matmul(matmul(effective, z), p.theta);
  return apply_activation(h, p.act);
}

Tensor modified_attention(const Tensor& z, const GcnParams& p) {
  Tensor adj = dynamic_adjacency(z, p);
  Tensor h = matmul(matmul(adj, z), p.theta);
  return apply_activation(h, p.act);
}

}  // namespace ramtsf
