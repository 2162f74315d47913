#include "ramtsf/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numeric>
#include <unordered_set>

#include "ramtsf/attention.hpp"
#include "ramtsf/blocks.hpp"
#include "ramtsf/errors.hpp"
#include "ramtsf/model.hpp"

namespace ramtsf {

namespace {

// Relative error with an absolute floor: gradients below the floor are
// compared absolutely, which keeps central-difference truncation noise
// (~h^2) from failing coordinates whose true gradient is essentially zero.
double rel_error(double ad, double fd) {
  double denom = std::max({std::fabs(ad), std::fabs(fd), 1e-4});
  return std::fabs(ad - fd) / denom;
}

Tensor rand_uniform(Rng& rng, Shape shape, double lo, double hi, bool requires_grad) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(v), requires_grad);
}

Tensor rand_gauss(Rng& rng, Shape shape, double scale, bool requires_grad) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (auto& x : v) x = scale * rng.gaussian();
  return Tensor::from_data(std::move(shape), std::move(v), requires_grad);
}

// Magnitudes in [min_abs, max_abs] with random signs, so |.| kinks stay far
// beyond the perturbation radius.
Tensor rand_signed(Rng& rng, Shape shape, double min_abs, double max_abs,
                   bool requires_grad) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (auto& x : v) {
    double m = rng.uniform(min_abs, max_abs);
    x = (rng.next_u64() & 1u) ? m : -m;
  }
  return Tensor::from_data(std::move(shape), std::move(v), requires_grad);
}

Tensor fixed_weights(Rng& rng, Shape shape) {
  return rand_uniform(rng, std::move(shape), -0.8, 0.8, /*requires_grad=*/false);
}

double min_abs_value(const Tensor& t) {
  double m = std::numeric_limits<double>::infinity();
  for (double v : t.data()) m = std::min(m, std::fabs(v));
  return m;
}

MhaParams rand_mha(Rng& rng, int64_t d, int64_t heads) {
  MhaParams p;
  p.w_q = rand_gauss(rng, {d, d}, 0.35, true);
  p.b_q = rand_gauss(rng, {d}, 0.1, true);
  p.w_k = rand_gauss(rng, {d, d}, 0.35, true);
  p.b_k = rand_gauss(rng, {d}, 0.1, true);
  p.w_v = rand_gauss(rng, {d, d}, 0.35, true);
  p.b_v = rand_gauss(rng, {d}, 0.1, true);
  p.w_o = rand_gauss(rng, {d, d}, 0.35, true);
  p.b_o = rand_gauss(rng, {d}, 0.1, true);
  p.heads = heads;
  return p;
}

Tensor rand_ln_gain(Rng& rng, int64_t d) {
  std::vector<double> v(static_cast<size_t>(d));
  for (auto& x : v) x = 1.0 + 0.15 * rng.gaussian();
  return Tensor::from_data({d}, std::move(v), true);
}

BlockParams rand_block_params(Rng& rng, const BlockSpec& spec, bool is_decoder) {
  BlockParams bp;
  if (spec.kind != BlockKind::mlp) {
    bp.attn = rand_mha(rng, spec.d_model, spec.heads);
    if (is_decoder) bp.cross = rand_mha(rng, spec.d_model, spec.heads);
  }
  if (spec.use_feedforward) {
    bp.w_f = rand_gauss(rng, {spec.d_model, spec.d_ff}, 0.4, true);
    bp.b_f = rand_gauss(rng, {spec.d_ff}, 0.1, true);
    bp.w_b = rand_gauss(rng, {spec.d_ff, spec.d_model}, 0.4, true);
    bp.b_b = rand_gauss(rng, {spec.d_model}, 0.1, true);
  }
  if (spec.use_layernorm) {
    bp.ln1_g = rand_ln_gain(rng, spec.d_model);
    bp.ln1_b = rand_gauss(rng, {spec.d_model}, 0.1, true);
    bp.ln2_g = rand_ln_gain(rng, spec.d_model);
    bp.ln2_b = rand_gauss(rng, {spec.d_model}, 0.1, true);
    if (is_decoder) {
      bp.ln3_g = rand_ln_gain(rng, spec.d_model);
      bp.ln3_b = rand_gauss(rng, {spec.d_model}, 0.1, true);
    }
  }
  return bp;
}

void append_mha_leaves(std::vector<Tensor>& leaves, const MhaParams& p) {
  leaves.insert(leaves.end(), {p.w_q, p.b_q, p.w_k, p.b_k, p.w_v, p.b_v, p.w_o, p.b_o});
}

void append_block_leaves(std::vector<Tensor>& leaves, const BlockParams& bp) {
  if (bp.attn) append_mha_leaves(leaves, *bp.attn);
  if (bp.cross) append_mha_leaves(leaves, *bp.cross);
  for (const Tensor* t : {&bp.w_f, &bp.b_f, &bp.w_b, &bp.b_b, &bp.ln1_g, &bp.ln1_b,
                          &bp.ln2_g, &bp.ln2_b, &bp.ln3_g, &bp.ln3_b}) {
    if (t->defined()) leaves.push_back(*t);
  }
}

// Internal variant of max_rel_error with a refinement step: a coordinate
// whose wide-step error exceeds `refine_above` is re-measured at
// `fallback_step` and keeps the smaller error. A wrong analytic gradient is
// invariant to the step size, while a ReLU kink inside the +-step bracket is
// not, so the refinement separates the two.
double check_function(const std::function<Tensor()>& loss, std::span<Tensor> leaves,
                      double step, int64_t max_coords, uint64_t sample_seed,
                      int64_t* coords_out, double fallback_step) {
  if (!(step > 0.0)) throw ValueError("finite-difference step must be positive");
  for (Tensor& leaf : leaves) {
    if (leaf.has_grad()) leaf.zero_grad();
  }
  Tensor out = loss();
  if (out.numel() != 1) throw ValueError("gradient check needs a scalar loss");
  backward(out);
  std::vector<std::vector<double>> ad(leaves.size());
  for (size_t i = 0; i < leaves.size(); ++i) {
    if (leaves[i].has_grad()) {
      auto g = leaves[i].grad();
      ad[i].assign(g.begin(), g.end());
    } else {
      ad[i].assign(static_cast<size_t>(leaves[i].numel()), 0.0);
    }
  }

  NoGradScope no_grad;
  Rng pick(sample_seed ? sample_seed : 0x5EED);
  const double refine_above = 1e-6;
  double worst = 0.0;
  int64_t compared = 0;
  auto fd_at = [&](Tensor& leaf, int64_t k, double h) {
    auto d = leaf.mutable_data();
    const double saved = d[k];
    d[k] = saved + h;
    const double fp = loss().item();
    d[k] = saved - h;
    const double fm = loss().item();
    d[k] = saved;
    return (fp - fm) / (2.0 * h);
  };
  for (size_t i = 0; i < leaves.size(); ++i) {
    Tensor& leaf = leaves[i];
    const int64_t n = leaf.numel();
    std::vector<int64_t> coords;
    if (max_coords > 0 && n > max_coords) {
      std::unordered_set<int64_t> seen;
      while (static_cast<int64_t>(seen.size()) < max_coords) seen.insert(pick.below(n));
      coords.assign(seen.begin(), seen.end());
      std::sort(coords.begin(), coords.end());
    } else {
      coords.resize(static_cast<size_t>(n));
      std::iota(coords.begin(), coords.end(), int64_t{0});
    }
    for (int64_t k : coords) {
      double err = rel_error(ad[i][static_cast<size_t>(k)], fd_at(leaf, k, step));
      if (fallback_step > 0.0 && err > refine_above) {
        err = std::min(err, rel_error(ad[i][static_cast<size_t>(k)],
                                      fd_at(leaf, k, fallback_step)));
      }
      worst = std::max(worst, err);
      ++compared;
    }
  }
  if (coords_out) *coords_out = compared;
  return worst;
}

struct SuiteContext {
  GradCheckReport* report = nullptr;
  double tolerance = 0.0;
  double step = 0.0;
};

void record_case(SuiteContext& ctx, const std::string& name,
                 const std::function<Tensor()>& loss, std::vector<Tensor> leaves,
                 uint64_t sample_seed, bool kinks_inside, int64_t max_coords = 0) {
  int64_t coords = 0;
  double fallback = kinks_inside ? ctx.step / 16.0 : 0.0;
  double err = check_function(loss, leaves, ctx.step, max_coords, sample_seed,
                              &coords, fallback);
  auto& cases = ctx.report->cases;
  auto it = std::find_if(cases.begin(), cases.end(),
                         [&](const GradCheckCase& c) { return c.name == name; });
  if (it == cases.end()) {
    cases.push_back({name, err, coords, true});
  } else {
    it->max_rel_err = std::max(it->max_rel_err, err);
    it->coords += coords;
  }
}

ModelConfig tiny_projection_config(uint64_t seed) {
  ModelConfig cfg;
  cfg.task = Task::stf;
  cfg.decoder = DecoderKind::projection;
  cfg.lookback = 4;
  cfg.horizon = 2;
  cfg.nodes = 3;
  cfg.in_features = 1;
  cfg.out_features = 1;
  cfg.d_model = 8;
  cfg.d_ff = 16;
  cfg.heads = 2;
  cfg.embedding = {true, true, true, 6};
  cfg.dropout = 0.0;
  cfg.seed = seed;
  populate_stacks(cfg, 1, 1, 0);
  cfg.validate();
  return cfg;
}

ModelConfig tiny_teacher_config(uint64_t seed) {
  ModelConfig cfg = tiny_projection_config(seed);
  cfg.decoder = DecoderKind::attention;
  cfg.horizon = 3;
  cfg.nodes = 2;
  populate_stacks(cfg, 1, 1, 1);
  cfg.validate();
  return cfg;
}

Calendar rand_calendar(Rng& rng, int64_t steps, int64_t steps_per_day) {
  Calendar cal;
  for (int64_t i = 0; i < steps; ++i) {
    cal.tod.push_back(rng.below(steps_per_day));
    cal.dow.push_back(rng.below(7));
  }
  return cal;
}

void run_seed_cases(SuiteContext& ctx, int64_t s) {
  Rng rng(Rng::mix(static_cast<uint64_t>(s), 0x6C0DE));
  const uint64_t pick_seed = Rng::mix(static_cast<uint64_t>(s), 0x9A3);

  {
    Tensor x = rand_signed(rng, {3, 4}, 0.25, 1.5, true);
    Tensor y = rand_uniform(rng, {3, 4}, 0.2, 1.2, true);
    Tensor c = fixed_weights(rng, {3, 4});
    auto loss = [=]() {
      Tensor t = add(mul(x, y), sub(abs(x), scale(y, 0.7)));
      return add(sum(mul(t, c)), scale(mean(mul(x, x)), 0.5));
    };
    record_case(ctx, "elementwise-chain", loss, {x, y}, pick_seed, false);
  }
  {
    Tensor x = rand_uniform(rng, {4, 3}, 0.5, 2.5, true);
    Tensor c = fixed_weights(rng, {4, 3});
    auto loss = [=]() { return sum(mul(rsqrt(x), c)); };
    record_case(ctx, "rsqrt", loss, {x}, pick_seed, false);
  }
  {
    Tensor x, w, b;
    for (int tries = 0; tries < 200; ++tries) {
      x = rand_gauss(rng, {4, 5}, 0.8, true);
      w = rand_gauss(rng, {5, 3}, 0.5, true);
      b = rand_gauss(rng, {3}, 0.3, true);
      NoGradScope ng;
      if (min_abs_value(linear(x, w, b)) >= 5e-3) break;
    }
    Tensor c = fixed_weights(rng, {4, 3});
    auto loss = [=]() { return sum(mul(relu(linear(x, w, b)), c)); };
    record_case(ctx, "linear-relu", loss, {x, w, b}, pick_seed, false);
  }
  {
    const double betas[3] = {0.5, 1.0, 2.0};
    const double beta = betas[static_cast<size_t>(s % 3)];
    Tensor a = rand_gauss(rng, {4, 6}, 0.7, true);
    Tensor b = rand_gauss(rng, {6, 5}, 0.5, true);
    Tensor c = fixed_weights(rng, {4, 5});
    auto loss = [=]() { return sum(mul(softmax(matmul(a, b), -1, beta), c)); };
    record_case(ctx, "softmax-matmul", loss, {a, b}, pick_seed, false);
  }
  {
    Tensor x = rand_gauss(rng, {5, 8}, 1.0, true);
    Tensor g = rand_ln_gain(rng, 8);
    Tensor b = rand_gauss(rng, {8}, 0.1, true);
    Tensor c = fixed_weights(rng, {5, 8});
    auto loss = [=]() { return sum(mul(layer_norm(x, g, b), c)); };
    record_case(ctx, "layer-norm", loss, {x, g, b}, pick_seed, false);
  }
  {
    Tensor x = rand_gauss(rng, {2, 3, 4}, 1.0, true);
    Tensor c = fixed_weights(rng, {5, 4});
    auto loss = [=]() {
      Tensor r = reshape(transpose(x, {1, 0, 2}), {6, 4});
      std::vector<Tensor> halves = {slice_last_axis(r, 2, 2), slice_last_axis(r, 0, 2)};
      Tensor cc = concat_last_axis(halves);
      std::vector<Tensor> rows = {slice_rows(cc, 1, 4), slice_rows(cc, 0, 1)};
      return sum(mul(concat_rows(rows), c));
    };
    record_case(ctx, "movement-chain", loss, {x}, pick_seed, false);
  }
  {
    Tensor e = rand_gauss(rng, {3, 4, 6}, 1.0, true);
    Tensor c = fixed_weights(rng, {3, 4, 6});
    auto loss = [=]() {
      std::vector<Tensor> parts = split(e, SplitAxis::node);
      for (size_t i = 0; i < parts.size(); ++i) {
        parts[i] = scale(parts[i], 0.5 + 0.25 * static_cast<double>(i));
      }
      Tensor st = stack(parts, SplitAxis::node);
      std::vector<Tensor> steps = split(st, SplitAxis::time);
      return sum(mul(stack(steps, SplitAxis::time), c));
    };
    record_case(ctx, "split-stack", loss, {e}, pick_seed, false);
  }
  {
    Tensor table = rand_gauss(rng, {6, 4}, 1.0, true);
    std::vector<int64_t> idx;
    for (int i = 0; i < 9; ++i) idx.push_back(rng.below(6));
    Tensor c = fixed_weights(rng, {9, 4});
    auto loss = [=]() { return sum(mul(gather_rows(table, idx), c)); };
    record_case(ctx, "gather-rows", loss, {table}, pick_seed, false);
  }
  {
    Tensor x = rand_gauss(rng, {4, 5}, 1.0, true);
    Tensor c = fixed_weights(rng, {4, 5});
    const uint64_t mask_seed = Rng::mix(static_cast<uint64_t>(s), 0xD80);
    auto loss = [=]() {
      Rng mask_rng(mask_seed);
      return sum(mul(dropout(x, 0.35, RunMode::train, mask_rng), c));
    };
    record_case(ctx, "dropout-train", loss, {x}, pick_seed, false);
  }
  {
    Tensor x = rand_gauss(rng, {5, 8}, 0.8, true);
    MhaParams p = rand_mha(rng, 8, 2);
    Tensor c = fixed_weights(rng, {5, 8});
    auto loss = [=]() { return sum(mul(multi_head_attention(x, p, false), c)); };
    std::vector<Tensor> leaves = {x};
    append_mha_leaves(leaves, p);
    record_case(ctx, "self-attention", loss, std::move(leaves), pick_seed, false);
  }
  {
    Tensor x = rand_gauss(rng, {5, 8}, 0.8, true);
    MhaParams p = rand_mha(rng, 8, 4);
    Tensor c = fixed_weights(rng, {5, 8});
    auto loss = [=]() { return sum(mul(multi_head_attention(x, p, true), c)); };
    std::vector<Tensor> leaves = {x};
    append_mha_leaves(leaves, p);
    record_case(ctx, "causal-attention", loss, std::move(leaves), pick_seed, false);
  }
  {
    Tensor q = rand_gauss(rng, {4, 8}, 0.8, true);
    Tensor kv = rand_gauss(rng, {6, 8}, 0.8, true);
    MhaParams p = rand_mha(rng, 8, (s % 2 == 0) ? 2 : 4);
    Tensor c = fixed_weights(rng, {4, 8});
    auto loss = [=]() { return sum(mul(multi_head_cross_attention(q, kv, p, false), c)); };
    std::vector<Tensor> leaves = {q, kv};
    append_mha_leaves(leaves, p);
    record_case(ctx, "cross-attention", loss, std::move(leaves), pick_seed, false);
  }
  {
    Tensor x = rand_gauss(rng, {5, 8}, 0.8, true);
    MhaParams p = rand_mha(rng, 8, 2);
    const int64_t head = s % 2;
    Tensor c = fixed_weights(rng, {5, 5});
    auto loss = [=]() { return sum(mul(attention_scores(x, p, head), c)); };
    record_case(ctx, "attention-scores", loss, {x, p.w_q, p.b_q, p.w_k, p.b_k},
                pick_seed, false);
  }
  {
    GcnParams p;
    p.act = (s % 2 == 0) ? Activation::identity : Activation::relu;
    Tensor z;
    for (int tries = 0; tries < 200; ++tries) {
      z = rand_gauss(rng, {5, 6}, 0.9, true);
      p.w_q = rand_gauss(rng, {6, 6}, 0.4, true);
      p.w_k = rand_gauss(rng, {6, 6}, 0.4, true);
      p.theta = rand_gauss(rng, {6, 4}, 0.5, true);
      if (p.act == Activation::identity) break;
      NoGradScope ng;
      Tensor pre = matmul(matmul(dynamic_adjacency(z, p), z), p.theta);
      if (min_abs_value(pre) >= 5e-3) break;
    }
    Tensor c = fixed_weights(rng, {5, 4});
    auto loss = [=]() { return sum(mul(modified_attention(z, p), c)); };
    record_case(ctx, "modified-attention", loss, {z, p.w_q, p.w_k, p.theta},
                pick_seed, false);
  }
  {
    GcnParams p;
    p.act = (s % 2 == 0) ? Activation::relu : Activation::identity;
    GcnParams probe;
    probe.act = Activation::identity;
    Tensor z, adj;
    for (int tries = 0; tries < 200; ++tries) {
      z = rand_gauss(rng, {5, 6}, 0.9, true);
      adj = rand_uniform(rng, {5, 5}, 0.1, 1.0, true);
      p.theta = rand_gauss(rng, {6, 4}, 0.5, true);
      if (p.act == Activation::identity) break;
      probe.theta = p.theta;
      NoGradScope ng;
      if (min_abs_value(gcn_layer(z, adj, probe, true)) >= 5e-3) break;
    }
    Tensor c = fixed_weights(rng, {5, 4});
    auto loss = [=]() { return sum(mul(gcn_layer(z, adj, p, true), c)); };
    record_case(ctx, "gcn-normalized", loss, {z, adj, p.theta}, pick_seed, false);
  }
  {
    BlockSpec spec;
    spec.kind = BlockKind::temporal_attention;
    spec.d_model = 8;
    spec.d_ff = 16;
    spec.heads = 2;
    spec.dropout = 0.0;
    spec.ln_placement =
        (s % 2 == 0) ? LnPlacement::after_residual : LnPlacement::before_residual;
    BlockParams bp = rand_block_params(rng, spec, false);
    Tensor x = rand_gauss(rng, {6, 8}, 0.8, true);
    Tensor c = fixed_weights(rng, {6, 8});
    auto loss = [=]() {
      Rng dummy(1);
      return sum(mul(attention_block(x, spec, bp, RunMode::train, dummy), c));
    };
    std::vector<Tensor> leaves = {x};
    append_block_leaves(leaves, bp);
    record_case(ctx, "encoder-attention-block", loss, std::move(leaves), pick_seed, true);
  }
  {
    BlockSpec spec;
    spec.kind = BlockKind::mlp;
    spec.d_model = 8;
    spec.d_ff = 16;
    spec.dropout = 0.0;
    spec.ln_placement =
        (s % 2 == 0) ? LnPlacement::before_residual : LnPlacement::after_residual;
    BlockParams bp = rand_block_params(rng, spec, false);
    Tensor x = rand_gauss(rng, {6, 8}, 0.8, true);
    Tensor c = fixed_weights(rng, {6, 8});
    auto loss = [=]() {
      Rng dummy(1);
      return sum(mul(resnormffn_block(x, spec, bp, RunMode::train, dummy), c));
    };
    std::vector<Tensor> leaves = {x};
    append_block_leaves(leaves, bp);
    record_case(ctx, "resnormffn-block", loss, std::move(leaves), pick_seed, true);
  }
  {
    BlockSpec spec;
    spec.kind = BlockKind::spatial_attention;
    spec.d_model = 8;
    spec.d_ff = 16;
    spec.heads = 2;
    spec.dropout = 0.0;
    spec.use_feedforward = false;
    spec.use_residual = (s % 2 == 0);
    spec.use_layernorm = ((s / 2) % 2 == 0);
    BlockParams bp = rand_block_params(rng, spec, false);
    Tensor x = rand_gauss(rng, {5, 8}, 0.8, true);
    Tensor c = fixed_weights(rng, {5, 8});
    auto loss = [=]() {
      Rng dummy(1);
      return sum(mul(run_block(x, spec, bp, RunMode::train, dummy), c));
    };
    std::vector<Tensor> leaves = {x};
    append_block_leaves(leaves, bp);
    record_case(ctx, "block-flag-variants", loss, std::move(leaves), pick_seed, false);
  }
  {
    BlockSpec spec;
    spec.kind = BlockKind::temporal_attention;
    spec.d_model = 8;
    spec.d_ff = 16;
    spec.heads = 2;
    spec.dropout = 0.0;
    BlockParams bp = rand_block_params(rng, spec, true);
    Tensor y = rand_gauss(rng, {3, 8}, 0.8, true);
    Tensor memory = rand_gauss(rng, {5, 8}, 0.8, true);
    Tensor c = fixed_weights(rng, {3, 8});
    auto loss = [=]() {
      Rng dummy(1);
      return sum(mul(decoder_attention_block(y, memory, spec, bp, RunMode::train, dummy), c));
    };
    std::vector<Tensor> leaves = {y, memory};
    append_block_leaves(leaves, bp);
    record_case(ctx, "decoder-block", loss, std::move(leaves), pick_seed, true);
  }
  {
    auto model = std::make_shared<AmtsfmModel>(
        tiny_projection_config(Rng::mix(static_cast<uint64_t>(s), 0x517)));
    const ModelConfig& cfg = model->config();
    Tensor x = rand_gauss(rng, {cfg.lookback, cfg.nodes, cfg.in_features}, 0.9, true);
    Calendar cal = rand_calendar(rng, cfg.lookback, cfg.embedding.steps_per_day);
    Tensor c = fixed_weights(rng, {cfg.horizon, cfg.nodes, cfg.out_features});
    auto loss = [=]() { return sum(mul(model->forward(x, cal, RunMode::train, nullptr), c)); };
    std::vector<Tensor> leaves = {x};
    for (const NamedParam& p : model->parameters()) leaves.push_back(p.tensor);
    record_case(ctx, "model-projection-decoder", loss, std::move(leaves), pick_seed, true);
  }
  {
    auto model = std::make_shared<AmtsfmModel>(
        tiny_teacher_config(Rng::mix(static_cast<uint64_t>(s), 0x91D)));
    const ModelConfig& cfg = model->config();
    Tensor x = rand_gauss(rng, {cfg.lookback, cfg.nodes, cfg.in_features}, 0.9, true);
    Tensor targets = rand_gauss(rng, {cfg.horizon, cfg.nodes, cfg.out_features}, 0.9, true);
    Calendar cal = rand_calendar(rng, cfg.lookback, cfg.embedding.steps_per_day);
    Tensor c = fixed_weights(rng, {cfg.horizon, cfg.nodes, cfg.out_features});
    auto loss = [=]() { return sum(mul(model->forward(x, cal, RunMode::train, &targets), c)); };
    std::vector<Tensor> leaves = {x, targets};
    for (const NamedParam& p : model->parameters()) leaves.push_back(p.tensor);
    record_case(ctx, "model-teacher-forced", loss, std::move(leaves), pick_seed, true);
  }
}

}  // namespace

double max_rel_error(const std::function<Tensor()>& loss, std::span<Tensor> leaves,
                     double step, int64_t max_coords, uint64_t sample_seed,
                     int64_t* coords_out) {
  return check_function(loss, leaves, step, max_coords, sample_seed, coords_out, 0.0);
}

GradCheckReport run_gradcheck_suite(int64_t seeds, double tolerance, double step) {
  if (seeds < 1) throw ValueError("gradient-check suite needs at least one seed");
  if (!(tolerance > 0.0)) throw ValueError("gradient-check tolerance must be positive");
  GradCheckReport report;
  report.seeds = seeds;
  report.tolerance = tolerance;
  report.step = step;
  SuiteContext ctx{&report, tolerance, step};
  for (int64_t s = 1; s <= seeds; ++s) run_seed_cases(ctx, s);
  for (auto& c : report.cases) {
    c.passed = c.max_rel_err < tolerance;
    report.max_rel_err = std::max(report.max_rel_err, c.max_rel_err);
  }
  report.passed =
      std::all_of(report.cases.begin(), report.cases.end(),
                  [](const GradCheckCase& c) { return c.passed; });
  return report;
}

std::string gradcheck_report_text(const GradCheckReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-28s %12s %10s %8s\n", "case", "max_rel_err",
                "coords", "status");
  out += line;
  for (const auto& c : report.cases) {
    std::snprintf(line, sizeof(line), "%-28s %12.3e %10lld %8s\n", c.name.c_str(),
                  c.max_rel_err, static_cast<long long>(c.coords),
                  c.passed ? "ok" : "FAIL");
    out += line;
  }
  std::snprintf(line, sizeof(line),
                "seeds=%lld step=%.1e tolerance=%.1e max_rel_err=%.3e %s\n",
                static_cast<long long>(report.seeds), report.step, report.tolerance,
                report.max_rel_err, report.passed ? "PASS" : "FAIL");
  out += line;
  return out;
}

}  // namespace ramtsf
