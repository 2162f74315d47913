#include <benchmark/benchmark.h>

#include "ramtsf/attention.hpp"
#include "ramtsf/blocks.hpp"
#include "ramtsf/cost.hpp"
#include "ramtsf/model.hpp"
#include "ramtsf/prune.hpp"
#include "ramtsf/rng.hpp"
#include "ramtsf/tensor.hpp"

using namespace ramtsf;

namespace {

Tensor random_tensor(Rng& rng, const std::vector<int64_t>& shape, double scale = 1.0) {
  Tensor t = Tensor::zeros(shape);
  for (auto& v : t.mutable_data()) v = scale * rng.gaussian();
  return t;
}

MhaParams random_mha(Rng& rng, int64_t d, int64_t heads) {
  MhaParams p;
  p.w_q = random_tensor(rng, {d, d}, 0.2);
  p.b_q = random_tensor(rng, {d}, 0.1);
  p.w_k = random_tensor(rng, {d, d}, 0.2);
  p.b_k = random_tensor(rng, {d}, 0.1);
  p.w_v = random_tensor(rng, {d, d}, 0.2);
  p.b_v = random_tensor(rng, {d}, 0.1);
  p.w_o = random_tensor(rng, {d, d}, 0.2);
  p.b_o = random_tensor(rng, {d}, 0.1);
  p.heads = heads;
  return p;
}

BlockSpec bench_spec(BlockKind kind, int64_t d, int64_t ff) {
  BlockSpec spec;
  spec.kind = kind;
  spec.d_model = d;
  spec.d_ff = ff;
  spec.heads = 4;
  spec.dropout = 0.0;
  return spec;
}

BlockParams bench_params(Rng& rng, const BlockSpec& spec) {
  BlockParams p;
  const int64_t d = spec.d_model, f = spec.d_ff;
  if (spec.kind != BlockKind::mlp) p.attn = random_mha(rng, d, spec.heads);
  p.w_f = random_tensor(rng, {d, f}, 0.2);
  p.b_f = random_tensor(rng, {f}, 0.1);
  p.w_b = random_tensor(rng, {f, d}, 0.2);
  p.b_b = random_tensor(rng, {d}, 0.1);
  p.ln1_g = Tensor::full({d}, 1.0);
  p.ln1_b = Tensor::zeros({d});
  p.ln2_g = Tensor::full({d}, 1.0);
  p.ln2_b = Tensor::zeros({d});
  return p;
}

void bm_matmul(benchmark::State& state) {
  const int64_t n = state.range(0);
  Rng rng(7);
  Tensor a = random_tensor(rng, {n, n});
  Tensor b = random_tensor(rng, {n, n});
  for (auto _ : state) {
    NoGradScope no_grad;
    benchmark::DoNotOptimize(matmul(a, b));
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}

void bm_attention_block(benchmark::State& state) {
  const int64_t n = state.range(0);
  Rng rng(11);
  BlockSpec spec = bench_spec(BlockKind::temporal_attention, 64, 256);
  BlockParams params = bench_params(rng, spec);
  Tensor e = random_tensor(rng, {n, 64});
  Rng drop(1);
  for (auto _ : state) {
    NoGradScope no_grad;
    benchmark::DoNotOptimize(attention_block(e, spec, params, RunMode::eval, drop));
  }
}

void bm_resnormffn_block(benchmark::State& state) {
  const int64_t n = state.range(0);
  Rng rng(11);
  BlockSpec spec = bench_spec(BlockKind::mlp, 64, 256);
  BlockParams params = bench_params(rng, spec);
  Tensor e = random_tensor(rng, {n, 64});
  Rng drop(1);
  for (auto _ : state) {
    NoGradScope no_grad;
    benchmark::DoNotOptimize(resnormffn_block(e, spec, params, RunMode::eval, drop));
  }
}

ModelConfig bench_config(bool pruned) {
  ModelConfig cfg;
  cfg.decoder = DecoderKind::projection;
  cfg.lookback = 12;
  cfg.horizon = 12;
  cfg.nodes = 32;
  cfg.in_features = 1;
  cfg.out_features = 1;
  cfg.d_model = 32;
  cfg.d_ff = 64;
  cfg.heads = 4;
  cfg.embedding = {true, true, true, 288};
  cfg.dropout = 0.0;
  cfg.seed = 5;
  populate_stacks(cfg, 2, 2, 0);
  if (pruned) cfg = prune_config(cfg, PruneSpec::all());
  return cfg;
}

void bm_model_forward(benchmark::State& state) {
  ModelConfig cfg = bench_config(state.range(0) != 0);
  AmtsfmModel model(cfg);
  Tensor x = probe_input(cfg);
  Rng rng(3);
  for (auto& v : x.mutable_data()) v = rng.gaussian();
  Calendar cal = probe_calendar(cfg);
  for (auto _ : state) {
    NoGradScope no_grad;
    benchmark::DoNotOptimize(model.forward(x, cal, RunMode::eval));
  }
  state.counters["analytic_flops"] = static_cast<double>(analytic_flops(cfg));
}

}  // namespace

BENCHMARK(bm_matmul)->Arg(32)->Arg(64)->Arg(128);
BENCHMARK(bm_attention_block)->Arg(12)->Arg(48)->Arg(192);
BENCHMARK(bm_resnormffn_block)->Arg(12)->Arg(48)->Arg(192);
BENCHMARK(bm_model_forward)->Arg(0)->Arg(1);

BENCHMARK_MAIN();
