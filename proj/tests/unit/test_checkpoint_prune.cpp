#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ramtsf/checkpoint.hpp"
#include "ramtsf/cost.hpp"
#include "ramtsf/prune.hpp"
#include "ramtsf/synth.hpp"
#include "ramtsf/trainer.hpp"

#include "helpers.hpp"

using namespace ramtsf;
using testutil::bitwise_equal;
using testutil::max_abs_diff;
using testutil::rand_tensor;

namespace {

ModelConfig demo_config(DecoderKind dec, int64_t k_dec) {
  ModelConfig cfg;
  cfg.decoder = dec;
  cfg.lookback = 4;
  cfg.horizon = 3;
  cfg.nodes = 3;
  cfg.in_features = 2;
  cfg.out_features = 1;
  cfg.d_model = 8;
  cfg.d_ff = 16;
  cfg.heads = 2;
  cfg.embedding = {true, true, true, 12};
  cfg.dropout = 0.0;
  cfg.seed = 11;
  populate_stacks(cfg, 1, 1, k_dec);
  return cfg;
}

Calendar demo_calendar(int64_t t) {
  Calendar cal;
  for (int64_t i = 0; i < t; ++i) {
    cal.tod.push_back(i % 12);
    cal.dow.push_back(i % 7);
  }
  return cal;
}

std::string temp_path(const std::string& stem) {
  return (std::filesystem::temp_directory_path() / stem).string();
}

void copy_params(const AmtsfmModel& src, AmtsfmModel& dst) {
  for (auto& np : dst.parameters()) {
    const Tensor* s = src.find_parameter(np.name);
    REQUIRE(s != nullptr);
    auto d = np.tensor.mutable_data();
    std::copy(s->data().begin(), s->data().end(), d.begin());
  }
}

}  // namespace

TEST_CASE("checkpoint round trip restores every parameter bitwise") {
  ModelConfig cfg = demo_config(DecoderKind::attention, 1);
  AmtsfmModel model(cfg);
  std::string path = temp_path("ramtsf_ckpt_roundtrip.bin");
  save_checkpoint(model, path);

  CHECK(peek_checkpoint_config(path) == cfg);

  auto loaded = load_checkpoint(path);
  CHECK(loaded->config() == cfg);
  REQUIRE(loaded->parameters().size() == model.parameters().size());
  for (auto& np : model.parameters()) {
    const Tensor* other = loaded->find_parameter(np.name);
    REQUIRE(other != nullptr);
    CHECK(bitwise_equal(np.tensor, *other));
  }

  Rng rng(401);
  Tensor x = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.in_features});
  Calendar cal = demo_calendar(cfg.lookback);
  CHECK(bitwise_equal(model.forward(x, cal, RunMode::eval),
                      loaded->forward(x, cal, RunMode::eval)));
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loader rejects damaged files") {
  CHECK_THROWS_AS(load_checkpoint(temp_path("ramtsf_ckpt_does_not_exist.bin")), IoError);

  std::string garbage = temp_path("ramtsf_ckpt_garbage.bin");
  {
    std::ofstream out(garbage, std::ios::binary);
    out << "definitely not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(garbage), IoError);
  std::remove(garbage.c_str());

  ModelConfig cfg = demo_config(DecoderKind::projection, 0);
  AmtsfmModel model(cfg);
  std::string whole = temp_path("ramtsf_ckpt_whole.bin");
  save_checkpoint(model, whole);
  std::string cut = temp_path("ramtsf_ckpt_cut.bin");
  {
    std::ifstream in(whole, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream out(cut, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_checkpoint(cut), IoError);
  std::remove(whole.c_str());
  std::remove(cut.c_str());
}

TEST_CASE("prune_config rewrites selected scopes and nothing else") {
  ModelConfig cfg = demo_config(DecoderKind::attention, 2);

  ModelConfig all = prune_config(cfg, PruneSpec::all());
  for (const auto* stack : {&all.temporal_blocks, &all.spatial_blocks, &all.decoder_blocks}) {
    for (const auto& b : *stack) {
      CHECK(b.kind == BlockKind::mlp);
      CHECK(b.use_feedforward);
      CHECK(b.use_residual);
      CHECK(b.use_layernorm);
    }
  }

  CHECK(prune_config(all, PruneSpec::all()) == all);

  PruneSpec spatial_only;
  spatial_only.encoder_spatial = true;
  ModelConfig sp = prune_config(cfg, spatial_only);
  CHECK(sp.temporal_blocks == cfg.temporal_blocks);
  CHECK(sp.decoder_blocks == cfg.decoder_blocks);
  CHECK(sp.spatial_blocks[0].kind == BlockKind::mlp);

  PruneSpec none;
  CHECK_THROWS_AS(prune_config(cfg, none), ValueError);
}

TEST_CASE("decoder scope on a projection decoder is a recorded no-op") {
  ModelConfig cfg = demo_config(DecoderKind::projection, 0);
  PruneSpec spec;
  spec.decoder = true;
  std::vector<std::string> warnings;
  ModelConfig out = prune_config(cfg, spec, &warnings);
  CHECK(out == cfg);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("no-op") != std::string::npos);
}

TEST_CASE("prune_weights copies every surviving parameter bitwise") {
  ModelConfig cfg = demo_config(DecoderKind::attention, 1);
  AmtsfmModel model(cfg);
  auto pruned = prune_weights(model, PruneSpec::all());

  int64_t shared = 0;
  for (auto& np : pruned->parameters()) {
    CHECK(np.name.find(".attn.") == std::string::npos);
    CHECK(np.name.find(".self.") == std::string::npos);
    CHECK(np.name.find(".cross.") == std::string::npos);
    const Tensor* src = model.find_parameter(np.name);
    if (src != nullptr && src->shape() == np.tensor.shape()) {
      CHECK(bitwise_equal(*src, np.tensor));
      ++shared;
    }
  }
  CHECK(shared > 0);
  CHECK(pruned->parameter_count() == analytic_param_count(pruned->config()));
  CHECK(pruned->parameter_count() < model.parameter_count());
}

TEST_CASE("a pruned model forwards exactly like a fresh model with the same weights") {
  ModelConfig cfg = demo_config(DecoderKind::attention, 1);
  AmtsfmModel model(cfg);
  auto pruned = prune_weights(model, PruneSpec::all());

  AmtsfmModel fresh(pruned->config());
  copy_params(*pruned, fresh);

  Rng rng(409);
  Tensor x = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.in_features});
  Calendar cal = demo_calendar(cfg.lookback);
  CHECK(bitwise_equal(pruned->forward(x, cal, RunMode::eval),
                      fresh.forward(x, cal, RunMode::eval)));
}

TEST_CASE("scope composition is order-free") {
  ModelConfig cfg = demo_config(DecoderKind::attention, 1);
  PruneSpec enc;
  enc.encoder_temporal = enc.encoder_spatial = true;
  PruneSpec dec;
  dec.decoder = true;
  CHECK(prune_config(prune_config(cfg, enc), dec) == prune_config(cfg, PruneSpec::all()));
  CHECK(prune_config(prune_config(cfg, dec), enc) == prune_config(cfg, PruneSpec::all()));
}

TEST_CASE("pruning reduces both cost totals") {
  ModelConfig cfg = demo_config(DecoderKind::attention, 1);
  ModelConfig pruned = prune_config(cfg, PruneSpec::all());
  CHECK(analytic_flops(pruned) < analytic_flops(cfg));
  CHECK(analytic_param_count(pruned) < analytic_param_count(cfg));
}

TEST_CASE("ablation grid enumerates the named variants") {
  ModelConfig cfg = demo_config(DecoderKind::attention, 1);
  auto grid = ablation_grid(cfg);
  REQUIRE(grid.size() == 10);
  CHECK(grid[0].first == "Origin");
  CHECK(grid[0].second == cfg);

  Rng rng(411);
  Tensor x = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.in_features});
  Calendar cal = demo_calendar(cfg.lookback);
  for (auto& [name, variant] : grid) {
    CAPTURE(name);
    variant.validate();
    AmtsfmModel m(variant);
    Tensor out = m.forward(x, cal, RunMode::eval);
    CHECK(out.shape() == Shape{cfg.horizon, cfg.nodes, cfg.out_features});
    if (name == "w/o LayerNorm") {
      for (auto& np : m.parameters()) {
        CHECK(np.name.find(".ln") == std::string::npos);
      }
    }
  }
}

TEST_CASE("carried weights keep the pruned model in a sane accuracy band") {
  SynthStfConfig scfg;
  scfg.nodes = 4;
  scfg.steps = 150;
  scfg.seed = 3;
  scfg.noise = 0.05;
  scfg.steps_per_day = 24;
  SeriesDataset raw = synth_stf(scfg);
  set_splits(raw, 0.7, 0.1);
  SeriesDataset ds = apply_zscore(raw, fit_zscore(raw));

  ModelConfig cfg;
  cfg.decoder = DecoderKind::projection;
  cfg.lookback = 6;
  cfg.horizon = 6;
  cfg.nodes = 4;
  cfg.in_features = 1;
  cfg.out_features = 1;
  cfg.d_model = 8;
  cfg.d_ff = 16;
  cfg.heads = 2;
  cfg.embedding = {true, true, true, 24};
  cfg.dropout = 0.0;
  cfg.seed = 21;
  populate_stacks(cfg, 1, 1, 0);
  AmtsfmModel model(cfg);

  TrainConfig tc;
  tc.lr = 3e-3;
  tc.max_epochs = 50;
  tc.patience = 50;
  tc.batch_size = 32;
  TrainHistory hist = train_model(model, ds, tc, 1);
  CHECK(static_cast<int64_t>(hist.epochs.size()) == 50);

  EvalReport orig = evaluate_model(model, ds, Split::val, tc.loss, false);
  auto pruned = prune_weights(model, PruneSpec::all());
  EvalReport after = evaluate_model(*pruned, ds, Split::val, tc.loss, false);

  CHECK(std::isfinite(after.horizon.mae_avg));
  CHECK(after.horizon.mae_avg <= 2.0 * orig.horizon.mae_avg);
}
