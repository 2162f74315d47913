#include <doctest.h>

#include <string>
#include <vector>

#include <json.hpp>

#include "ramtsf/cost.hpp"
#include "ramtsf/prune.hpp"

#include "helpers.hpp"

using namespace ramtsf;

namespace {

ModelConfig small_config(DecoderKind dec, int64_t lt, int64_t ls, int64_t kdec) {
  ModelConfig cfg;
  cfg.decoder = dec;
  cfg.lookback = 5;
  cfg.horizon = 4;
  cfg.nodes = 3;
  cfg.in_features = 2;
  cfg.out_features = 1;
  cfg.d_model = 8;
  cfg.d_ff = 16;
  cfg.heads = 2;
  cfg.embedding = {true, true, true, 12};
  cfg.dropout = 0.0;
  cfg.seed = 5;
  populate_stacks(cfg, lt, ls, kdec);
  return cfg;
}

void check_exact(const ModelConfig& cfg) {
  AmtsfmModel model(cfg);
  CHECK(analytic_param_count(cfg) == model.parameter_count());
  model.set_instrumentation(true);
  CostReport measured = measured_cost(model, probe_input(cfg), probe_calendar(cfg));
  CHECK(analytic_flops(cfg) == measured.total_flops);
  CHECK(analytic_param_count(cfg) == measured.total_params);
}

}  // namespace

TEST_CASE("reduction percentage") {
  CHECK(reduction_pct(100.0, 50.0) == 50.0);
  CHECK(reduction_pct(80.0, 80.0) == 0.0);
  CHECK(reduction_pct(200.0, 300.0) == -50.0);
  CHECK_THROWS_AS(reduction_pct(0.0, 0.0), ValueError);
}

TEST_CASE("analytic counts match the instrumented probe") {
  check_exact(small_config(DecoderKind::projection, 1, 1, 0));
  check_exact(small_config(DecoderKind::projection, 2, 0, 0));
  check_exact(small_config(DecoderKind::projection, 0, 2, 0));
  check_exact(small_config(DecoderKind::attention, 1, 1, 1));
  check_exact(small_config(DecoderKind::attention, 1, 0, 2));

  ModelConfig interleaved = small_config(DecoderKind::projection, 2, 2, 0);
  interleaved.interleave_encoder = true;
  check_exact(interleaved);

  ModelConfig no_embed = small_config(DecoderKind::projection, 1, 1, 0);
  no_embed.embedding = {false, false, false, 12};
  check_exact(no_embed);

  ModelConfig pruned = prune_config(small_config(DecoderKind::projection, 1, 1, 0),
                                    PruneSpec::all());
  check_exact(pruned);

  ModelConfig bare = small_config(DecoderKind::projection, 1, 1, 0);
  bare = prune_config(bare, [] {
    PruneSpec s = PruneSpec::all();
    s.keep_layernorm = false;
    return s;
  }());
  check_exact(bare);

  ModelConfig wide = small_config(DecoderKind::projection, 1, 1, 0);
  wide.out_features = 3;
  check_exact(wide);
}

TEST_CASE("dropout has no eval-mode cost") {
  ModelConfig dry = small_config(DecoderKind::projection, 1, 1, 0);
  ModelConfig wet = dry;
  wet.dropout = 0.3;
  for (auto* stack : {&wet.temporal_blocks, &wet.spatial_blocks}) {
    for (auto& b : *stack) b.dropout = 0.3;
  }
  CHECK(analytic_flops(dry) == analytic_flops(wet));

  AmtsfmModel model(wet);
  model.set_instrumentation(true);
  CostReport measured = measured_cost(model, probe_input(wet), probe_calendar(wet));
  CHECK(measured.total_flops == analytic_flops(dry));
}

TEST_CASE("all-mlp model cost is exactly linear in the node count") {
  ModelConfig base = prune_config(small_config(DecoderKind::projection, 2, 1, 0),
                                  PruneSpec::all());
  ModelConfig doubled = base;
  doubled.nodes = 2 * base.nodes;
  CHECK(analytic_flops(doubled) == 2 * analytic_flops(base));

  ModelConfig spatial = small_config(DecoderKind::projection, 0, 1, 0);
  ModelConfig spatial2 = spatial;
  spatial2.nodes = 2 * spatial.nodes;
  CHECK(analytic_flops(spatial2) > 2 * analytic_flops(spatial));
}

TEST_CASE("batch scales the flop count") {
  ModelConfig cfg = small_config(DecoderKind::projection, 1, 1, 0);
  CHECK(analytic_flops(cfg, 3) == 3 * analytic_flops(cfg, 1));
}

TEST_CASE("comparing a config against itself reports zero reduction") {
  ModelConfig cfg = small_config(DecoderKind::projection, 1, 1, 0);
  CostReport r = compare_costs(cfg, cfg);
  CHECK(r.has_baseline);
  CHECK(r.flops_drop_pct == 0.0);
  CHECK(r.params_drop_pct == 0.0);
}

TEST_CASE("reference configurations land in the published reduction bands") {
  ModelConfig stf = reference_stf_config();
  CostReport stf_cmp = compare_costs(stf, prune_config(stf, PruneSpec::all()));
  CHECK(stf_cmp.flops_drop_pct >= 50.0);
  CHECK(stf_cmp.flops_drop_pct <= 80.0);
  CHECK(stf_cmp.params_drop_pct > 0.0);

  ModelConfig ltsf = reference_ltsf_config();
  CostReport ltsf_cmp = compare_costs(ltsf, prune_config(ltsf, PruneSpec::all()));
  CHECK(ltsf_cmp.flops_drop_pct >= 20.0);
  CHECK(ltsf_cmp.flops_drop_pct <= 60.0);
  CHECK(ltsf_cmp.params_drop_pct > 0.0);
}

TEST_CASE("cost reports render and total correctly") {
  ModelConfig cfg = small_config(DecoderKind::projection, 1, 1, 0);
  CostReport r = analytic_cost(cfg);
  REQUIRE(!r.rows.empty());
  int64_t params = 0, flops = 0;
  for (const auto& row : r.rows) {
    params += row.params;
    flops += row.flops;
  }
  CHECK(params == r.total_params);
  CHECK(flops == r.total_flops);

  std::string text = cost_report_text(r);
  CHECK(text.find("params") != std::string::npos);

  auto j = nlohmann::json::parse(cost_report_json(r));
  CHECK(j.at("total_params").get<int64_t>() == r.total_params);
  CHECK(j.at("total_flops").get<int64_t>() == r.total_flops);

  CostReport cmp = compare_costs(cfg, prune_config(cfg, PruneSpec::all()));
  auto jc = nlohmann::json::parse(cost_report_json(cmp));
  CHECK(jc.contains("flops_drop_pct"));
}

TEST_CASE("measured cost requires instrumentation") {
  ModelConfig cfg = small_config(DecoderKind::projection, 1, 0, 0);
  AmtsfmModel model(cfg);
  CHECK_THROWS_AS(measured_cost(model, probe_input(cfg), probe_calendar(cfg)), StateError);
}

TEST_CASE("probe inputs are zero-valued with the right shapes") {
  ModelConfig cfg = small_config(DecoderKind::projection, 1, 1, 0);
  Tensor x = probe_input(cfg);
  CHECK(x.shape() == Shape{cfg.lookback, cfg.nodes, cfg.in_features});
  for (double v : x.data()) CHECK(v == 0.0);
  Calendar cal = probe_calendar(cfg);
  CHECK(static_cast<int64_t>(cal.tod.size()) == cfg.lookback);
  CHECK(static_cast<int64_t>(cal.dow.size()) == cfg.lookback);
}
