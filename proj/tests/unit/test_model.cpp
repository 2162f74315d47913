#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ramtsf/gradcheck.hpp"
#include "ramtsf/model.hpp"

#include "helpers.hpp"

using namespace ramtsf;
using testutil::bitwise_equal;
using testutil::max_abs_diff;
using testutil::rand_tensor;

namespace {

void set_values(Tensor& t, const std::vector<double>& v) {
  REQUIRE(static_cast<int64_t>(v.size()) == t.numel());
  std::copy(v.begin(), v.end(), t.mutable_data().begin());
}

void set_param(AmtsfmModel& m, const std::string& name, const Tensor& value) {
  Tensor* p = m.find_parameter(name);
  REQUIRE(p != nullptr);
  REQUIRE(p->shape() == value.shape());
  std::copy(value.data().begin(), value.data().end(), p->mutable_data().begin());
}

ModelConfig tiny_config(DecoderKind dec, int64_t k_dec) {
  ModelConfig cfg;
  cfg.task = Task::stf;
  cfg.decoder = dec;
  cfg.lookback = 4;
  cfg.horizon = 3;
  cfg.nodes = 3;
  cfg.in_features = 2;
  cfg.out_features = 1;
  cfg.d_model = 8;
  cfg.d_ff = 16;
  cfg.heads = 2;
  cfg.embedding = {true, true, true, 6};
  cfg.dropout = 0.0;
  cfg.seed = 7;
  populate_stacks(cfg, 1, 1, k_dec);
  return cfg;
}

Calendar tiny_calendar(int64_t t, int64_t steps_per_day) {
  Calendar cal;
  for (int64_t i = 0; i < t; ++i) {
    cal.tod.push_back(i % steps_per_day);
    cal.dow.push_back((i / 2) % 7);
  }
  return cal;
}

}  // namespace

TEST_CASE("embedding with all terms off is the input projection") {
  ModelConfig cfg = tiny_config(DecoderKind::projection, 0);
  cfg.in_features = cfg.d_model;
  cfg.embedding = {false, false, false, 6};
  AmtsfmModel model(cfg);
  set_param(model, "embed.w_in", Tensor::identity(cfg.d_model));
  set_param(model, "embed.b_in", Tensor::zeros({cfg.d_model}));

  Rng rng(301);
  Tensor x = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.d_model});
  Calendar cal;  // ignored when every calendar term is off
  CHECK(max_abs_diff(model.embed(x, cal), x) <= 1e-12);
}

TEST_CASE("embedding is the sum of its terms") {
  ModelConfig cfg = tiny_config(DecoderKind::projection, 0);
  AmtsfmModel model(cfg);
  Rng rng(303);
  Tensor x = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.in_features});
  Calendar cal = tiny_calendar(cfg.lookback, cfg.embedding.steps_per_day);

  Tensor e = model.embed(x, cal);
  const Tensor* w = model.find_parameter("embed.w_in");
  const Tensor* b = model.find_parameter("embed.b_in");
  const Tensor* tod = model.find_parameter("embed.tod");
  const Tensor* dow = model.find_parameter("embed.dow");
  const Tensor* node = model.find_parameter("embed.node");
  REQUIRE(w != nullptr);
  REQUIRE(tod != nullptr);

  const int64_t d = cfg.d_model, c = cfg.in_features;
  for (int64_t t = 0; t < cfg.lookback; ++t) {
    for (int64_t n = 0; n < cfg.nodes; ++n) {
      for (int64_t j = 0; j < d; ++j) {
        double v = b->data()[static_cast<size_t>(j)];
        for (int64_t k = 0; k < c; ++k) {
          v += x.data()[static_cast<size_t>((t * cfg.nodes + n) * c + k)] *
               w->data()[static_cast<size_t>(k * d + j)];
        }
        v += tod->data()[static_cast<size_t>(cal.tod[static_cast<size_t>(t)] * d + j)];
        v += dow->data()[static_cast<size_t>(cal.dow[static_cast<size_t>(t)] * d + j)];
        v += node->data()[static_cast<size_t>(n * d + j)];
        CHECK(std::fabs(e.data()[static_cast<size_t>((t * cfg.nodes + n) * d + j)] - v) <= 1e-12);
      }
    }
  }
}

TEST_CASE("embedding validates calendars") {
  ModelConfig cfg = tiny_config(DecoderKind::projection, 0);
  AmtsfmModel model(cfg);
  Rng rng(307);
  Tensor x = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.in_features});

  Calendar short_cal = tiny_calendar(cfg.lookback - 1, cfg.embedding.steps_per_day);
  CHECK_THROWS_AS(model.embed(x, short_cal), ValueError);

  Calendar bad = tiny_calendar(cfg.lookback, cfg.embedding.steps_per_day);
  bad.tod[0] = cfg.embedding.steps_per_day;
  CHECK_THROWS_AS(model.embed(x, bad), ValueError);
  bad = tiny_calendar(cfg.lookback, cfg.embedding.steps_per_day);
  bad.dow[1] = 7;
  CHECK_THROWS_AS(model.embed(x, bad), ValueError);

  Tensor wrong = rand_tensor(rng, {cfg.lookback, cfg.nodes + 1, cfg.in_features});
  CHECK_THROWS_AS(model.embed(wrong, tiny_calendar(cfg.lookback, 6)), ShapeError);
}

TEST_CASE("an empty encoder is the identity") {
  ModelConfig cfg = tiny_config(DecoderKind::projection, 0);
  cfg.temporal_blocks.clear();
  cfg.spatial_blocks.clear();
  AmtsfmModel model(cfg);
  Rng rng(311);
  Tensor e = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.d_model});
  CHECK(bitwise_equal(model.encode(e, RunMode::eval), e));
}

TEST_CASE("an all-mlp encoder is position-wise") {
  ModelConfig cfg = tiny_config(DecoderKind::projection, 0);
  for (auto& b : cfg.temporal_blocks) b.kind = BlockKind::mlp;
  for (auto& b : cfg.spatial_blocks) b.kind = BlockKind::mlp;
  AmtsfmModel model(cfg);

  Rng rng(313);
  Tensor e = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.d_model}, 1.0, true);
  Tensor out = model.encode(e, RunMode::eval);

  const int64_t t0 = 1, n0 = 2, d = cfg.d_model;
  backward(sum(mul(out, Tensor::from_data(out.shape(), [&] {
    std::vector<double> sel(static_cast<size_t>(out.numel()), 0.0);
    for (int64_t j = 0; j < d; ++j) {
      sel[static_cast<size_t>((t0 * cfg.nodes + n0) * d + j)] = 1.0;
    }
    return sel;
  }()))));
  for (int64_t t = 0; t < cfg.lookback; ++t) {
    for (int64_t n = 0; n < cfg.nodes; ++n) {
      if (t == t0 && n == n0) continue;
      for (int64_t j = 0; j < d; ++j) {
        CHECK(std::fabs(e.grad()[static_cast<size_t>((t * cfg.nodes + n) * d + j)]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("a temporal-only encoder never mixes nodes") {
  ModelConfig cfg = tiny_config(DecoderKind::projection, 0);
  cfg.spatial_blocks.clear();
  AmtsfmModel model(cfg);

  Rng rng(317);
  Tensor e = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.d_model}, 1.0, true);
  Tensor out = model.encode(e, RunMode::eval);
  const int64_t n0 = 0, d = cfg.d_model;
  std::vector<double> sel(static_cast<size_t>(out.numel()), 0.0);
  for (int64_t t = 0; t < cfg.lookback; ++t) {
    for (int64_t j = 0; j < d; ++j) sel[static_cast<size_t>((t * cfg.nodes + n0) * d + j)] = 1.0;
  }
  backward(sum(mul(out, Tensor::from_data(out.shape(), sel))));
  for (int64_t t = 0; t < cfg.lookback; ++t) {
    for (int64_t n = 1; n < cfg.nodes; ++n) {
      for (int64_t j = 0; j < d; ++j) {
        CHECK(e.grad()[static_cast<size_t>((t * cfg.nodes + n) * d + j)] == 0.0);
      }
    }
  }
}

TEST_CASE("projection decoder matches a loop oracle") {
  ModelConfig cfg = tiny_config(DecoderKind::projection, 0);
  AmtsfmModel model(cfg);
  Rng rng(331);
  Tensor z = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.d_model});
  Tensor out = model.decode(z, RunMode::eval, nullptr);
  REQUIRE(out.shape() == Shape{cfg.horizon, cfg.nodes, cfg.out_features});

  const Tensor* tp = model.find_parameter("decoder.time_proj");
  const Tensor* w = model.find_parameter("decoder.w_out");
  const Tensor* b = model.find_parameter("decoder.b_out");
  REQUIRE(tp != nullptr);
  const int64_t d = cfg.d_model;
  for (int64_t h = 0; h < cfg.horizon; ++h) {
    for (int64_t n = 0; n < cfg.nodes; ++n) {
      for (int64_t o = 0; o < cfg.out_features; ++o) {
        double v = b->data()[static_cast<size_t>(o)];
        for (int64_t j = 0; j < d; ++j) {
          double zj = 0.0;
          for (int64_t t = 0; t < cfg.lookback; ++t) {
            zj += tp->data()[static_cast<size_t>(t * cfg.horizon + h)] *
                  z.data()[static_cast<size_t>((t * cfg.nodes + n) * d + j)];
          }
          v += zj * w->data()[static_cast<size_t>(j * cfg.out_features + o)];
        }
        CHECK(std::fabs(out.data()[static_cast<size_t>((h * cfg.nodes + n) * cfg.out_features + o)] - v) <= 1e-12);
      }
    }
  }
}

TEST_CASE("identity time projection forwards matching steps") {
  ModelConfig cfg = tiny_config(DecoderKind::projection, 0);
  cfg.horizon = cfg.lookback;
  AmtsfmModel model(cfg);
  set_param(model, "decoder.time_proj", Tensor::identity(cfg.lookback));

  Rng rng(337);
  Tensor z = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.d_model});
  Tensor out = model.decode(z, RunMode::eval, nullptr);
  const Tensor* w = model.find_parameter("decoder.w_out");
  const Tensor* b = model.find_parameter("decoder.b_out");
  Tensor expect = linear(reshape(z, {cfg.lookback * cfg.nodes, cfg.d_model}), *w, *b);
  CHECK(max_abs_diff(out, reshape(expect, out.shape())) <= 1e-12);
}

TEST_CASE("uniform time projection averages the history") {
  ModelConfig cfg = tiny_config(DecoderKind::projection, 0);
  AmtsfmModel model(cfg);
  set_param(model, "decoder.time_proj",
            Tensor::full({cfg.lookback, cfg.horizon}, 1.0 / static_cast<double>(cfg.lookback)));

  Rng rng(341);
  Tensor z = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.d_model});
  Tensor out = model.decode(z, RunMode::eval, nullptr);
  for (int64_t h = 1; h < cfg.horizon; ++h) {
    CHECK(max_abs_diff(slice_rows(reshape(out, {cfg.horizon, cfg.nodes * cfg.out_features}), h, 1),
                       slice_rows(reshape(out, {cfg.horizon, cfg.nodes * cfg.out_features}), 0, 1)) <= 1e-12);
  }
}

TEST_CASE("attention decoder is causal in the teacher targets") {
  ModelConfig cfg = tiny_config(DecoderKind::attention, 1);
  AmtsfmModel model(cfg);
  Rng rng(347);
  Tensor x = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.in_features});
  Tensor targets = rand_tensor(rng, {cfg.horizon, cfg.nodes, cfg.out_features}, 1.0, true);
  Calendar cal = tiny_calendar(cfg.lookback, cfg.embedding.steps_per_day);

  Tensor out = model.forward(x, cal, RunMode::train, &targets);
  const int64_t h0 = 1;
  std::vector<double> sel(static_cast<size_t>(out.numel()), 0.0);
  for (int64_t n = 0; n < cfg.nodes; ++n) {
    for (int64_t o = 0; o < cfg.out_features; ++o) {
      sel[static_cast<size_t>((h0 * cfg.nodes + n) * cfg.out_features + o)] = 1.0;
    }
  }
  backward(sum(mul(out, Tensor::from_data(out.shape(), sel))));
  bool past_reached = false;
  for (int64_t h = 0; h < cfg.horizon; ++h) {
    for (int64_t n = 0; n < cfg.nodes; ++n) {
      for (int64_t o = 0; o < cfg.out_features; ++o) {
        double g = targets.grad()[static_cast<size_t>((h * cfg.nodes + n) * cfg.out_features + o)];
        if (h >= h0) {
          CHECK(g == 0.0);
        } else if (g != 0.0) {
          past_reached = true;
        }
      }
    }
  }
  CHECK(past_reached);
}

TEST_CASE("attention decoder teacher forcing reproduces the autoregressive rollout") {
  ModelConfig cfg = tiny_config(DecoderKind::attention, 1);
  AmtsfmModel model(cfg);
  Rng rng(349);
  Tensor x = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.in_features});
  Calendar cal = tiny_calendar(cfg.lookback, cfg.embedding.steps_per_day);

  Tensor rollout = model.forward(x, cal, RunMode::eval);
  Tensor teacher = model.forward(x, cal, RunMode::train, &rollout);
  CHECK(max_abs_diff(teacher, rollout) <= 1e-10);
}

TEST_CASE("an attention decoder without blocks still decodes") {
  ModelConfig cfg = tiny_config(DecoderKind::attention, 0);
  AmtsfmModel model(cfg);
  Rng rng(353);
  Tensor x = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.in_features});
  Calendar cal = tiny_calendar(cfg.lookback, cfg.embedding.steps_per_day);
  Tensor out = model.forward(x, cal, RunMode::eval);
  CHECK(out.shape() == Shape{cfg.horizon, cfg.nodes, cfg.out_features});
}

TEST_CASE("decode mode and target rules") {
  ModelConfig cfg = tiny_config(DecoderKind::attention, 1);
  AmtsfmModel model(cfg);
  Rng rng(359);
  Tensor x = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.in_features});
  Tensor targets = rand_tensor(rng, {cfg.horizon, cfg.nodes, cfg.out_features});
  Calendar cal = tiny_calendar(cfg.lookback, cfg.embedding.steps_per_day);

  CHECK_THROWS_AS(model.forward(x, cal, RunMode::train, nullptr), ValueError);
  CHECK_THROWS_AS(model.forward(x, cal, RunMode::eval, &targets), ValueError);

  ModelConfig pcfg = tiny_config(DecoderKind::projection, 0);
  AmtsfmModel pmodel(pcfg);
  CHECK_THROWS_AS(pmodel.forward(x, cal, RunMode::train, &targets), ValueError);
}

TEST_CASE("zeroed parameters produce an all-zero forecast") {
  ModelConfig cfg = tiny_config(DecoderKind::projection, 0);
  AmtsfmModel model(cfg);
  for (auto& np : model.parameters()) {
    auto d = np.tensor.mutable_data();
    std::fill(d.begin(), d.end(), 0.0);
  }
  Rng rng(367);
  Tensor x = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.in_features});
  Calendar cal = tiny_calendar(cfg.lookback, cfg.embedding.steps_per_day);
  Tensor out = model.forward(x, cal, RunMode::eval);
  for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("forward output shapes across configurations") {
  struct Case {
    int64_t t, h, n, c, o, d, ff, heads, lt, ls, kdec;
    DecoderKind dec;
    bool interleave;
  };
  std::vector<Case> cases = {
      {4, 3, 3, 2, 1, 8, 16, 2, 1, 1, 0, DecoderKind::projection, false},
      {1, 1, 1, 1, 1, 4, 8, 1, 0, 0, 0, DecoderKind::projection, false},
      {6, 2, 2, 3, 2, 8, 16, 4, 2, 1, 0, DecoderKind::projection, false},
      {3, 5, 4, 1, 1, 8, 16, 2, 1, 2, 0, DecoderKind::projection, true},
      {4, 4, 2, 2, 2, 8, 16, 2, 0, 1, 0, DecoderKind::projection, false},
      {5, 2, 3, 1, 1, 8, 16, 1, 1, 0, 1, DecoderKind::attention, false},
      {2, 3, 2, 2, 1, 8, 16, 2, 1, 1, 2, DecoderKind::attention, false},
      {4, 1, 1, 1, 1, 4, 8, 2, 1, 1, 1, DecoderKind::attention, false},
      {3, 2, 5, 2, 2, 8, 16, 2, 2, 2, 1, DecoderKind::attention, true},
      {8, 6, 2, 1, 1, 8, 16, 2, 1, 1, 0, DecoderKind::projection, false},
      {2, 2, 6, 1, 1, 8, 16, 2, 0, 2, 0, DecoderKind::projection, false},
      {7, 3, 2, 4, 3, 8, 16, 2, 1, 1, 0, DecoderKind::projection, false},
      {4, 3, 3, 2, 1, 8, 16, 8, 1, 1, 0, DecoderKind::projection, false},
      {5, 5, 2, 1, 1, 16, 8, 2, 1, 1, 0, DecoderKind::projection, false},
      {3, 4, 2, 2, 2, 8, 16, 2, 3, 0, 0, DecoderKind::projection, false},
      {6, 2, 3, 1, 1, 8, 16, 2, 0, 0, 1, DecoderKind::attention, false},
      {2, 7, 2, 1, 1, 8, 16, 2, 1, 1, 1, DecoderKind::attention, false},
      {4, 3, 1, 2, 1, 8, 16, 2, 2, 1, 0, DecoderKind::projection, false},
      {9, 2, 2, 1, 2, 8, 16, 2, 1, 1, 0, DecoderKind::projection, true},
      {4, 4, 4, 4, 4, 8, 16, 2, 1, 1, 0, DecoderKind::projection, false},
  };
  REQUIRE(cases.size() == 20);
  int idx = 0;
  for (const Case& c : cases) {
    CAPTURE(idx);
    ModelConfig cfg;
    cfg.decoder = c.dec;
    cfg.lookback = c.t;
    cfg.horizon = c.h;
    cfg.nodes = c.n;
    cfg.in_features = c.c;
    cfg.out_features = c.o;
    cfg.d_model = c.d;
    cfg.d_ff = c.ff;
    cfg.heads = c.heads;
    cfg.embedding = {true, true, true, 12};
    cfg.dropout = 0.0;
    cfg.seed = static_cast<uint64_t>(100 + idx);
    cfg.interleave_encoder = c.interleave;
    populate_stacks(cfg, c.lt, c.ls, c.kdec);
    cfg.validate();
    AmtsfmModel model(cfg);
    Rng rng(static_cast<uint64_t>(400 + idx));
    Tensor x = rand_tensor(rng, {c.t, c.n, c.c});
    Calendar cal = tiny_calendar(c.t, 12);
    Tensor out = model.forward(x, cal, RunMode::eval);
    CHECK(out.shape() == Shape{c.h, c.n, c.o});
    ++idx;
  }
}

TEST_CASE("node permutation equivariance without node identity") {
  ModelConfig cfg = tiny_config(DecoderKind::projection, 0);
  cfg.nodes = 4;
  cfg.embedding.node = false;
  AmtsfmModel model(cfg);
  Rng rng(373);
  Tensor x = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.in_features});
  Calendar cal = tiny_calendar(cfg.lookback, cfg.embedding.steps_per_day);
  std::vector<int64_t> perm = {2, 0, 3, 1};

  Tensor out = model.forward(x, cal, RunMode::eval);

  std::vector<double> px(static_cast<size_t>(x.numel()));
  for (int64_t t = 0; t < cfg.lookback; ++t) {
    for (int64_t n = 0; n < cfg.nodes; ++n) {
      for (int64_t k = 0; k < cfg.in_features; ++k) {
        px[static_cast<size_t>((t * cfg.nodes + n) * cfg.in_features + k)] =
            x.data()[static_cast<size_t>((t * cfg.nodes + perm[static_cast<size_t>(n)]) * cfg.in_features + k)];
      }
    }
  }
  Tensor out_p = model.forward(Tensor::from_data(x.shape(), px), cal, RunMode::eval);
  for (int64_t h = 0; h < cfg.horizon; ++h) {
    for (int64_t n = 0; n < cfg.nodes; ++n) {
      for (int64_t o = 0; o < cfg.out_features; ++o) {
        double a = out_p.data()[static_cast<size_t>((h * cfg.nodes + n) * cfg.out_features + o)];
        double b = out.data()[static_cast<size_t>((h * cfg.nodes + perm[static_cast<size_t>(n)]) * cfg.out_features + o)];
        CHECK(std::fabs(a - b) <= 1e-10);
      }
    }
  }
}

TEST_CASE("identical series with no node identity forecast identically") {
  ModelConfig cfg = tiny_config(DecoderKind::projection, 0);
  cfg.embedding.node = false;
  AmtsfmModel model(cfg);
  Rng rng(379);
  std::vector<double> series(static_cast<size_t>(cfg.lookback * cfg.in_features));
  for (auto& v : series) v = rng.gaussian();
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(cfg.lookback * cfg.nodes * cfg.in_features));
  for (int64_t t = 0; t < cfg.lookback; ++t) {
    for (int64_t n = 0; n < cfg.nodes; ++n) {
      for (int64_t k = 0; k < cfg.in_features; ++k) {
        flat.push_back(series[static_cast<size_t>(t * cfg.in_features + k)]);
      }
    }
  }
  Tensor x = Tensor::from_data({cfg.lookback, cfg.nodes, cfg.in_features}, flat);
  Calendar cal = tiny_calendar(cfg.lookback, cfg.embedding.steps_per_day);
  Tensor out = model.forward(x, cal, RunMode::eval);
  for (int64_t h = 0; h < cfg.horizon; ++h) {
    for (int64_t n = 1; n < cfg.nodes; ++n) {
      for (int64_t o = 0; o < cfg.out_features; ++o) {
        CHECK(std::fabs(out.data()[static_cast<size_t>((h * cfg.nodes + n) * cfg.out_features + o)] -
                        out.data()[static_cast<size_t>((h * cfg.nodes + 0) * cfg.out_features + o)]) <= 1e-10);
      }
    }
  }
}

TEST_CASE("model gradient passes finite differences") {
  ModelConfig cfg = tiny_config(DecoderKind::projection, 0);
  AmtsfmModel model(cfg);
  Rng rng(383);
  Tensor x = rand_tensor(rng, {cfg.lookback, cfg.nodes, cfg.in_features}, 1.0, true);
  Tensor c = rand_tensor(rng, {cfg.horizon, cfg.nodes, cfg.out_features});
  Calendar cal = tiny_calendar(cfg.lookback, cfg.embedding.steps_per_day);

  std::vector<Tensor> leaves;
  leaves.push_back(x);
  for (auto& np : model.parameters()) leaves.push_back(np.tensor);
  double err = max_rel_error(
      [&] { return sum(mul(model.forward(x, cal, RunMode::train), c)); }, leaves,
      1e-5, 40, 0xC0FFEE);
  CHECK(err < 1e-3);
}

TEST_CASE("config json round trip and hashing") {
  ModelConfig cfg = tiny_config(DecoderKind::attention, 2);
  cfg.ln_placement = LnPlacement::before_residual;
  for (auto* stack : {&cfg.temporal_blocks, &cfg.spatial_blocks, &cfg.decoder_blocks}) {
    for (auto& b : *stack) b.ln_placement = LnPlacement::before_residual;
  }
  cfg.interleave_encoder = true;
  cfg.temporal_blocks[0].kind = BlockKind::mlp;
  cfg.temporal_blocks[0].use_residual = false;

  std::string text = model_config_to_json(cfg);
  ModelConfig back = model_config_from_json(text);
  CHECK(back == cfg);
  CHECK(config_hash(back) == config_hash(cfg));
  CHECK(config_hash_hex(cfg).size() == 16);

  ModelConfig other = cfg;
  other.d_model = 16;
  other.d_ff = 32;
  for (auto* stack : {&other.temporal_blocks, &other.spatial_blocks, &other.decoder_blocks}) {
    for (auto& b : *stack) {
      b.d_model = 16;
      b.d_ff = 32;
    }
  }
  CHECK(config_hash(other) != config_hash(cfg));
}

TEST_CASE("config validation rejects bad settings") {
  ModelConfig cfg = tiny_config(DecoderKind::projection, 0);
  cfg.horizon = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  ModelConfig cfg2 = tiny_config(DecoderKind::projection, 0);
  cfg2.heads = 3;
  for (auto* stack : {&cfg2.temporal_blocks, &cfg2.spatial_blocks}) {
    for (auto& b : *stack) b.heads = 3;
  }
  CHECK_THROWS_AS(cfg2.validate(), ConfigError);

  ModelConfig cfg3 = tiny_config(DecoderKind::projection, 0);
  cfg3.dropout = 1.0;
  for (auto* stack : {&cfg3.temporal_blocks, &cfg3.spatial_blocks}) {
    for (auto& b : *stack) b.dropout = 1.0;
  }
  CHECK_THROWS_AS(cfg3.validate(), ConfigError);

  ModelConfig cfg4 = tiny_config(DecoderKind::projection, 0);
  cfg4.spatial_blocks[0].kind = BlockKind::temporal_attention;
  CHECK_THROWS_AS(cfg4.validate(), ConfigError);

  ModelConfig cfg5 = tiny_config(DecoderKind::projection, 0);
  cfg5.decoder_blocks.push_back(cfg5.temporal_blocks[0]);
  CHECK_THROWS_AS(cfg5.validate(), ConfigError);
}
