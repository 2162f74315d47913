#include "ramtsf/model.hpp"

#include <cmath>
#include <cstdio>
#include <utility>

#include "json_util.hpp"
#include "ramtsf/cost.hpp"

namespace ramtsf {

namespace {

using jsonutil::json;

const char* task_name(Task t) { return t == Task::stf ? "stf" : "ltsf"; }

const char* decoder_name(DecoderKind d) {
  return d == DecoderKind::attention ? "attention" : "projection";
}

const char* kind_name(BlockKind k) {
  switch (k) {
    case BlockKind::temporal_attention: return "temporal_attention";
    case BlockKind::spatial_attention: return "spatial_attention";
    case BlockKind::mlp: return "mlp";
  }
  return "mlp";
}

const char* placement_name(LnPlacement p) {
  return p == LnPlacement::after_residual ? "after_residual" : "before_residual";
}

BlockKind kind_from_name(const std::string& s, const std::string& where) {
  if (s == "temporal_attention") return BlockKind::temporal_attention;
  if (s == "spatial_attention") return BlockKind::spatial_attention;
  if (s == "mlp") return BlockKind::mlp;
  throw ConfigError(where + ": unknown block kind \"" + s + "\"");
}

// Stage wrappers keep the thrown type while prefixing the failing stage.
template <typename Fn>
auto with_stage(const char* name, Fn&& fn) -> decltype(fn()) {
  auto msg = [name](const char* what) { return std::string(name) + ": " + what; };
  try {
    return fn();
  } catch (const ShapeError& e) {
    throw ShapeError(msg(e.what()));
  } catch (const ValueError& e) {
    throw ValueError(msg(e.what()));
  } catch (const NotFiniteError& e) {
    throw NotFiniteError(msg(e.what()));
  } catch (const GraphError& e) {
    throw GraphError(msg(e.what()));
  } catch (const StateError& e) {
    throw StateError(msg(e.what()));
  } catch (const ConfigError& e) {
    throw ConfigError(msg(e.what()));
  }
}

void validate_block_spec(const ModelConfig& cfg, const BlockSpec& spec,
                         const std::string& where, bool spatial_stack) {
  if (spec.d_model != cfg.d_model || spec.d_ff != cfg.d_ff || spec.heads != cfg.heads ||
      spec.dropout != cfg.dropout || spec.ln_placement != cfg.ln_placement) {
    throw ConfigError(where + ": block widths must match the model-level settings");
  }
  if (spatial_stack) {
    if (spec.kind == BlockKind::temporal_attention) {
      throw ConfigError(where + ": temporal attention cannot sit in the spatial stack");
    }
  } else if (spec.kind == BlockKind::spatial_attention) {
    throw ConfigError(where + ": spatial attention cannot sit in a temporal stack");
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (lookback <= 0 || horizon <= 0 || nodes <= 0 || in_features <= 0 || out_features <= 0) {
    throw ConfigError("model: lookback/horizon/nodes/features must be positive");
  }
  if (d_model <= 0 || d_ff <= 0 || heads <= 0) {
    throw ConfigError("model: d_model/d_ff/heads must be positive");
  }
  if (d_model % heads != 0) {
    throw ConfigError("model: d_model must be divisible by the head count");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model: dropout must be in [0, 1)");
  if (embedding.steps_per_day <= 0) throw ConfigError("model: steps_per_day must be positive");
  for (size_t l = 0; l < temporal_blocks.size(); ++l) {
    validate_block_spec(*this, temporal_blocks[l], "temporal_blocks[" + std::to_string(l) + "]",
                        false);
  }
  for (size_t l = 0; l < spatial_blocks.size(); ++l) {
    validate_block_spec(*this, spatial_blocks[l], "spatial_blocks[" + std::to_string(l) + "]",
                        true);
  }
  for (size_t l = 0; l < decoder_blocks.size(); ++l) {
    validate_block_spec(*this, decoder_blocks[l], "decoder_blocks[" + std::to_string(l) + "]",
                        false);
  }
  if (decoder == DecoderKind::projection && !decoder_blocks.empty()) {
    throw ConfigError("model: a projection decoder carries no decoder blocks");
  }
}

bool ModelConfig::decoder_uses_autoregression() const {
  if (decoder != DecoderKind::attention) return false;
  if (decoder_blocks.empty()) return true;
  for (const BlockSpec& b : decoder_blocks) {
    if (b.kind != BlockKind::mlp) return true;
  }
  return false;
}

void populate_stacks(ModelConfig& cfg, int64_t l_t, int64_t l_s, int64_t k_dec) {
  if (l_t < 0 || l_s < 0 || k_dec < 0) throw ConfigError("populate_stacks: negative layer count");
  if (k_dec > 0 && cfg.decoder != DecoderKind::attention) {
    throw ConfigError("populate_stacks: decoder layers need an attention decoder");
  }
  auto mk = [&cfg](BlockKind kind) {
    BlockSpec s;
    s.kind = kind;
    s.use_feedforward = true;
    s.use_residual = true;
    s.use_layernorm = true;
    s.d_model = cfg.d_model;
    s.d_ff = cfg.d_ff;
    s.heads = cfg.heads;
    s.dropout = cfg.dropout;
    s.ln_placement = cfg.ln_placement;
    return s;
  };
  cfg.temporal_blocks.assign(static_cast<size_t>(l_t), mk(BlockKind::temporal_attention));
  cfg.spatial_blocks.assign(static_cast<size_t>(l_s), mk(BlockKind::spatial_attention));
  cfg.decoder_blocks.assign(static_cast<size_t>(k_dec), mk(BlockKind::temporal_attention));
}

ModelConfig reference_stf_config() {
  ModelConfig cfg;
  cfg.task = Task::stf;
  cfg.decoder = DecoderKind::projection;
  cfg.lookback = 12;
  cfg.horizon = 12;
  cfg.nodes = 307;
  cfg.in_features = 1;
  cfg.out_features = 1;
  cfg.d_model = 64;
  cfg.d_ff = 256;
  cfg.heads = 4;
  cfg.embedding = {true, true, true, 288};
  cfg.dropout = 0.1;
  cfg.seed = 1;
  populate_stacks(cfg, 3, 3, 0);
  return cfg;
}

ModelConfig reference_ltsf_config() {
  ModelConfig cfg;
  cfg.task = Task::ltsf;
  cfg.decoder = DecoderKind::projection;
  cfg.lookback = 96;
  cfg.horizon = 96;
  cfg.nodes = 7;
  cfg.in_features = 1;
  cfg.out_features = 1;
  cfg.d_model = 64;
  cfg.d_ff = 256;
  cfg.heads = 4;
  cfg.embedding = {true, true, true, 24};
  cfg.dropout = 0.1;
  cfg.seed = 1;
  populate_stacks(cfg, 2, 0, 0);
  return cfg;
}

namespace {

json block_to_json(const BlockSpec& spec) {
  json b;
  b["kind"] = kind_name(spec.kind);
  b["use_feedforward"] = spec.use_feedforward;
  b["use_residual"] = spec.use_residual;
  b["use_layernorm"] = spec.use_layernorm;
  return b;
}

BlockSpec block_from_json(const json& b, const ModelConfig& cfg, const std::string& where) {
  jsonutil::check_keys(b, where, {"kind", "use_feedforward", "use_residual", "use_layernorm"});
  BlockSpec s;
  s.kind = kind_from_name(jsonutil::get_string(b, where, "kind"), where);
  s.use_feedforward = jsonutil::get_bool(b, where, "use_feedforward");
  s.use_residual = jsonutil::get_bool(b, where, "use_residual");
  s.use_layernorm = jsonutil::get_bool(b, where, "use_layernorm");
  s.d_model = cfg.d_model;
  s.d_ff = cfg.d_ff;
  s.heads = cfg.heads;
  s.dropout = cfg.dropout;
  s.ln_placement = cfg.ln_placement;
  return s;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
  cfg.validate();
  json j;
  j["task"] = task_name(cfg.task);
  j["decoder"] = decoder_name(cfg.decoder);
  j["lookback"] = cfg.lookback;
  j["horizon"] = cfg.horizon;
  j["nodes"] = cfg.nodes;
  j["in_features"] = cfg.in_features;
  j["out_features"] = cfg.out_features;
  j["d_model"] = cfg.d_model;
  j["d_ff"] = cfg.d_ff;
  j["heads"] = cfg.heads;
  json tb = json::array(), sb = json::array(), db = json::array();
  for (const BlockSpec& b : cfg.temporal_blocks) tb.push_back(block_to_json(b));
  for (const BlockSpec& b : cfg.spatial_blocks) sb.push_back(block_to_json(b));
  for (const BlockSpec& b : cfg.decoder_blocks) db.push_back(block_to_json(b));
  j["temporal_blocks"] = std::move(tb);
  j["spatial_blocks"] = std::move(sb);
  j["decoder_blocks"] = std::move(db);
  j["embedding"] = {{"time_of_day", cfg.embedding.time_of_day},
                    {"day_of_week", cfg.embedding.day_of_week},
                    {"node", cfg.embedding.node},
                    {"steps_per_day", cfg.embedding.steps_per_day}};
  j["dropout"] = cfg.dropout;
  j["seed"] = cfg.seed;
  j["ln_placement"] = placement_name(cfg.ln_placement);
  j["interleave_encoder"] = cfg.interleave_encoder;
  return j.dump(2);
}

ModelConfig model_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: invalid JSON: ") + e.what());
  }
  jsonutil::check_keys(j, "model config",
                       {"task", "decoder", "lookback", "horizon", "nodes", "in_features",
                        "out_features", "d_model", "d_ff", "heads", "temporal_blocks",
                        "spatial_blocks", "decoder_blocks", "embedding", "dropout", "seed",
                        "ln_placement", "interleave_encoder"});
  ModelConfig cfg;
  std::string task = jsonutil::get_string(j, "model config", "task");
  if (task == "stf") {
    cfg.task = Task::stf;
  } else if (task == "ltsf") {
    cfg.task = Task::ltsf;
  } else {
    throw ConfigError("model config: unknown task \"" + task + "\"");
  }
  std::string dec = jsonutil::get_string(j, "model config", "decoder");
  if (dec == "attention") {
    cfg.decoder = DecoderKind::attention;
  } else if (dec == "projection") {
    cfg.decoder = DecoderKind::projection;
  } else {
    throw ConfigError("model config: unknown decoder \"" + dec + "\"");
  }
  cfg.lookback = jsonutil::get_i64(j, "model config", "lookback");
  cfg.horizon = jsonutil::get_i64(j, "model config", "horizon");
  cfg.nodes = jsonutil::get_i64(j, "model config", "nodes");
  cfg.in_features = jsonutil::get_i64(j, "model config", "in_features");
  cfg.out_features = jsonutil::get_i64(j, "model config", "out_features");
  cfg.d_model = jsonutil::get_i64(j, "model config", "d_model");
  cfg.d_ff = jsonutil::get_i64(j, "model config", "d_ff");
  cfg.heads = jsonutil::get_i64(j, "model config", "heads");
  cfg.dropout = jsonutil::get_double(j, "model config", "dropout");
  cfg.seed = jsonutil::get_u64(j, "model config", "seed");
  std::string lp = jsonutil::get_string(j, "model config", "ln_placement");
  if (lp == "after_residual") {
    cfg.ln_placement = LnPlacement::after_residual;
  } else if (lp == "before_residual") {
    cfg.ln_placement = LnPlacement::before_residual;
  } else {
    throw ConfigError("model config: unknown ln_placement \"" + lp + "\"");
  }
  cfg.interleave_encoder = jsonutil::get_bool(j, "model config", "interleave_encoder");
  const json& emb = j.at("embedding");
  jsonutil::check_keys(emb, "model config.embedding",
                       {"time_of_day", "day_of_week", "node", "steps_per_day"});
  cfg.embedding.time_of_day = jsonutil::get_bool(emb, "embedding", "time_of_day");
  cfg.embedding.day_of_week = jsonutil::get_bool(emb, "embedding", "day_of_week");
  cfg.embedding.node = jsonutil::get_bool(emb, "embedding", "node");
  cfg.embedding.steps_per_day = jsonutil::get_i64(emb, "embedding", "steps_per_day");
  auto parse_stack = [&cfg](const json& arr, const char* where) {
    if (!arr.is_array()) throw ConfigError(std::string(where) + ": expected an array");
    std::vector<BlockSpec> out;
    for (size_t i = 0; i < arr.size(); ++i) {
      out.push_back(block_from_json(arr[i], cfg, std::string(where) + "[" + std::to_string(i) + "]"));
    }
    return out;
  };
  cfg.temporal_blocks = parse_stack(j.at("temporal_blocks"), "temporal_blocks");
  cfg.spatial_blocks = parse_stack(j.at("spatial_blocks"), "spatial_blocks");
  cfg.decoder_blocks = parse_stack(j.at("decoder_blocks"), "decoder_blocks");
  cfg.validate();
  return cfg;
}

uint64_t config_hash(const ModelConfig& cfg) {
  return jsonutil::fnv1a64(model_config_to_json(cfg));
}

std::string config_hash_hex(const ModelConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

namespace {

constexpr int kInitXavier = 0;
constexpr int kInitZeros = 1;
constexpr int kInitOnes = 2;

}  // namespace

Tensor& AmtsfmModel::add_param(const std::string& name, Shape shape, int init_kind, Rng& rng) {
  if (index_.count(name)) throw StateError("duplicate parameter name: " + name);
  Tensor t = Tensor::zeros(shape, /*requires_grad=*/true);
  auto data = t.mutable_data();
  if (init_kind == kInitXavier) {
    int64_t fan_in = shape.size() >= 2 ? shape[0] : 1;
    int64_t fan_out = shape.size() >= 2 ? shape[1] : shape[0];
    double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : data) v = rng.uniform(-a, a);
  } else if (init_kind == kInitOnes) {
    for (double& v : data) v = 1.0;
  }
  index_[name] = params_.size();
  params_.push_back({name, t});
  return params_.back().tensor;
}

MhaParams AmtsfmModel::make_mha(const std::string& prefix, Rng& rng) {
  const int64_t d = cfg_.d_model;
  MhaParams p;
  p.heads = cfg_.heads;
  p.w_q = add_param(prefix + ".w_q", {d, d}, kInitXavier, rng);
  p.b_q = add_param(prefix + ".b_q", {d}, kInitZeros, rng);
  p.w_k = add_param(prefix + ".w_k", {d, d}, kInitXavier, rng);
  p.b_k = add_param(prefix + ".b_k", {d}, kInitZeros, rng);
  p.w_v = add_param(prefix + ".w_v", {d, d}, kInitXavier, rng);
  p.b_v = add_param(prefix + ".b_v", {d}, kInitZeros, rng);
  p.w_o = add_param(prefix + ".w_o", {d, d}, kInitXavier, rng);
  p.b_o = add_param(prefix + ".b_o", {d}, kInitZeros, rng);
  return p;
}

BlockParams AmtsfmModel::make_block_params(const std::string& prefix, const BlockSpec& spec,
                                           bool is_decoder, Rng& rng) {
  const int64_t d = cfg_.d_model, f = cfg_.d_ff;
  BlockParams p;
  bool attention = spec.kind != BlockKind::mlp;
  if (attention) p.attn = make_mha(prefix + (is_decoder ? ".self" : ".attn"), rng);
  if (is_decoder && attention) p.cross = make_mha(prefix + ".cross", rng);
  if (spec.use_feedforward) {
    p.w_f = add_param(prefix + ".ffn.w_f", {d, f}, kInitXavier, rng);
    p.b_f = add_param(prefix + ".ffn.b_f", {f}, kInitZeros, rng);
    p.w_b = add_param(prefix + ".ffn.w_b", {f, d}, kInitXavier, rng);
    p.b_b = add_param(prefix + ".ffn.b_b", {d}, kInitZeros, rng);
  }
  if (spec.use_layernorm) {
    p.ln1_g = add_param(prefix + ".ln1.g", {d}, kInitOnes, rng);
    p.ln1_b = add_param(prefix + ".ln1.b", {d}, kInitZeros, rng);
    if (is_decoder && attention) {
      p.ln3_g = add_param(prefix + ".ln3.g", {d}, kInitOnes, rng);
      p.ln3_b = add_param(prefix + ".ln3.b", {d}, kInitZeros, rng);
    }
    if (spec.use_feedforward) {
      p.ln2_g = add_param(prefix + ".ln2.g", {d}, kInitOnes, rng);
      p.ln2_b = add_param(prefix + ".ln2.b", {d}, kInitZeros, rng);
    }
  }
  return p;
}

AmtsfmModel::AmtsfmModel(ModelConfig cfg)
    : cfg_(std::move(cfg)), dropout_rng_(0) {
  cfg_.validate();
  Rng init_rng(Rng::mix(cfg_.seed, 0x1A17));
  dropout_rng_ = Rng(Rng::mix(cfg_.seed, 0xD0));

  const int64_t d = cfg_.d_model;
  w_in_ = add_param("embed.w_in", {cfg_.in_features, d}, kInitXavier, init_rng);
  b_in_ = add_param("embed.b_in", {d}, kInitZeros, init_rng);
  if (cfg_.embedding.time_of_day) {
    tod_table_ = add_param("embed.tod", {cfg_.embedding.steps_per_day, d}, kInitXavier, init_rng);
  }
  if (cfg_.embedding.day_of_week) {
    dow_table_ = add_param("embed.dow", {7, d}, kInitXavier, init_rng);
  }
  if (cfg_.embedding.node) {
    node_table_ = add_param("embed.node", {cfg_.nodes, d}, kInitXavier, init_rng);
  }

  for (size_t l = 0; l < cfg_.temporal_blocks.size(); ++l) {
    temporal_params_.push_back(make_block_params("encoder.temporal" + std::to_string(l),
                                                 cfg_.temporal_blocks[l], false, init_rng));
  }
  for (size_t l = 0; l < cfg_.spatial_blocks.size(); ++l) {
    spatial_params_.push_back(make_block_params("encoder.spatial" + std::to_string(l),
                                                cfg_.spatial_blocks[l], false, init_rng));
  }

  const bool autoreg = cfg_.decoder_uses_autoregression();
  if (cfg_.decoder == DecoderKind::attention) {
    if (autoreg) {
      dec_.start = add_param("decoder.start", {d}, kInitXavier, init_rng);
      dec_.w_in = add_param("decoder.w_in", {cfg_.out_features, d}, kInitXavier, init_rng);
      dec_.b_in = add_param("decoder.b_in", {d}, kInitZeros, init_rng);
    } else {
      dec_.time_proj = add_param("decoder.time_proj", {cfg_.lookback, cfg_.horizon},
                                 kInitXavier, init_rng);
    }
    for (size_t l = 0; l < cfg_.decoder_blocks.size(); ++l) {
      decoder_params_.push_back(make_block_params("decoder.block" + std::to_string(l),
                                                  cfg_.decoder_blocks[l], true, init_rng));
    }
    dec_.w_out = add_param("decoder.w_out", {d, cfg_.out_features}, kInitXavier, init_rng);
    dec_.b_out = add_param("decoder.b_out", {cfg_.out_features}, kInitZeros, init_rng);
  } else {
    dec_.time_proj = add_param("decoder.time_proj", {cfg_.lookback, cfg_.horizon},
                               kInitXavier, init_rng);
    dec_.w_out = add_param("decoder.w_out", {d, cfg_.out_features}, kInitXavier, init_rng);
    dec_.b_out = add_param("decoder.b_out", {cfg_.out_features}, kInitZeros, init_rng);
  }

  int64_t expected = analytic_param_count(cfg_);
  if (parameter_count() != expected) {
    throw StateError("parameter registry (" + std::to_string(parameter_count()) +
                     ") does not match the analytic count (" + std::to_string(expected) + ")");
  }
}

Tensor* AmtsfmModel::find_parameter(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) return nullptr;
  return &params_[it->second].tensor;
}

const Tensor* AmtsfmModel::find_parameter(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return nullptr;
  return &params_[it->second].tensor;
}

int64_t AmtsfmModel::parameter_count() const {
  int64_t n = 0;
  for (const NamedParam& p : params_) n += p.tensor.numel();
  return n;
}

void AmtsfmModel::zero_grad() {
  for (NamedParam& p : params_) p.tensor.zero_grad();
}

Tensor AmtsfmModel::embed(const Tensor& x, const Calendar& cal) {
  const int64_t t = cfg_.lookback, n = cfg_.nodes, c = cfg_.in_features, d = cfg_.d_model;
  if (x.dim() != 3 || x.size(0) != t || x.size(1) != n || x.size(2) != c) {
    throw ShapeError("embed: input must be [" + std::to_string(t) + "," + std::to_string(n) + "," +
                     std::to_string(c) + "], got " + shape_str(x.shape()));
  }
  Tensor e = linear(reshape(x, {t * n, c}), w_in_, b_in_);
  if (cfg_.embedding.time_of_day) {
    if (static_cast<int64_t>(cal.tod.size()) != t) {
      throw ValueError("embed: time-of-day calendar must have one entry per input step");
    }
    std::vector<int64_t> idx(static_cast<size_t>(t * n));
    for (int64_t tt = 0; tt < t; ++tt) {
      int64_t v = cal.tod[static_cast<size_t>(tt)];
      if (v < 0 || v >= cfg_.embedding.steps_per_day) {
        throw ValueError("embed: time-of-day index out of range");
      }
      for (int64_t nn = 0; nn < n; ++nn) idx[static_cast<size_t>(tt * n + nn)] = v;
    }
    e = add(e, gather_rows(tod_table_, idx));
  }
  if (cfg_.embedding.day_of_week) {
    if (static_cast<int64_t>(cal.dow.size()) != t) {
      throw ValueError("embed: day-of-week calendar must have one entry per input step");
    }
    std::vector<int64_t> idx(static_cast<size_t>(t * n));
    for (int64_t tt = 0; tt < t; ++tt) {
      int64_t v = cal.dow[static_cast<size_t>(tt)];
      if (v < 0 || v >= 7) throw ValueError("embed: day-of-week index out of range");
      for (int64_t nn = 0; nn < n; ++nn) idx[static_cast<size_t>(tt * n + nn)] = v;
    }
    e = add(e, gather_rows(dow_table_, idx));
  }
  if (cfg_.embedding.node) {
    std::vector<int64_t> idx(static_cast<size_t>(t * n));
    for (int64_t tt = 0; tt < t; ++tt) {
      for (int64_t nn = 0; nn < n; ++nn) idx[static_cast<size_t>(tt * n + nn)] = nn;
    }
    e = add(e, gather_rows(node_table_, idx));
  }
  return reshape(e, {t, n, d});
}

Tensor AmtsfmModel::run_temporal_layer(const Tensor& e, size_t layer, RunMode mode) {
  std::vector<Tensor> parts = split(e, SplitAxis::node);
  std::vector<Tensor> outs;
  outs.reserve(parts.size());
  for (Tensor& part : parts) {
    outs.push_back(run_block(part, cfg_.temporal_blocks[layer], temporal_params_[layer], mode,
                             dropout_rng_));
  }
  return stack(outs, SplitAxis::node);
}

Tensor AmtsfmModel::run_spatial_layer(const Tensor& e, size_t layer, RunMode mode) {
  std::vector<Tensor> parts = split(e, SplitAxis::time);
  std::vector<Tensor> outs;
  outs.reserve(parts.size());
  for (Tensor& part : parts) {
    outs.push_back(run_block(part, cfg_.spatial_blocks[layer], spatial_params_[layer], mode,
                             dropout_rng_));
  }
  return stack(outs, SplitAxis::time);
}

Tensor AmtsfmModel::encode(const Tensor& e, RunMode mode) {
  if (e.dim() != 3 || e.size(0) != cfg_.lookback || e.size(1) != cfg_.nodes ||
      e.size(2) != cfg_.d_model) {
    throw ShapeError("encode: expected [T,N,d_model], got " + shape_str(e.shape()));
  }
  Tensor z = e;
  if (cfg_.interleave_encoder) {
    size_t rounds = std::max(cfg_.temporal_blocks.size(), cfg_.spatial_blocks.size());
    for (size_t l = 0; l < rounds; ++l) {
      if (l < cfg_.temporal_blocks.size()) z = run_temporal_layer(z, l, mode);
      if (l < cfg_.spatial_blocks.size()) z = run_spatial_layer(z, l, mode);
    }
  } else {
    for (size_t l = 0; l < cfg_.temporal_blocks.size(); ++l) z = run_temporal_layer(z, l, mode);
    for (size_t l = 0; l < cfg_.spatial_blocks.size(); ++l) z = run_spatial_layer(z, l, mode);
  }
  return z;
}

Tensor AmtsfmModel::decode_projection(const Tensor& z) {
  Tensor tp = transpose(dec_.time_proj);  // [H, T]
  std::vector<Tensor> parts = split(z, SplitAxis::node);
  std::vector<Tensor> outs;
  outs.reserve(parts.size());
  for (Tensor& zn : parts) {
    outs.push_back(linear(matmul(tp, zn), dec_.w_out, dec_.b_out));
  }
  return stack(outs, SplitAxis::node);
}

Tensor AmtsfmModel::decode_mlp(const Tensor& z, RunMode mode) {
  Tensor tp = transpose(dec_.time_proj);
  std::vector<Tensor> parts = split(z, SplitAxis::node);
  std::vector<Tensor> outs;
  outs.reserve(parts.size());
  for (Tensor& zn : parts) {
    Tensor y = matmul(tp, zn);
    for (size_t l = 0; l < cfg_.decoder_blocks.size(); ++l) {
      y = resnormffn_block(y, cfg_.decoder_blocks[l], decoder_params_[l], mode, dropout_rng_);
    }
    outs.push_back(linear(y, dec_.w_out, dec_.b_out));
  }
  return stack(outs, SplitAxis::node);
}

Tensor AmtsfmModel::decoder_stack(const Tensor& y0, const Tensor& memory, RunMode mode) {
  Tensor y = y0;
  for (size_t l = 0; l < cfg_.decoder_blocks.size(); ++l) {
    const BlockSpec& spec = cfg_.decoder_blocks[l];
    if (spec.kind == BlockKind::mlp) {
      y = resnormffn_block(y, spec, decoder_params_[l], mode, dropout_rng_);
    } else {
      y = decoder_attention_block(y, memory, spec, decoder_params_[l], mode, dropout_rng_);
    }
  }
  return y;
}

Tensor AmtsfmModel::decode_attention(const Tensor& z, const Tensor* targets, bool teacher,
                                     RunMode mode) {
  const int64_t h = cfg_.horizon, n = cfg_.nodes, c_out = cfg_.out_features;
  std::vector<Tensor> memory = split(z, SplitAxis::node);
  Tensor start_row = reshape(dec_.start, {1, cfg_.d_model});
  std::vector<Tensor> outs;
  outs.reserve(static_cast<size_t>(n));
  if (teacher) {
    if (targets == nullptr) throw ValueError("decode: teacher forcing needs targets");
    if (targets->dim() != 3 || targets->size(0) != h || targets->size(1) != n ||
        targets->size(2) != c_out) {
      throw ShapeError("decode: targets must be [H,N,out_features], got " +
                       shape_str(targets->shape()));
    }
    std::vector<Tensor> tgt = split(*targets, SplitAxis::node);
    for (int64_t nn = 0; nn < n; ++nn) {
      Tensor y0;
      if (h > 1) {
        Tensor emb = linear(slice_rows(tgt[static_cast<size_t>(nn)], 0, h - 1), dec_.w_in,
                            dec_.b_in);
        std::vector<Tensor> rows{start_row, emb};
        y0 = concat_rows(rows);
      } else {
        y0 = start_row;
      }
      Tensor y = decoder_stack(y0, memory[static_cast<size_t>(nn)], mode);
      outs.push_back(linear(y, dec_.w_out, dec_.b_out));
    }
  } else {
    for (int64_t nn = 0; nn < n; ++nn) {
      Tensor prefix = start_row;
      std::vector<Tensor> rows;
      rows.reserve(static_cast<size_t>(h));
      for (int64_t step = 0; step < h; ++step) {
        Tensor y = decoder_stack(prefix, memory[static_cast<size_t>(nn)], mode);
        Tensor yrow = linear(slice_rows(y, step, 1), dec_.w_out, dec_.b_out);
        rows.push_back(yrow);
        if (step + 1 < h) {
          Tensor emb = linear(yrow, dec_.w_in, dec_.b_in);
          std::vector<Tensor> cat{prefix, emb};
          prefix = concat_rows(cat);
        }
      }
      outs.push_back(concat_rows(rows));
    }
  }
  return stack(outs, SplitAxis::node);
}

Tensor AmtsfmModel::decode(const Tensor& z, RunMode mode, const Tensor* targets) {
  if (z.dim() != 3 || z.size(0) != cfg_.lookback || z.size(1) != cfg_.nodes ||
      z.size(2) != cfg_.d_model) {
    throw ShapeError("decode: expected [T,N,d_model], got " + shape_str(z.shape()));
  }
  const bool autoreg = cfg_.decoder_uses_autoregression();
  if (autoreg) {
    if (mode == RunMode::train && targets == nullptr) {
      throw ValueError("decode: train mode needs teacher targets");
    }
    if (mode == RunMode::eval && targets != nullptr) {
      throw ValueError("decode: eval mode is autoregressive; drop the targets");
    }
    return decode_attention(z, targets, /*teacher=*/mode == RunMode::train, mode);
  }
  if (targets != nullptr) {
    throw ValueError("decode: this decoder takes no teacher targets");
  }
  if (cfg_.decoder == DecoderKind::projection) return decode_projection(z);
  return decode_mlp(z, mode);
}

Tensor AmtsfmModel::forward(const Tensor& x, const Calendar& cal, RunMode mode,
                            const Tensor* targets) {
  Tensor e = with_stage("embed", [&] { return embed(x, cal); });
  Tensor z = with_stage("encode", [&] { return encode(e, mode); });
  return with_stage("decode", [&] { return decode(z, mode, targets); });
}

Tensor AmtsfmModel::cost_probe_forward(const Tensor& x, const Calendar& cal) {
  Tensor e = with_stage("embed", [&] { return embed(x, cal); });
  Tensor z = with_stage("encode", [&] { return encode(e, RunMode::eval); });
  return with_stage("decode", [&] {
    if (cfg_.decoder_uses_autoregression()) {
      Tensor zeros = Tensor::zeros({cfg_.horizon, cfg_.nodes, cfg_.out_features});
      return decode_attention(z, &zeros, /*teacher=*/true, RunMode::eval);
    }
    return decode(z, RunMode::eval, nullptr);
  });
}

}  // namespace ramtsf
