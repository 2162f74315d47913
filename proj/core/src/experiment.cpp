#include "ramtsf/experiment.hpp"

#include <cstdio>
#include <fstream>

#include "json_util.hpp"

namespace ramtsf {

namespace {

using jsonutil::json;

json train_to_json(const TrainConfig& tc) {
  json j;
  j["optimizer"] = optimizer_name(tc.optimizer);
  j["lr"] = tc.lr;
  j["beta1"] = tc.beta1;
  j["beta2"] = tc.beta2;
  j["eps"] = tc.eps;
  j["momentum"] = tc.momentum;
  j["batch_size"] = tc.batch_size;
  j["max_epochs"] = tc.max_epochs;
  j["patience"] = tc.patience;
  j["clip_norm"] = tc.clip_norm;
  j["loss"] = loss_name(tc.loss);
  j["seeds"] = tc.seeds;
  j["threads"] = tc.threads;
  return j;
}

TrainConfig train_from_json(const json& j) {
  jsonutil::check_keys(j, "train", {},
                       {"optimizer", "lr", "beta1", "beta2", "eps", "momentum", "batch_size",
                        "max_epochs", "patience", "clip_norm", "loss", "seeds", "threads"});
  TrainConfig tc;
  if (j.contains("optimizer")) {
    std::string o = jsonutil::get_string(j, "train", "optimizer");
    if (o == "adam") {
      tc.optimizer = OptimizerKind::adam;
    } else if (o == "sgd") {
      tc.optimizer = OptimizerKind::sgd;
    } else {
      throw ConfigError("train: unknown optimizer \"" + o + "\"");
    }
  }
  if (j.contains("lr")) tc.lr = jsonutil::get_double(j, "train", "lr");
  if (j.contains("beta1")) tc.beta1 = jsonutil::get_double(j, "train", "beta1");
  if (j.contains("beta2")) tc.beta2 = jsonutil::get_double(j, "train", "beta2");
  if (j.contains("eps")) tc.eps = jsonutil::get_double(j, "train", "eps");
  if (j.contains("momentum")) tc.momentum = jsonutil::get_double(j, "train", "momentum");
  if (j.contains("batch_size")) tc.batch_size = jsonutil::get_i64(j, "train", "batch_size");
  if (j.contains("max_epochs")) tc.max_epochs = jsonutil::get_i64(j, "train", "max_epochs");
  if (j.contains("patience")) tc.patience = jsonutil::get_i64(j, "train", "patience");
  if (j.contains("clip_norm")) tc.clip_norm = jsonutil::get_double(j, "train", "clip_norm");
  if (j.contains("loss")) {
    std::string l = jsonutil::get_string(j, "train", "loss");
    if (l == "masked_mae") {
      tc.loss = LossKind::masked_mae;
    } else if (l == "mse") {
      tc.loss = LossKind::mse;
    } else {
      throw ConfigError("train: unknown loss \"" + l + "\"");
    }
  }
  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    if (!s.is_array() || s.empty()) throw ConfigError("train.seeds: expected a non-empty array");
    tc.seeds.clear();
    for (const json& v : s) {
      if (!v.is_number_integer() && !v.is_number_unsigned()) {
        throw ConfigError("train.seeds: expected integers");
      }
      tc.seeds.push_back(v.get<uint64_t>());
    }
  }
  if (j.contains("threads")) tc.threads = jsonutil::get_i64(j, "train", "threads");
  tc.validate();
  return tc;
}

json data_to_json(const DataConfig& dc) {
  json j;
  switch (dc.source) {
    case DataSource::csv:
      j["source"] = "csv";
      j["path"] = dc.path;
      j["time_column"] = dc.layout.time_column;
      if (dc.layout.missing_sentinel.has_value()) {
        j["missing_sentinel"] = *dc.layout.missing_sentinel;
      }
      j["steps_per_day"] = dc.layout.steps_per_day;
      break;
    case DataSource::synth_stf_series:
      j["source"] = "synth_stf";
      j["nodes"] = dc.stf.nodes;
      j["steps"] = dc.stf.steps;
      j["seed"] = dc.stf.seed;
      j["noise"] = dc.stf.noise;
      j["steps_per_day"] = dc.stf.steps_per_day;
      j["radius"] = dc.stf.radius;
      j["missing_rate"] = dc.stf.missing_rate;
      break;
    case DataSource::synth_ltsf_series:
      j["source"] = "synth_ltsf";
      j["channels"] = dc.ltsf.channels;
      j["steps"] = dc.ltsf.steps;
      j["seed"] = dc.ltsf.seed;
      j["noise"] = dc.ltsf.noise;
      j["steps_per_day"] = dc.ltsf.steps_per_day;
      j["trend"] = dc.ltsf.trend;
      break;
  }
  j["train_ratio"] = dc.train_ratio;
  j["val_ratio"] = dc.val_ratio;
  j["normalize"] = dc.normalize;
  j["original_scale_metrics"] = dc.original_scale_metrics;
  return j;
}

DataConfig data_from_json(const json& j) {
  DataConfig dc;
  std::string source = jsonutil::get_string(j, "data", "source");
  if (source == "csv") {
    dc.source = DataSource::csv;
    jsonutil::check_keys(j, "data", {"source", "path"},
                         {"time_column", "missing_sentinel", "steps_per_day", "train_ratio",
                          "val_ratio", "normalize", "original_scale_metrics"});
    dc.path = jsonutil::get_string(j, "data", "path");
    if (j.contains("time_column")) {
      dc.layout.time_column = jsonutil::get_string(j, "data", "time_column");
    }
    if (j.contains("missing_sentinel")) {
      dc.layout.missing_sentinel = jsonutil::get_double(j, "data", "missing_sentinel");
    }
    if (j.contains("steps_per_day")) {
      dc.layout.steps_per_day = jsonutil::get_i64(j, "data", "steps_per_day");
    }
  } else if (source == "synth_stf") {
    dc.source = DataSource::synth_stf_series;
    jsonutil::check_keys(j, "data", {"source"},
                         {"nodes", "steps", "seed", "noise", "steps_per_day", "radius",
                          "missing_rate", "train_ratio", "val_ratio", "normalize",
                          "original_scale_metrics"});
    if (j.contains("nodes")) dc.stf.nodes = jsonutil::get_i64(j, "data", "nodes");
    if (j.contains("steps")) dc.stf.steps = jsonutil::get_i64(j, "data", "steps");
    if (j.contains("seed")) dc.stf.seed = jsonutil::get_u64(j, "data", "seed");
    if (j.contains("noise")) dc.stf.noise = jsonutil::get_double(j, "data", "noise");
    if (j.contains("steps_per_day")) {
      dc.stf.steps_per_day = jsonutil::get_i64(j, "data", "steps_per_day");
    }
    if (j.contains("radius")) dc.stf.radius = jsonutil::get_double(j, "data", "radius");
    if (j.contains("missing_rate")) {
      dc.stf.missing_rate = jsonutil::get_double(j, "data", "missing_rate");
    }
  } else if (source == "synth_ltsf") {
    dc.source = DataSource::synth_ltsf_series;
    jsonutil::check_keys(j, "data", {"source"},
                         {"channels", "steps", "seed", "noise", "steps_per_day", "trend",
                          "train_ratio", "val_ratio", "normalize", "original_scale_metrics"});
    if (j.contains("channels")) dc.ltsf.channels = jsonutil::get_i64(j, "data", "channels");
    if (j.contains("steps")) dc.ltsf.steps = jsonutil::get_i64(j, "data", "steps");
    if (j.contains("seed")) dc.ltsf.seed = jsonutil::get_u64(j, "data", "seed");
    if (j.contains("noise")) dc.ltsf.noise = jsonutil::get_double(j, "data", "noise");
    if (j.contains("steps_per_day")) {
      dc.ltsf.steps_per_day = jsonutil::get_i64(j, "data", "steps_per_day");
    }
    if (j.contains("trend")) dc.ltsf.trend = jsonutil::get_double(j, "data", "trend");
  } else {
    throw ConfigError("data: unknown source \"" + source + "\"");
  }
  if (j.contains("train_ratio")) dc.train_ratio = jsonutil::get_double(j, "data", "train_ratio");
  if (j.contains("val_ratio")) dc.val_ratio = jsonutil::get_double(j, "data", "val_ratio");
  if (j.contains("normalize")) dc.normalize = jsonutil::get_bool(j, "data", "normalize");
  if (j.contains("original_scale_metrics")) {
    dc.original_scale_metrics = jsonutil::get_bool(j, "data", "original_scale_metrics");
  }
  return dc;
}

json prune_to_json(const PruneSpec& p) {
  json j;
  j["encoder_temporal"] = p.encoder_temporal;
  j["encoder_spatial"] = p.encoder_spatial;
  j["decoder"] = p.decoder;
  j["keep_feedforward"] = p.keep_feedforward;
  j["keep_residual"] = p.keep_residual;
  j["keep_layernorm"] = p.keep_layernorm;
  return j;
}

PruneSpec prune_from_json(const json& j) {
  jsonutil::check_keys(j, "prune", {},
                       {"encoder_temporal", "encoder_spatial", "decoder", "keep_feedforward",
                        "keep_residual", "keep_layernorm"});
  PruneSpec p;
  if (j.contains("encoder_temporal")) {
    p.encoder_temporal = jsonutil::get_bool(j, "prune", "encoder_temporal");
  }
  if (j.contains("encoder_spatial")) {
    p.encoder_spatial = jsonutil::get_bool(j, "prune", "encoder_spatial");
  }
  if (j.contains("decoder")) p.decoder = jsonutil::get_bool(j, "prune", "decoder");
  if (j.contains("keep_feedforward")) {
    p.keep_feedforward = jsonutil::get_bool(j, "prune", "keep_feedforward");
  }
  if (j.contains("keep_residual")) {
    p.keep_residual = jsonutil::get_bool(j, "prune", "keep_residual");
  }
  if (j.contains("keep_layernorm")) {
    p.keep_layernorm = jsonutil::get_bool(j, "prune", "keep_layernorm");
  }
  return p;
}

}  // namespace

SeriesDataset load_dataset(const DataConfig& dc) {
  if (!(dc.train_ratio > 0.0) || dc.val_ratio < 0.0 || dc.train_ratio + dc.val_ratio > 1.0) {
    throw ConfigError("data: need train_ratio > 0, val_ratio >= 0, sum <= 1");
  }
  SeriesDataset ds;
  switch (dc.source) {
    case DataSource::csv: ds = load_csv(dc.path, dc.layout); break;
    case DataSource::synth_stf_series: ds = synth_stf(dc.stf); break;
    case DataSource::synth_ltsf_series: ds = synth_ltsf(dc.ltsf); break;
  }
  set_splits(ds, dc.train_ratio, dc.val_ratio);
  if (dc.normalize) {
    NormStats stats = fit_zscore(ds);
    ds = apply_zscore(ds, stats);
  }
  return ds;
}

std::string experiment_to_json(const ExperimentConfig& ec) {
  json j;
  j["schema_version"] = ec.schema_version;
  j["model"] = json::parse(model_config_to_json(ec.model));
  j["train"] = train_to_json(ec.train);
  j["data"] = data_to_json(ec.data);
  if (ec.has_prune) j["prune"] = prune_to_json(ec.prune);
  return j.dump(2);
}

ExperimentConfig experiment_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment: invalid JSON: ") + e.what());
  }
  jsonutil::check_keys(j, "experiment", {"schema_version", "model", "train", "data"}, {"prune"});
  ExperimentConfig ec;
  ec.schema_version = jsonutil::get_i64(j, "experiment", "schema_version");
  if (ec.schema_version != 1) {
    throw ConfigError("experiment: unsupported schema_version " +
                      std::to_string(ec.schema_version));
  }
  ec.model = model_config_from_json(j.at("model").dump());
  ec.train = train_from_json(j.at("train"));
  ec.data = data_from_json(j.at("data"));
  if (j.contains("prune")) {
    ec.prune = prune_from_json(j.at("prune"));
    ec.has_prune = true;
  }
  return ec;
}

ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError(path + ": cannot open for reading");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return experiment_from_json(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

uint64_t experiment_hash(const ExperimentConfig& ec) {
  return jsonutil::fnv1a64(experiment_to_json(ec));
}

std::string experiment_hash_hex(const ExperimentConfig& ec) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(experiment_hash(ec)));
  return std::string(buf);
}

}  // namespace ramtsf
