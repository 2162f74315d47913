#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ramtsf/checkpoint.hpp"
#include "ramtsf/cost.hpp"
#include "ramtsf/errors.hpp"
#include "ramtsf/experiment.hpp"
#include "ramtsf/gradcheck.hpp"
#include "ramtsf/lemma.hpp"
#include "ramtsf/prune.hpp"
#include "ramtsf/report.hpp"
#include "ramtsf/synth.hpp"
#include "ramtsf/trainer.hpp"

namespace {

using namespace ramtsf;
using nlohmann::json;

void emit_error(const std::string& type, const std::string& message) {
  json j;
  j["error"] = json{{"type", type}, {"message", message}};
  std::fprintf(stderr, "%s\n", j.dump().c_str());
}

// Exit codes: 0 ok, 2 usage/config, 3 I/O, 4 numeric failure (non-finite
// values, failed gradient/degeneration sweeps), 5 other domain errors.
int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    emit_error("config", e.what());
    return 2;
  } catch (const IoError& e) {
    emit_error("io", e.what());
    return 3;
  } catch (const NotFiniteError& e) {
    emit_error("not_finite", e.what());
    return 4;
  } catch (const Error& e) {
    emit_error("domain", e.what());
    return 5;
  } catch (const std::exception& e) {
    emit_error("internal", e.what());
    return 5;
  }
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

int64_t parse_int(const std::string& text) {
  try {
    size_t pos = 0;
    int64_t v = std::stoll(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("not an integer: '" + text + "'");
  }
}

// "1..64", a single value, or a comma list.
std::vector<int64_t> parse_lengths(const std::string& text) {
  auto dots = text.find("..");
  if (dots != std::string::npos) {
    int64_t lo = parse_int(text.substr(0, dots));
    int64_t hi = parse_int(text.substr(dots + 2));
    if (lo > hi) throw ConfigError("empty range '" + text + "'");
    std::vector<int64_t> out;
    for (int64_t v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  std::vector<int64_t> out;
  for (const auto& tok : split_commas(text)) out.push_back(parse_int(tok));
  return out;
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  for (const auto& tok : split_commas(text)) {
    try {
      size_t pos = 0;
      out.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + tok + "'");
    }
  }
  return out;
}

std::vector<uint64_t> parse_seeds(const std::string& text) {
  std::vector<uint64_t> out;
  for (const auto& tok : split_commas(text)) {
    int64_t v = parse_int(tok);
    if (v < 0) throw ConfigError("seeds must be non-negative");
    out.push_back(static_cast<uint64_t>(v));
  }
  return out;
}

PruneSpec parse_prune_spec(const std::string& scope, bool drop_ffn, bool drop_res,
                           bool drop_ln) {
  PruneSpec spec;
  if (scope == "all") {
    spec = PruneSpec::all();
  } else {
    for (const auto& tok : split_commas(scope)) {
      if (tok == "temporal") {
        spec.encoder_temporal = true;
      } else if (tok == "spatial") {
        spec.encoder_spatial = true;
      } else if (tok == "decoder") {
        spec.decoder = true;
      } else {
        throw ConfigError("unknown prune scope '" + tok +
                          "' (want temporal, spatial, decoder or all)");
      }
    }
  }
  spec.keep_feedforward = !drop_ffn;
  spec.keep_residual = !drop_res;
  spec.keep_layernorm = !drop_ln;
  return spec;
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "'");
}

std::string dataset_label(const DataConfig& dc) {
  switch (dc.source) {
    case DataSource::csv:
      return dc.path;
    case DataSource::synth_stf_series:
      return "synth_stf:seed=" + std::to_string(dc.stf.seed);
    case DataSource::synth_ltsf_series:
      return "synth_ltsf:seed=" + std::to_string(dc.ltsf.seed);
  }
  return "?";
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

struct SynthArgs {
  std::string kind;
  std::string out;
  int64_t nodes = 16;
  int64_t channels = 7;
  int64_t steps = 0;          // 0: per-kind default
  int64_t steps_per_day = 0;  // 0: per-kind default
  uint64_t seed = 1;
  double noise = -1.0;  // <0: per-kind default
  double missing_rate = 0.0;
  double trend = 0.5;
};

int run_synth(const SynthArgs& a) {
  SeriesDataset ds;
  if (a.kind == "stf") {
    SynthStfConfig c;
    c.nodes = a.nodes;
    if (a.steps > 0) c.steps = a.steps;
    if (a.steps_per_day > 0) c.steps_per_day = a.steps_per_day;
    c.seed = a.seed;
    if (a.noise >= 0.0) c.noise = a.noise;
    c.missing_rate = a.missing_rate;
    ds = synth_stf(c);
  } else {
    SynthLtsfConfig c;
    c.channels = a.channels;
    if (a.steps > 0) c.steps = a.steps;
    if (a.steps_per_day > 0) c.steps_per_day = a.steps_per_day;
    c.seed = a.seed;
    if (a.noise >= 0.0) c.noise = a.noise;
    c.trend = a.trend;
    ds = synth_ltsf(c);
  }
  write_csv(ds, a.out);
  std::fprintf(stderr, "wrote %s: %lld steps x %lld series\n", a.out.c_str(),
               static_cast<long long>(ds.steps), static_cast<long long>(ds.nodes));
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string out_dir = ".";
  uint64_t seed = 0;
  bool seed_set = false;
  bool pruned = false;
};

int run_train(const TrainArgs& a) {
  ExperimentConfig ec = load_experiment(a.config);
  SeriesDataset ds = load_dataset(ec.data);
  ModelConfig mc = ec.model;
  std::vector<std::string> warnings;
  if (a.pruned) {
    if (!ec.has_prune) {
      throw ConfigError("--pruned needs a prune section in the experiment file");
    }
    mc = prune_config(ec.model, ec.prune, &warnings);
  }
  print_warnings(warnings);
  const uint64_t run_seed = a.seed_set ? a.seed : ec.train.seeds.front();
  mc.seed = run_seed;
  AmtsfmModel model(mc);
  TrainHistory history = train_model(model, ds, ec.train, run_seed);

  std::filesystem::create_directories(a.out_dir);
  const std::string ckpt_path = a.out_dir + "/model.ckpt";
  const std::string history_path = a.out_dir + "/history.csv";
  save_checkpoint(model, ckpt_path);
  write_history_csv(history, history_path);

  json j;
  j["schema_version"] = 1;
  j["kind"] = "train";
  j["experiment_hash"] = experiment_hash_hex(ec);
  j["config_hash"] = config_hash_hex(mc);
  j["dataset"] = dataset_label(ec.data);
  j["seed"] = run_seed;
  j["epochs"] = history.epochs.size();
  j["best_epoch"] = history.best_epoch;
  j["best_val_loss"] = history.best_val_loss;
  j["stopped_early"] = history.stopped_early;
  j["checkpoint"] = ckpt_path;
  j["history"] = history_path;
  std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

struct EvalArgs {
  std::string config;
  std::string checkpoint;
  std::string split = "test";
  std::string format = "text";
};

int run_eval(const EvalArgs& a) {
  ExperimentConfig ec = load_experiment(a.config);
  SeriesDataset ds = load_dataset(ec.data);
  auto model = load_checkpoint(a.checkpoint);
  Split split = parse_split(a.split);
  EvalReport report = evaluate_model(*model, ds, split, ec.train.loss,
                                     ec.data.original_scale_metrics);
  if (a.format == "json") {
    std::string text = eval_report_json(report, model->config(), model->config().seed,
                                        dataset_label(ec.data), split);
    std::fputs(text.c_str(), stdout);
  } else {
    std::fputs(eval_report_text(report).c_str(), stdout);
  }
  return 0;
}

struct PruneArgs {
  std::string checkpoint;
  std::string out;
  std::string scope = "all";
  bool drop_ffn = false;
  bool drop_res = false;
  bool drop_ln = false;
};

int run_prune(const PruneArgs& a) {
  PruneSpec spec = parse_prune_spec(a.scope, a.drop_ffn, a.drop_res, a.drop_ln);
  auto model = load_checkpoint(a.checkpoint);
  std::vector<std::string> warnings;
  auto pruned = prune_weights(*model, spec, &warnings);
  print_warnings(warnings);
  save_checkpoint(*pruned, a.out);
  CostReport cmp = compare_costs(model->config(), pruned->config());
  json j;
  j["schema_version"] = 1;
  j["kind"] = "prune";
  j["config_hash"] = config_hash_hex(model->config());
  j["pruned_config_hash"] = config_hash_hex(pruned->config());
  j["checkpoint"] = a.out;
  j["params"] = cmp.baseline_params;
  j["pruned_params"] = cmp.total_params;
  j["flops"] = cmp.baseline_flops;
  j["pruned_flops"] = cmp.total_flops;
  j["flops_drop_pct"] = cmp.flops_drop_pct;
  j["params_drop_pct"] = cmp.params_drop_pct;
  std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

struct CostArgs {
  std::string config;
  std::string reference;
  std::string prune_scope;
  bool drop_ffn = false;
  bool drop_res = false;
  bool drop_ln = false;
  std::string format = "text";
  int64_t batch = 1;
};

int run_cost(const CostArgs& a) {
  if (a.config.empty() == a.reference.empty()) {
    throw ConfigError("pass exactly one of --config and --reference");
  }
  ModelConfig mc;
  if (!a.reference.empty()) {
    if (a.reference == "stf") {
      mc = reference_stf_config();
    } else if (a.reference == "ltsf") {
      mc = reference_ltsf_config();
    } else {
      throw ConfigError("unknown reference '" + a.reference + "' (want stf or ltsf)");
    }
  } else {
    mc = load_experiment(a.config).model;
  }
  CostReport report = analytic_cost(mc, a.batch);
  if (!a.prune_scope.empty()) {
    PruneSpec spec = parse_prune_spec(a.prune_scope, a.drop_ffn, a.drop_res, a.drop_ln);
    std::vector<std::string> warnings;
    ModelConfig pruned = prune_config(mc, spec, &warnings);
    print_warnings(warnings);
    report = compare_costs(mc, pruned, a.batch);
  }
  if (a.format == "json") {
    std::fputs(cost_report_json(report).c_str(), stdout);
  } else {
    std::fputs(cost_report_text(report).c_str(), stdout);
  }
  return 0;
}

struct GridArgs {
  std::string config;
  std::string seeds;
  int64_t threads = 0;
  std::string format = "text";
};

TrainConfig grid_train_config(const ExperimentConfig& ec, const GridArgs& a) {
  TrainConfig tc = ec.train;
  if (!a.seeds.empty()) tc.seeds = parse_seeds(a.seeds);
  if (a.threads > 0) tc.threads = a.threads;
  tc.validate();
  return tc;
}

int run_compare(const GridArgs& a) {
  ExperimentConfig ec = load_experiment(a.config);
  SeriesDataset ds = load_dataset(ec.data);
  TrainConfig tc = grid_train_config(ec, a);
  PruneSpec spec = ec.has_prune ? ec.prune : PruneSpec::all();
  ComparisonReport report =
      run_comparison(ec.model, spec, ds, tc, ec.data.original_scale_metrics);
  if (a.format == "json") {
    std::fputs(comparison_report_json(report, dataset_label(ec.data)).c_str(), stdout);
  } else {
    std::fputs(comparison_table_text(report).c_str(), stdout);
  }
  return 0;
}

int run_ablate(const GridArgs& a) {
  ExperimentConfig ec = load_experiment(a.config);
  SeriesDataset ds = load_dataset(ec.data);
  TrainConfig tc = grid_train_config(ec, a);
  std::vector<VariantResult> variants =
      run_ablation(ec.model, ds, tc, ec.data.original_scale_metrics);
  if (a.format == "json") {
    std::fputs(ablation_json(variants, dataset_label(ec.data)).c_str(), stdout);
  } else if (a.format == "csv") {
    std::fputs(ablation_csv(variants).c_str(), stdout);
  } else {
    std::fputs(ablation_table_text(variants).c_str(), stdout);
  }
  return 0;
}

struct GradcheckArgs {
  int64_t seeds = 50;
  double tolerance = 1e-4;
  double step = 1e-5;
};

int run_gradcheck(const GradcheckArgs& a) {
  GradCheckReport report = run_gradcheck_suite(a.seeds, a.tolerance, a.step);
  std::fputs(gradcheck_report_text(report).c_str(), stdout);
  return report.passed ? 0 : 4;
}

struct LemmaArgs {
  std::string lengths = "1..64";
  std::string betas = "0.1,1,10";
  double tolerance = 1e-12;
  uint64_t seed = 1;
};

int run_lemma(const LemmaArgs& a) {
  LemmaReport report =
      run_lemma_suite(parse_lengths(a.lengths), parse_doubles(a.betas), a.seed, a.tolerance);
  std::fputs(lemma_report_text(report).c_str(), stdout);
  return report.passed ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attention forecasting model, MLP block replacement and cost accounting"};
  app.require_subcommand(1);
  int rc = 0;

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic CSV dataset");
  synth_cmd->add_option("--kind", synth_args.kind, "dataset family")
      ->required()
      ->check(CLI::IsMember({"stf", "ltsf"}));
  synth_cmd->add_option("--out", synth_args.out, "output CSV path")->required();
  synth_cmd->add_option("--nodes", synth_args.nodes, "sensor count (stf)");
  synth_cmd->add_option("--channels", synth_args.channels, "channel count (ltsf)");
  synth_cmd->add_option("--steps", synth_args.steps, "series length");
  synth_cmd->add_option("--steps-per-day", synth_args.steps_per_day, "sampling rate");
  synth_cmd->add_option("--seed", synth_args.seed, "generator seed");
  synth_cmd->add_option("--noise", synth_args.noise, "noise standard deviation");
  synth_cmd->add_option("--missing-rate", synth_args.missing_rate,
                        "fraction of masked entries (stf)");
  synth_cmd->add_option("--trend", synth_args.trend, "drift strength (ltsf)");
  synth_cmd->callback([&] { rc = guarded([&] { return run_synth(synth_args); }); });

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train one model from an experiment file");
  train_cmd->add_option("--config", train_args.config, "experiment JSON")->required();
  train_cmd->add_option("--out-dir", train_args.out_dir, "checkpoint/history directory");
  auto* train_seed =
      train_cmd->add_option("--seed", train_args.seed, "override the first seed");
  train_cmd->add_flag("--pruned", train_args.pruned,
                      "apply the experiment's prune section before training");
  train_cmd->callback([&] {
    train_args.seed_set = train_seed->count() > 0;
    rc = guarded([&] { return run_train(train_args); });
  });

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  eval_cmd->add_option("--config", eval_args.config, "experiment JSON")->required();
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "model checkpoint")->required();
  eval_cmd->add_option("--split", eval_args.split, "train|val|test")
      ->check(CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_option("--format", eval_args.format, "text|json")
      ->check(CLI::IsMember({"text", "json"}));
  eval_cmd->callback([&] { rc = guarded([&] { return run_eval(eval_args); }); });

  PruneArgs prune_args;
  auto* prune_cmd =
      app.add_subcommand("prune", "rewrite a checkpoint with attention blocks replaced");
  prune_cmd->add_option("--checkpoint", prune_args.checkpoint, "input checkpoint")->required();
  prune_cmd->add_option("--out", prune_args.out, "output checkpoint")->required();
  prune_cmd->add_option("--scope", prune_args.scope,
                        "all or comma list of temporal,spatial,decoder");
  prune_cmd->add_flag("--drop-feedforward", prune_args.drop_ffn,
                      "rewrite without the feed-forward sublayer");
  prune_cmd->add_flag("--drop-residual", prune_args.drop_res,
                      "rewrite without residual connections");
  prune_cmd->add_flag("--drop-layernorm", prune_args.drop_ln, "rewrite without LayerNorm");
  prune_cmd->callback([&] { rc = guarded([&] { return run_prune(prune_args); }); });

  CostArgs cost_args;
  auto* cost_cmd = app.add_subcommand("cost", "analytic parameter/FLOP breakdown");
  cost_cmd->add_option("--config", cost_args.config, "experiment JSON");
  cost_cmd->add_option("--reference", cost_args.reference,
                       "built-in reference config (stf|ltsf)");
  cost_cmd->add_option("--prune", cost_args.prune_scope,
                       "also report the pruned config (all or scope list)");
  cost_cmd->add_flag("--drop-feedforward", cost_args.drop_ffn, "prune without feed-forward");
  cost_cmd->add_flag("--drop-residual", cost_args.drop_res, "prune without residuals");
  cost_cmd->add_flag("--drop-layernorm", cost_args.drop_ln, "prune without LayerNorm");
  cost_cmd->add_option("--format", cost_args.format, "text|json")
      ->check(CLI::IsMember({"text", "json"}));
  cost_cmd->add_option("--batch", cost_args.batch, "batch size multiplier")
      ->check(CLI::PositiveNumber);
  cost_cmd->callback([&] { rc = guarded([&] { return run_cost(cost_args); }); });

  GridArgs compare_args;
  auto* compare_cmd = app.add_subcommand(
      "compare", "train original vs pruned on shared seeds and tabulate");
  compare_cmd->add_option("--config", compare_args.config, "experiment JSON")->required();
  compare_cmd->add_option("--seeds", compare_args.seeds, "comma list overriding the seeds");
  compare_cmd->add_option("--threads", compare_args.threads, "worker threads");
  compare_cmd->add_option("--format", compare_args.format, "text|json")
      ->check(CLI::IsMember({"text", "json"}));
  compare_cmd->callback([&] { rc = guarded([&] { return run_compare(compare_args); }); });

  GridArgs ablate_args;
  auto* ablate_cmd =
      app.add_subcommand("ablate", "run the block-replacement ablation grid");
  ablate_cmd->add_option("--config", ablate_args.config, "experiment JSON")->required();
  ablate_cmd->add_option("--seeds", ablate_args.seeds, "comma list overriding the seeds");
  ablate_cmd->add_option("--threads", ablate_args.threads, "worker threads");
  ablate_cmd->add_option("--format", ablate_args.format, "text|csv|json")
      ->check(CLI::IsMember({"text", "csv", "json"}));
  ablate_cmd->callback([&] { rc = guarded([&] { return run_ablate(ablate_args); }); });

  GradcheckArgs gradcheck_args;
  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gradcheck_cmd->add_option("--seeds", gradcheck_args.seeds, "random seeds to sweep")
      ->check(CLI::PositiveNumber);
  gradcheck_cmd->add_option("--tolerance", gradcheck_args.tolerance, "max relative error");
  gradcheck_cmd->add_option("--step", gradcheck_args.step, "finite-difference step");
  gradcheck_cmd->callback([&] { rc = guarded([&] { return run_gradcheck(gradcheck_args); }); });

  LemmaArgs lemma_args;
  auto* lemma_cmd =
      app.add_subcommand("lemma-check", "softmax degeneration sweep");
  lemma_cmd->add_option("--T", lemma_args.lengths, "lengths, e.g. 1..64 or 4,8");
  lemma_cmd->add_option("--beta", lemma_args.betas, "temperatures, comma list");
  lemma_cmd->add_option("--tolerance", lemma_args.tolerance, "max deviation");
  lemma_cmd->add_option("--seed", lemma_args.seed, "draw seed");
  lemma_cmd->callback([&] { rc = guarded([&] { return run_lemma(lemma_args); }); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    emit_error("usage", e.what());
    return 2;
  }
  return rc;
}
