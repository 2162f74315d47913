#include "ramtsf/trainer.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include "ramtsf/cost.hpp"

namespace ramtsf {

const char* optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::adam ? "adam" : "sgd";
}

const char* loss_name(LossKind k) { return k == LossKind::masked_mae ? "masked_mae" : "mse"; }

void TrainConfig::validate() const {
  if (lr < 0.0) throw ConfigError("train: lr must be non-negative");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ConfigError("train: adam betas must lie in [0, 1)");
  }
  if (eps <= 0.0) throw ConfigError("train: adam eps must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train: momentum must lie in [0, 1)");
  if (batch_size < 1) throw ConfigError("train: batch_size must be at least 1");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be at least 1");
  if (patience < 1) throw ConfigError("train: patience must be at least 1");
  if (clip_norm < 0.0) throw ConfigError("train: clip_norm must be non-negative");
  if (seeds.empty()) throw ConfigError("train: seeds list is empty");
  if (threads < 1) throw ConfigError("train: threads must be at least 1");
}

Optimizer::Optimizer(AmtsfmModel& model, const TrainConfig& tc) : model_(model), tc_(tc) {
  tc_.validate();
  if (tc_.optimizer == OptimizerKind::adam) {
    for (const NamedParam& p : model_.parameters()) {
      m_.emplace_back(p.tensor.numel(), 0.0);
      v_.emplace_back(p.tensor.numel(), 0.0);
    }
  } else if (tc_.momentum > 0.0) {
    for (const NamedParam& p : model_.parameters()) {
      m_.emplace_back(p.tensor.numel(), 0.0);
    }
  }
}

double Optimizer::clip(double max_norm) {
  if (max_norm < 0.0) throw ValueError("clip: max_norm must be non-negative");
  double sq = 0.0;
  for (NamedParam& p : model_.parameters()) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) sq += g * g;
  }
  double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    double s = max_norm / norm;
    for (NamedParam& p : model_.parameters()) {
      if (!p.tensor.has_grad()) continue;
      for (double& g : p.tensor.mutable_grad()) g *= s;
    }
  }
  return norm;
}

void Optimizer::step() {
  ++t_;
  const double lr = tc_.lr;
  size_t pi = 0;
  for (NamedParam& p : model_.parameters()) {
    auto w = p.tensor.mutable_data();
    if (p.tensor.has_grad()) {
      auto g = p.tensor.grad();
      if (tc_.optimizer == OptimizerKind::adam) {
        std::vector<double>& m = m_[pi];
        std::vector<double>& v = v_[pi];
        double bc1 = 1.0 - std::pow(tc_.beta1, static_cast<double>(t_));
        double bc2 = 1.0 - std::pow(tc_.beta2, static_cast<double>(t_));
        for (size_t i = 0; i < w.size(); ++i) {
          m[i] = tc_.beta1 * m[i] + (1.0 - tc_.beta1) * g[i];
          v[i] = tc_.beta2 * v[i] + (1.0 - tc_.beta2) * g[i] * g[i];
          double mhat = m[i] / bc1;
          double vhat = v[i] / bc2;
          w[i] -= lr * mhat / (std::sqrt(vhat) + tc_.eps);
        }
      } else if (tc_.momentum > 0.0) {
        std::vector<double>& m = m_[pi];
        for (size_t i = 0; i < w.size(); ++i) {
          m[i] = tc_.momentum * m[i] + g[i];
          w[i] -= lr * m[i];
        }
      } else {
        for (size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
      }
    }
    ++pi;
  }
}

namespace {

std::vector<double> expand_mask(const std::vector<uint8_t>& missing, int64_t steps, int64_t nodes,
                                int64_t channels, int64_t& included) {
  std::vector<double> m(static_cast<size_t>(steps * nodes * channels), 0.0);
  included = 0;
  for (int64_t t = 0; t < steps; ++t) {
    for (int64_t n = 0; n < nodes; ++n) {
      if (missing[static_cast<size_t>(t * nodes + n)] != 0) continue;
      for (int64_t c = 0; c < channels; ++c) {
        m[static_cast<size_t>((t * nodes + n) * channels + c)] = 1.0;
      }
      included += channels;
    }
  }
  return m;
}

}  // namespace

Tensor sample_loss(AmtsfmModel& model, const WindowSample& w, RunMode mode, LossKind kind) {
  const ModelConfig& cfg = model.config();
  const Tensor* targets =
      (mode == RunMode::train && cfg.decoder_uses_autoregression()) ? &w.y : nullptr;
  Tensor yhat = model.forward(w.x, w.cal, mode, targets);
  int64_t included = 0;
  std::vector<double> mvals =
      expand_mask(w.y_missing, cfg.horizon, cfg.nodes, cfg.out_features, included);
  if (included == 0) {
    throw DataError("sample_loss: window at step " + std::to_string(w.start) +
                    " has no observed targets");
  }
  Tensor mask = Tensor::from_data(yhat.shape(), std::move(mvals));
  Tensor diff = sub(yhat, w.y);
  Tensor per_entry = kind == LossKind::masked_mae ? abs(diff) : mul(diff, diff);
  return scale(sum(mul(per_entry, mask)), 1.0 / static_cast<double>(included));
}

double evaluate_loss(AmtsfmModel& model, const std::vector<WindowSample>& windows,
                     LossKind kind) {
  if (windows.empty()) throw DataError("evaluate_loss: no windows");
  NoGradScope no_grad;
  double total = 0.0;
  for (const WindowSample& w : windows) {
    total += sample_loss(model, w, RunMode::eval, kind).item();
  }
  return total / static_cast<double>(windows.size());
}

TrainHistory train_model(AmtsfmModel& model, const SeriesDataset& ds, const TrainConfig& tc,
                         uint64_t run_seed) {
  tc.validate();
  const ModelConfig& cfg = model.config();
  WindowSet train_ws = make_windows(ds, Split::train, cfg.lookback, cfg.horizon);
  WindowSet val_ws = make_windows(ds, Split::val, cfg.lookback, cfg.horizon);
  if (train_ws.samples.empty()) throw DataError("train: no training windows");
  const bool has_val = !val_ws.samples.empty();

  Optimizer opt(model, tc);
  TrainHistory history;
  double best_val = 0.0;
  std::vector<std::vector<double>> best_params;
  auto snapshot = [&best_params, &model] {
    best_params.clear();
    for (const NamedParam& p : model.parameters()) {
      best_params.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    }
  };

  std::vector<size_t> order(train_ws.samples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  int64_t since_best = 0;
  for (int64_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    Rng shuffle_rng(Rng::mix(run_seed, 0xE00C + static_cast<uint64_t>(epoch)));
    std::iota(order.begin(), order.end(), size_t{0});
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    int64_t batch_index = 0;
    for (size_t at = 0; at < order.size(); at += static_cast<size_t>(tc.batch_size)) {
      ++batch_index;
      size_t stop = std::min(order.size(), at + static_cast<size_t>(tc.batch_size));
      double inv = 1.0 / static_cast<double>(stop - at);
      try {
        model.zero_grad();
        Tensor total;
        for (size_t k = at; k < stop; ++k) {
          Tensor contrib = scale(
              sample_loss(model, train_ws.samples[order[k]], RunMode::train, tc.loss), inv);
          total = total.defined() ? add(total, contrib) : contrib;
        }
        backward(total);
        if (tc.clip_norm > 0.0) opt.clip(tc.clip_norm);
        opt.step();
        loss_sum += total.item() * static_cast<double>(stop - at);
      } catch (const NotFiniteError& e) {
        throw NotFiniteError("train aborted at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index) + ": " + e.what());
      }
    }
    double train_loss = loss_sum / static_cast<double>(order.size());
    double val_loss = has_val ? evaluate_loss(model, val_ws.samples, tc.loss) : train_loss;
    history.epochs.push_back({epoch, train_loss, val_loss});

    if (history.best_epoch == 0 || val_loss < best_val) {
      best_val = val_loss;
      history.best_epoch = epoch;
      since_best = 0;
      snapshot();
    } else if (++since_best >= tc.patience) {
      history.stopped_early = true;
      break;
    }
  }
  history.best_val_loss = best_val;
  size_t pi = 0;
  for (NamedParam& p : model.parameters()) {
    auto w = p.tensor.mutable_data();
    std::copy(best_params[pi].begin(), best_params[pi].end(), w.begin());
    ++pi;
  }
  return history;
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError(path + ": cannot open for writing");
  f << "epoch,train_loss,val_loss\n";
  char buf[96];
  for (const EpochRecord& e : history.epochs) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g\n", static_cast<long long>(e.epoch),
                  e.train_loss, e.val_loss);
    f << buf;
  }
  if (!f) throw IoError(path + ": write failed");
}

EvalReport evaluate_with_predictor(const Predictor& predict,
                                   const std::vector<WindowSample>& windows,
                                   const SeriesDataset& ds, LossKind loss_kind,
                                   bool original_scale) {
  if (windows.empty()) throw DataError("evaluate: no windows in the requested split");
  const Tensor& probe = windows.front().y;
  const int64_t h = probe.size(0), n = probe.size(1), c = probe.size(2);
  MetricsAccumulator acc(h, n, c);
  double loss_total = 0.0;
  for (const WindowSample& w : windows) {
    Tensor yhat = predict(w);
    if (yhat.shape() != w.y.shape()) {
      throw ShapeError("evaluate: prediction shape " + shape_str(yhat.shape()) +
                       " does not match targets " + shape_str(w.y.shape()));
    }
    int64_t included = 0;
    std::vector<double> mvals = expand_mask(w.y_missing, h, n, c, included);
    if (included > 0) {
      double per = 0.0;
      auto yh = yhat.data();
      auto yv = w.y.data();
      for (size_t i = 0; i < mvals.size(); ++i) {
        if (mvals[i] == 0.0) continue;
        double d = yh[i] - yv[i];
        per += loss_kind == LossKind::masked_mae ? std::fabs(d) : d * d;
      }
      loss_total += per / static_cast<double>(included);
    }
    if (original_scale) {
      Tensor yos = ds.normalized ? inverse_zscore(yhat, ds.stats) : yhat;
      acc.add(yos.data(), w.y_raw.data(), w.y_missing);
    } else {
      acc.add(yhat.data(), w.y.data(), w.y_missing);
    }
  }
  EvalReport report;
  report.horizon = acc.finalize();
  if (h >= 12) report.slices = horizon_slices(report.horizon);
  report.loss = loss_total / static_cast<double>(windows.size());
  report.windows = static_cast<int64_t>(windows.size());
  report.original_scale = original_scale;
  return report;
}

EvalReport evaluate_model(AmtsfmModel& model, const SeriesDataset& ds, Split split,
                          LossKind loss_kind, bool original_scale) {
  const ModelConfig& cfg = model.config();
  WindowSet ws = make_windows(ds, split, cfg.lookback, cfg.horizon);
  NoGradScope no_grad;
  Predictor p = [&model](const WindowSample& w) {
    return model.forward(w.x, w.cal, RunMode::eval, nullptr);
  };
  return evaluate_with_predictor(p, ws.samples, ds, loss_kind, original_scale);
}

namespace {

MetricSummary summarize(const std::vector<double>& xs) {
  MetricSummary s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(xs.size()));
  return s;
}

}  // namespace

std::vector<VariantResult> run_grid(
    const std::vector<std::pair<std::string, ModelConfig>>& variants, const SeriesDataset& ds,
    const TrainConfig& tc, bool original_scale) {
  tc.validate();
  if (variants.empty()) throw ValueError("run_grid: no variants");
  struct Job {
    size_t variant;
    size_t seed_index;
  };
  std::vector<Job> jobs;
  for (size_t v = 0; v < variants.size(); ++v) {
    for (size_t s = 0; s < tc.seeds.size(); ++s) jobs.push_back({v, s});
  }
  std::vector<EvalReport> reports(jobs.size());
  std::vector<TrainHistory> histories(jobs.size());
  std::vector<std::string> failures(jobs.size());

  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      const Job& job = jobs[j];
      try {
        ModelConfig cfg = variants[job.variant].second;
        cfg.seed = tc.seeds[job.seed_index];
        AmtsfmModel model(cfg);
        histories[j] = train_model(model, ds, tc, cfg.seed);
        reports[j] = evaluate_model(model, ds, Split::test, tc.loss, original_scale);
      } catch (const std::exception& e) {
        failures[j] = e.what();
      }
    }
  };
  size_t n_threads = std::min(static_cast<size_t>(tc.threads), jobs.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (size_t j = 0; j < jobs.size(); ++j) {
    if (!failures[j].empty()) {
      throw Error("run_grid: variant \"" + variants[jobs[j].variant].first + "\" seed " +
                  std::to_string(tc.seeds[jobs[j].seed_index]) + " failed: " + failures[j]);
    }
  }

  std::vector<VariantResult> results;
  size_t j = 0;
  for (size_t v = 0; v < variants.size(); ++v) {
    VariantResult r;
    r.name = variants[v].first;
    r.cfg = variants[v].second;
    r.seeds = tc.seeds;
    std::vector<double> maes, rmses, mapes, mses;
    for (size_t s = 0; s < tc.seeds.size(); ++s, ++j) {
      r.per_seed.push_back(reports[j]);
      r.histories.push_back(histories[j]);
      maes.push_back(reports[j].horizon.mae_avg);
      rmses.push_back(reports[j].horizon.rmse_avg);
      mapes.push_back(reports[j].horizon.mape_avg);
      mses.push_back(reports[j].horizon.mse_avg);
    }
    r.mae_s = summarize(maes);
    r.rmse_s = summarize(rmses);
    r.mape_s = summarize(mapes);
    r.mse_s = summarize(mses);
    CostReport cost = analytic_cost(r.cfg);
    r.total_params = cost.total_params;
    r.total_flops = cost.total_flops;
    results.push_back(std::move(r));
  }
  return results;
}

ComparisonReport run_comparison(const ModelConfig& cfg, const PruneSpec& spec,
                                const SeriesDataset& ds, const TrainConfig& tc,
                                bool original_scale) {
  ModelConfig pruned_cfg = prune_config(cfg, spec);
  std::vector<std::pair<std::string, ModelConfig>> variants{{"Origin", cfg},
                                                            {"RAM", pruned_cfg}};
  std::vector<VariantResult> results = run_grid(variants, ds, tc, original_scale);
  ComparisonReport report;
  report.original = std::move(results[0]);
  report.pruned = std::move(results[1]);
  report.mae_improvement_pct =
      improvement_pct(report.original.mae_s.mean, report.pruned.mae_s.mean);
  report.rmse_improvement_pct =
      improvement_pct(report.original.rmse_s.mean, report.pruned.rmse_s.mean);
  report.mape_improvement_pct =
      improvement_pct(report.original.mape_s.mean, report.pruned.mape_s.mean);
  report.mse_improvement_pct =
      improvement_pct(report.original.mse_s.mean, report.pruned.mse_s.mean);
  report.flops_drop_pct = reduction_pct(static_cast<double>(report.original.total_flops),
                                        static_cast<double>(report.pruned.total_flops));
  report.params_drop_pct = reduction_pct(static_cast<double>(report.original.total_params),
                                         static_cast<double>(report.pruned.total_params));
  return report;
}

std::vector<VariantResult> run_ablation(const ModelConfig& cfg, const SeriesDataset& ds,
                                        const TrainConfig& tc, bool original_scale) {
  return run_grid(ablation_grid(cfg), ds, tc, original_scale);
}

}  // namespace ramtsf
