#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ramtsf/dataset.hpp"
#include "ramtsf/metrics.hpp"
#include "ramtsf/model.hpp"
#include "ramtsf/prune.hpp"

namespace ramtsf {

enum class OptimizerKind { adam, sgd };
enum class LossKind { masked_mae, mse };

const char* optimizer_name(OptimizerKind k);
const char* loss_name(LossKind k);

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.0;  // sgd only
  int64_t batch_size = 32;
  int64_t max_epochs = 50;
  int64_t patience = 5;
  double clip_norm = 5.0;  // global L2 cap; 0 disables clipping
  LossKind loss = LossKind::masked_mae;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  int64_t threads = 1;

  void validate() const;
};

struct EpochRecord {
  int64_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int64_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

// Adam or momentum-SGD over the model's parameter registry, stepped in
// registry order so runs are reproducible.
class Optimizer {
 public:
  Optimizer(AmtsfmModel& model, const TrainConfig& tc);
  // Scales all gradients so their global L2 norm is at most max_norm;
  // returns the pre-clip norm.
  double clip(double max_norm);
  void step();

 private:
  AmtsfmModel& model_;
  TrainConfig tc_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Per-sample training loss on the current (normalized) scale, masked to
// observed targets. Autoregressive decoders are teacher-forced in train
// mode.
Tensor sample_loss(AmtsfmModel& model, const WindowSample& w, RunMode mode, LossKind kind);

// Mean per-sample loss over a window list in eval mode (no tape).
double evaluate_loss(AmtsfmModel& model, const std::vector<WindowSample>& windows,
                     LossKind kind);

// Mini-batch training with per-epoch reshuffling, optional gradient
// clipping, and early stopping on validation loss with best-parameter
// restore. The whole run is a pure function of (config seed, run_seed,
// dataset). When the validation segment yields no windows the train loss
// doubles as the early-stop signal. A non-finite value anywhere in a train
// step aborts with the epoch/batch in the message.
TrainHistory train_model(AmtsfmModel& model, const SeriesDataset& ds, const TrainConfig& tc,
                         uint64_t run_seed);

void write_history_csv(const TrainHistory& history, const std::string& path);

struct EvalReport {
  MetricsAccumulator::Result horizon;
  std::vector<SliceRow> slices;  // filled when the horizon has >= 12 steps
  double loss = 0.0;             // normalized-scale loss
  int64_t windows = 0;
  bool original_scale = true;
};

// Forward every window of the split in eval mode and score it. With
// original_scale the predictions are de-normalized and compared against raw
// targets; otherwise both sides stay on the normalized scale.
EvalReport evaluate_model(AmtsfmModel& model, const SeriesDataset& ds, Split split,
                          LossKind loss_kind, bool original_scale);

// Same scoring loop with an arbitrary prediction function; the seam the
// oracle tests use.
using Predictor = std::function<Tensor(const WindowSample&)>;
EvalReport evaluate_with_predictor(const Predictor& predict, const std::vector<WindowSample>& windows,
                                   const SeriesDataset& ds, LossKind loss_kind,
                                   bool original_scale);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population, over seeds
};

struct VariantResult {
  std::string name;
  ModelConfig cfg;
  std::vector<uint64_t> seeds;
  std::vector<EvalReport> per_seed;
  std::vector<TrainHistory> histories;
  MetricSummary mae_s, rmse_s, mape_s, mse_s;  // horizon-average metrics
  int64_t total_params = 0;
  int64_t total_flops = 0;
};

// Train + evaluate every (variant, seed) pair on the test split. Jobs run
// on tc.threads workers; results are identical to the sequential order.
std::vector<VariantResult> run_grid(
    const std::vector<std::pair<std::string, ModelConfig>>& variants, const SeriesDataset& ds,
    const TrainConfig& tc, bool original_scale);

struct ComparisonReport {
  VariantResult original;
  VariantResult pruned;
  double mae_improvement_pct = 0.0;  // positive = pruned worse
  double rmse_improvement_pct = 0.0;
  double mape_improvement_pct = 0.0;
  double mse_improvement_pct = 0.0;
  double flops_drop_pct = 0.0;
  double params_drop_pct = 0.0;
};

// Trains the config and its pruned-from-scratch counterpart on identical
// seeds and reports aggregate metrics, improvement percentages and the
// analytic cost reduction.
ComparisonReport run_comparison(const ModelConfig& cfg, const PruneSpec& spec,
                                const SeriesDataset& ds, const TrainConfig& tc,
                                bool original_scale);

// The full ablation sweep over ablation_grid(cfg).
std::vector<VariantResult> run_ablation(const ModelConfig& cfg, const SeriesDataset& ds,
                                        const TrainConfig& tc, bool original_scale);

}  // namespace ramtsf
