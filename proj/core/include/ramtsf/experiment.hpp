#pragma once

#include <string>

#include "ramtsf/dataset.hpp"
#include "ramtsf/prune.hpp"
#include "ramtsf/synth.hpp"
#include "ramtsf/trainer.hpp"

namespace ramtsf {

enum class DataSource { csv, synth_stf_series, synth_ltsf_series };

struct DataConfig {
  DataSource source = DataSource::csv;
  std::string path;       // csv
  CsvLayout layout;       // csv
  SynthStfConfig stf;     // synth_stf
  SynthLtsfConfig ltsf;   // synth_ltsf
  double train_ratio = 0.7;
  double val_ratio = 0.1;
  bool normalize = true;
  bool original_scale_metrics = true;
};

// Loads or generates the series, applies the chronological split and, when
// requested, train-fitted standardization.
SeriesDataset load_dataset(const DataConfig& dc);

// One experiment file: model + training + data (+ optional prune) sections
// in canonical JSON with strict unknown-key rejection. The content hash of
// the canonical form is embedded in every report for provenance.
struct ExperimentConfig {
  int64_t schema_version = 1;
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  PruneSpec prune;
  bool has_prune = false;
};

std::string experiment_to_json(const ExperimentConfig& ec);
ExperimentConfig experiment_from_json(const std::string& text);
ExperimentConfig load_experiment(const std::string& path);
uint64_t experiment_hash(const ExperimentConfig& ec);
std::string experiment_hash_hex(const ExperimentConfig& ec);

}  // namespace ramtsf
