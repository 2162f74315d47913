#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ramtsf/model.hpp"
#include "ramtsf/tensor.hpp"

namespace ramtsf {

enum class Split { train, val, test };

const char* split_name(Split s);

// How a CSV file maps onto a series: the named time column holds epoch
// seconds or "YYYY-MM-DD HH:MM:SS"; every other column is one node (C=1).
// Values equal to `missing_sentinel` (exact comparison) and literal nan
// fields are flagged missing.
struct CsvLayout {
  std::string time_column = "timestamp";
  std::optional<double> missing_sentinel;
  int64_t steps_per_day = 288;
};

struct NormStats {
  std::vector<double> mean;    // per channel
  std::vector<double> stddev;  // per channel
};

// In-memory series: values[step][node][channel] row-major, a per
// step/node missing flag, per-step calendar indices, chronological split
// boundaries, and (after apply_zscore) the raw values plus the stats that
// produced the normalized ones.
struct SeriesDataset {
  int64_t steps = 0;
  int64_t nodes = 0;
  int64_t channels = 1;
  std::vector<double> values;
  std::vector<double> raw_values;  // equals `values` until normalization
  std::vector<uint8_t> missing;    // [steps, nodes], 1 = missing
  std::vector<int64_t> epoch_seconds;
  std::vector<int64_t> tod;
  std::vector<int64_t> dow;
  std::vector<std::string> node_names;
  int64_t steps_per_day = 288;
  int64_t train_end = 0;  // [0, train_end) train
  int64_t val_end = 0;    // [train_end, val_end) val, rest test
  bool normalized = false;
  NormStats stats;

  double value(int64_t step, int64_t node, int64_t ch) const {
    return values[static_cast<size_t>((step * nodes + node) * channels + ch)];
  }
  bool is_missing(int64_t step, int64_t node) const {
    return missing[static_cast<size_t>(step * nodes + node)] != 0;
  }
  void segment(Split s, int64_t& begin, int64_t& end) const;
  void validate() const;
};

// Chronological split with floor(ratio·steps) train/val rows and the
// remainder as test.
void set_splits(SeriesDataset& ds, double train_ratio, double val_ratio);

SeriesDataset load_csv(const std::string& path, const CsvLayout& layout);
void write_csv(const SeriesDataset& ds, const std::string& path);

// Per-channel standardization fit on unmasked training rows only. Throws
// DataError naming the channel when a training channel has zero variance.
NormStats fit_zscore(const SeriesDataset& ds);
SeriesDataset apply_zscore(const SeriesDataset& ds, const NormStats& stats);
double inverse_zscore_value(double v, const NormStats& stats, int64_t channel);
Tensor inverse_zscore(const Tensor& y, const NormStats& stats);  // [.., N, C]

struct WindowSample {
  Tensor x;      // [T, N, C], current scale
  Tensor y;      // [H, N, C], current scale
  Tensor y_raw;  // [H, N, C], original scale
  Calendar cal;  // T entries
  std::vector<uint8_t> x_missing;  // [T, N]
  std::vector<uint8_t> y_missing;  // [H, N]
  int64_t start = 0;  // absolute step index of x[0]
};

struct WindowSet {
  std::vector<WindowSample> samples;
  std::vector<std::string> warnings;
};

// All windows fully inside the split's segment: one per start offset,
// segment_len − T − H + 1 in total. A segment shorter than T+H yields an
// empty set with a warning.
WindowSet make_windows(const SeriesDataset& ds, Split split, int64_t lookback, int64_t horizon);

// Calendar helpers (epoch seconds are treated as UTC; day 0 is Monday).
int64_t tod_index(int64_t epoch, int64_t steps_per_day);
int64_t dow_index(int64_t epoch);
int64_t parse_timestamp(const std::string& text);  // epoch int or "YYYY-MM-DD HH:MM:SS"

}  // namespace ramtsf
