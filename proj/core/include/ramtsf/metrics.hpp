#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ramtsf/errors.hpp"

namespace ramtsf {

// Scalar metrics over flat buffers. `missing` flags entries to exclude
// (1 = excluded); pass an empty span to use everything. MAPE additionally
// skips zero targets. An empty surviving set is an error, never a silent 0.
double mae(std::span<const double> yhat, std::span<const double> y,
           std::span<const uint8_t> missing = {});
double mse(std::span<const double> yhat, std::span<const double> y,
           std::span<const uint8_t> missing = {});
double rmse(std::span<const double> yhat, std::span<const double> y,
            std::span<const uint8_t> missing = {});
double mape(std::span<const double> yhat, std::span<const double> y,
            std::span<const uint8_t> missing = {});

// Per-horizon-step accumulation across windows. Feed [H,N,C] prediction and
// target buffers with a [H,N] missing mask; finalize() yields per-step
// metrics plus their plain averages over the horizon.
class MetricsAccumulator {
 public:
  MetricsAccumulator(int64_t horizon, int64_t nodes, int64_t channels);

  void add(std::span<const double> yhat, std::span<const double> y,
           std::span<const uint8_t> missing);

  struct Result {
    std::vector<double> mae_h, rmse_h, mape_h, mse_h;  // one entry per step
    double mae_avg = 0.0, rmse_avg = 0.0, mape_avg = 0.0, mse_avg = 0.0;
  };

  Result finalize() const;  // throws DataError when a step has no valid entries

 private:
  int64_t horizon_, nodes_, channels_;
  std::vector<double> sum_abs_, sum_sq_, sum_ape_;
  std::vector<int64_t> count_, count_nz_;
};

// The short-horizon reporting slices: per-step metrics at steps 3, 6 and 12
// plus the horizon-wide averages. Requires a horizon of at least 12.
struct SliceRow {
  std::string label;
  double mae_v = 0.0, rmse_v = 0.0, mape_v = 0.0, mse_v = 0.0;
};

std::vector<SliceRow> horizon_slices(const MetricsAccumulator::Result& r);

// 100·(candidate − reference)/reference; positive means the candidate is
// worse. Matches the sign convention of the comparison tables.
double improvement_pct(double reference, double candidate);

}  // namespace ramtsf
