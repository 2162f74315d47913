#include "ramtsf/metrics.hpp"

#include <cmath>

namespace ramtsf {

namespace {

struct Sums {
  double abs_sum = 0.0, sq_sum = 0.0, ape_sum = 0.0;
  int64_t count = 0, count_nz = 0;
};

Sums accumulate(std::span<const double> yhat, std::span<const double> y,
                std::span<const uint8_t> missing) {
  if (yhat.size() != y.size()) throw ValueError("metrics: prediction/target size mismatch");
  if (!missing.empty() && missing.size() != y.size()) {
    throw ValueError("metrics: mask size mismatch");
  }
  Sums s;
  for (size_t i = 0; i < y.size(); ++i) {
    if (!missing.empty() && missing[i] != 0) continue;
    double d = yhat[i] - y[i];
    s.abs_sum += std::fabs(d);
    s.sq_sum += d * d;
    ++s.count;
    if (y[i] != 0.0) {
      s.ape_sum += std::fabs(d) / std::fabs(y[i]);
      ++s.count_nz;
    }
  }
  return s;
}

void require(int64_t count, const char* what) {
  if (count == 0) throw DataError(std::string(what) + ": no valid entries");
}

}  // namespace

double mae(std::span<const double> yhat, std::span<const double> y,
           std::span<const uint8_t> missing) {
  Sums s = accumulate(yhat, y, missing);
  require(s.count, "mae");
  return s.abs_sum / static_cast<double>(s.count);
}

double mse(std::span<const double> yhat, std::span<const double> y,
           std::span<const uint8_t> missing) {
  Sums s = accumulate(yhat, y, missing);
  require(s.count, "mse");
  return s.sq_sum / static_cast<double>(s.count);
}

double rmse(std::span<const double> yhat, std::span<const double> y,
            std::span<const uint8_t> missing) {
  return std::sqrt(mse(yhat, y, missing));
}

double mape(std::span<const double> yhat, std::span<const double> y,
            std::span<const uint8_t> missing) {
  Sums s = accumulate(yhat, y, missing);
  require(s.count_nz, "mape");
  return 100.0 * s.ape_sum / static_cast<double>(s.count_nz);
}

MetricsAccumulator::MetricsAccumulator(int64_t horizon, int64_t nodes, int64_t channels)
    : horizon_(horizon), nodes_(nodes), channels_(channels) {
  if (horizon <= 0 || nodes <= 0 || channels <= 0) {
    throw ValueError("MetricsAccumulator: horizon/nodes/channels must be positive");
  }
  size_t h = static_cast<size_t>(horizon);
  sum_abs_.assign(h, 0.0);
  sum_sq_.assign(h, 0.0);
  sum_ape_.assign(h, 0.0);
  count_.assign(h, 0);
  count_nz_.assign(h, 0);
}

void MetricsAccumulator::add(std::span<const double> yhat, std::span<const double> y,
                             std::span<const uint8_t> missing) {
  size_t expect = static_cast<size_t>(horizon_ * nodes_ * channels_);
  if (yhat.size() != expect || y.size() != expect) {
    throw ValueError("MetricsAccumulator: buffer size mismatch");
  }
  if (!missing.empty() && missing.size() != static_cast<size_t>(horizon_ * nodes_)) {
    throw ValueError("MetricsAccumulator: mask size mismatch");
  }
  for (int64_t h = 0; h < horizon_; ++h) {
    for (int64_t n = 0; n < nodes_; ++n) {
      if (!missing.empty() && missing[static_cast<size_t>(h * nodes_ + n)] != 0) continue;
      for (int64_t c = 0; c < channels_; ++c) {
        size_t i = static_cast<size_t>((h * nodes_ + n) * channels_ + c);
        double d = yhat[i] - y[i];
        size_t hs = static_cast<size_t>(h);
        sum_abs_[hs] += std::fabs(d);
        sum_sq_[hs] += d * d;
        ++count_[hs];
        if (y[i] != 0.0) {
          sum_ape_[hs] += std::fabs(d) / std::fabs(y[i]);
          ++count_nz_[hs];
        }
      }
    }
  }
}

MetricsAccumulator::Result MetricsAccumulator::finalize() const {
  Result r;
  for (int64_t h = 0; h < horizon_; ++h) {
    size_t hs = static_cast<size_t>(h);
    if (count_[hs] == 0) {
      throw DataError("metrics: step " + std::to_string(h + 1) + " has no valid entries");
    }
    double n = static_cast<double>(count_[hs]);
    r.mae_h.push_back(sum_abs_[hs] / n);
    r.mse_h.push_back(sum_sq_[hs] / n);
    r.rmse_h.push_back(std::sqrt(sum_sq_[hs] / n));
    if (count_nz_[hs] == 0) {
      throw DataError("metrics: step " + std::to_string(h + 1) + " has only zero targets");
    }
    r.mape_h.push_back(100.0 * sum_ape_[hs] / static_cast<double>(count_nz_[hs]));
  }
  double hn = static_cast<double>(horizon_);
  for (int64_t h = 0; h < horizon_; ++h) {
    size_t hs = static_cast<size_t>(h);
    r.mae_avg += r.mae_h[hs] / hn;
    r.rmse_avg += r.rmse_h[hs] / hn;
    r.mape_avg += r.mape_h[hs] / hn;
    r.mse_avg += r.mse_h[hs] / hn;
  }
  return r;
}

std::vector<SliceRow> horizon_slices(const MetricsAccumulator::Result& r) {
  if (r.mae_h.size() < 12) {
    throw ValueError("horizon_slices: need a horizon of at least 12 steps");
  }
  std::vector<SliceRow> rows;
  auto step = [&r](const std::string& label, size_t idx) {
    return SliceRow{label, r.mae_h[idx], r.rmse_h[idx], r.mape_h[idx], r.mse_h[idx]};
  };
  rows.push_back(step("15min", 2));
  rows.push_back(step("30min", 5));
  rows.push_back(step("60min", 11));
  rows.push_back(SliceRow{"avg", r.mae_avg, r.rmse_avg, r.mape_avg, r.mse_avg});
  return rows;
}

double improvement_pct(double reference, double candidate) {
  if (reference == 0.0) throw ValueError("improvement_pct: zero reference");
  return 100.0 * (candidate - reference) / reference;
}

}  // namespace ramtsf
