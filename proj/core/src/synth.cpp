#include "ramtsf/synth.hpp"

#include <cmath>

namespace ramtsf {

namespace {

constexpr int64_t kEpochStart = 1704067200;  // 2024-01-01 00:00:00 UTC, a Monday
constexpr double kTwoPi = 6.283185307179586476925286766559;

void finish_calendar(SeriesDataset& ds, int64_t steps_per_day) {
  int64_t step_seconds = 86400 / steps_per_day;
  for (int64_t t = 0; t < ds.steps; ++t) {
    int64_t epoch = kEpochStart + t * step_seconds;
    ds.epoch_seconds.push_back(epoch);
    ds.tod.push_back(tod_index(epoch, steps_per_day));
    ds.dow.push_back(dow_index(epoch));
  }
}

}  // namespace

SeriesDataset synth_stf(const SynthStfConfig& cfg) {
  if (cfg.nodes < 2) throw ValueError("synth_stf: need at least 2 nodes");
  if (cfg.steps <= 0) throw ValueError("synth_stf: steps must be positive");
  if (cfg.steps_per_day <= 0 || 86400 % cfg.steps_per_day != 0) {
    throw ValueError("synth_stf: steps_per_day must divide 86400");
  }
  if (cfg.noise < 0.0 || cfg.missing_rate < 0.0 || cfg.missing_rate >= 1.0) {
    throw ValueError("synth_stf: bad noise or missing rate");
  }
  if (cfg.ar + cfg.diff >= 1.0 || cfg.ar < 0.0 || cfg.diff < 0.0) {
    throw ValueError("synth_stf: ar + diff must stay below 1 for a stable process");
  }
  const int64_t n = cfg.nodes;
  Rng graph_rng(Rng::mix(cfg.seed, 0x6A4));
  std::vector<double> px(static_cast<size_t>(n)), py(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    px[static_cast<size_t>(i)] = graph_rng.uniform();
    py[static_cast<size_t>(i)] = graph_rng.uniform();
  }
  // Row-normalized adjacency; every node gets a self-loop so isolated nodes
  // still have a well-defined row.
  std::vector<double> p(static_cast<size_t>(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      double dx = px[static_cast<size_t>(i)] - px[static_cast<size_t>(j)];
      double dy = py[static_cast<size_t>(i)] - py[static_cast<size_t>(j)];
      double w = (i == j || std::sqrt(dx * dx + dy * dy) < cfg.radius) ? 1.0 : 0.0;
      p[static_cast<size_t>(i * n + j)] = w;
      row_sum += w;
    }
    for (int64_t j = 0; j < n; ++j) p[static_cast<size_t>(i * n + j)] /= row_sum;
  }

  Rng state_rng(Rng::mix(cfg.seed, 0x57A7));
  Rng noise_rng(Rng::mix(cfg.seed, 0x4015E));
  Rng miss_rng(Rng::mix(cfg.seed, 0x3155));
  std::vector<double> phase(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) phase[static_cast<size_t>(i)] = state_rng.uniform(0.0, kTwoPi);
  std::vector<double> s(static_cast<size_t>(n)), next(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) s[static_cast<size_t>(i)] = state_rng.gaussian();

  const int64_t burn_in = std::max<int64_t>(2 * cfg.steps_per_day, 256);
  SeriesDataset ds;
  ds.nodes = n;
  ds.channels = 1;
  ds.steps = cfg.steps;
  ds.steps_per_day = cfg.steps_per_day;
  ds.values.reserve(static_cast<size_t>(cfg.steps * n));
  ds.missing.reserve(static_cast<size_t>(cfg.steps * n));
  for (int64_t t = 0; t < burn_in + cfg.steps; ++t) {
    int64_t day_step = (t + 1) % cfg.steps_per_day;
    for (int64_t i = 0; i < n; ++i) {
      double diffusion = 0.0;
      for (int64_t j = 0; j < n; ++j) {
        diffusion += p[static_cast<size_t>(i * n + j)] * s[static_cast<size_t>(j)];
      }
      double forcing = std::sin(kTwoPi * static_cast<double>(day_step) /
                                    static_cast<double>(cfg.steps_per_day) +
                                phase[static_cast<size_t>(i)]);
      double eps = cfg.noise > 0.0 ? cfg.noise * noise_rng.gaussian() : 0.0;
      next[static_cast<size_t>(i)] = cfg.ar * s[static_cast<size_t>(i)] +
                                     cfg.diff * diffusion + forcing + eps;
    }
    s.swap(next);
    if (t < burn_in) continue;
    for (int64_t i = 0; i < n; ++i) {
      bool miss = cfg.missing_rate > 0.0 && miss_rng.uniform() < cfg.missing_rate;
      double v = cfg.base + cfg.amplitude * s[static_cast<size_t>(i)];
      ds.values.push_back(miss ? std::nan("") : v);
      ds.missing.push_back(miss ? 1 : 0);
    }
  }
  for (int64_t i = 0; i < n; ++i) ds.node_names.push_back("s" + std::to_string(i));
  finish_calendar(ds, cfg.steps_per_day);
  ds.raw_values = ds.values;
  ds.train_end = ds.steps;
  ds.val_end = ds.steps;
  ds.validate();
  return ds;
}

SeriesDataset synth_ltsf(const SynthLtsfConfig& cfg) {
  if (cfg.channels <= 0 || cfg.steps <= 0) {
    throw ValueError("synth_ltsf: channels/steps must be positive");
  }
  if (cfg.steps_per_day <= 0 || 86400 % cfg.steps_per_day != 0) {
    throw ValueError("synth_ltsf: steps_per_day must divide 86400");
  }
  if (cfg.noise < 0.0) throw ValueError("synth_ltsf: noise must be non-negative");
  const int64_t n = cfg.channels;
  Rng comp_rng(Rng::mix(cfg.seed, 0x17F));
  Rng noise_rng(Rng::mix(cfg.seed, 0x9015E));
  const int64_t day = cfg.steps_per_day;
  const int64_t week = 7 * day;
  struct Component {
    double amp_day, phase_day, amp_week, phase_week, offset, trend;
  };
  std::vector<Component> comps(static_cast<size_t>(n));
  for (Component& c : comps) {
    c.amp_day = comp_rng.uniform(0.5, 1.5);
    c.phase_day = comp_rng.uniform(0.0, kTwoPi);
    c.amp_week = comp_rng.uniform(0.2, 0.8);
    c.phase_week = comp_rng.uniform(0.0, kTwoPi);
    c.offset = comp_rng.uniform(-1.0, 1.0);
    c.trend = cfg.trend * comp_rng.uniform(-1.0, 1.0);
  }
  SeriesDataset ds;
  ds.nodes = n;
  ds.channels = 1;
  ds.steps = cfg.steps;
  ds.steps_per_day = cfg.steps_per_day;
  for (int64_t t = 0; t < cfg.steps; ++t) {
    for (int64_t i = 0; i < n; ++i) {
      const Component& c = comps[static_cast<size_t>(i)];
      double vd = c.amp_day * std::sin(kTwoPi * static_cast<double>(t % day) /
                                           static_cast<double>(day) +
                                       c.phase_day);
      double vw = c.amp_week * std::sin(kTwoPi * static_cast<double>(t % week) /
                                            static_cast<double>(week) +
                                        c.phase_week);
      double tr = c.trend * static_cast<double>(t) / static_cast<double>(cfg.steps);
      double eps = cfg.noise > 0.0 ? cfg.noise * noise_rng.gaussian() : 0.0;
      ds.values.push_back(c.offset + vd + vw + tr + eps);
      ds.missing.push_back(0);
    }
  }
  for (int64_t i = 0; i < n; ++i) ds.node_names.push_back("c" + std::to_string(i));
  finish_calendar(ds, cfg.steps_per_day);
  ds.raw_values = ds.values;
  ds.train_end = ds.steps;
  ds.val_end = ds.steps;
  ds.validate();
  return ds;
}

}  // namespace ramtsf
