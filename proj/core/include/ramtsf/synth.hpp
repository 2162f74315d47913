#pragma once

#include "ramtsf/dataset.hpp"

namespace ramtsf {

// Seeded diffusion-autoregressive process on a random geometric graph with
// daily periodic forcing: each node follows
//   s[t+1] = ar·s[t] + diff·(P s)[t] + sin(2π·((t+1) mod steps_per_day)/steps_per_day + φ_n) + noise·ε
// where P is the row-normalized adjacency of nodes scattered in the unit
// square (edge when closer than `radius`). Values are emitted as
// base + amplitude·s. The forcing phase argument is reduced mod one day, so
// the noise-free process is exactly periodic once burn-in has damped the
// initial state (the contraction factor is ar + diff < 1).
struct SynthStfConfig {
  int64_t nodes = 16;
  int64_t steps = 2016;
  uint64_t seed = 1;
  double noise = 0.05;
  int64_t steps_per_day = 288;
  double radius = 0.6;
  double ar = 0.55;
  double diff = 0.30;
  double base = 50.0;
  double amplitude = 8.0;
  double missing_rate = 0.0;
};

SeriesDataset synth_stf(const SynthStfConfig& cfg);

// Per-channel sum of daily and weekly sinusoids plus a linear trend and
// seeded noise; sinusoid arguments are reduced mod their period.
struct SynthLtsfConfig {
  int64_t channels = 7;
  int64_t steps = 2000;
  uint64_t seed = 1;
  double noise = 0.1;
  int64_t steps_per_day = 24;
  double trend = 0.5;  // total drift over the series, per channel scale
};

SeriesDataset synth_ltsf(const SynthLtsfConfig& cfg);

}  // namespace ramtsf
