#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ramtsf/model.hpp"

namespace ramtsf {

// ---------------------------------------------------------------------------
// Operation-counting convention (shared by the analytic formulas below and
// the runtime counter in tensor.cpp; both sides must agree exactly):
//
//   matmul [m,k]·[k,n]      2·m·k·n          (multiply-add = 2)
//   linear M×din -> dout    2·M·din·dout + M·dout
//   softmax over n          5·n per row      (max, subtract, exp, sum, divide)
//   layer_norm over d       8·d per row
//   dropout                 2 per element in train mode, 0 in eval
//   relu/add/sub/mul/scale/abs/sum   1 per element
//   mean                    numel + 1
//   rsqrt                   2 per element
//   transpose/reshape/concat/slice/gather/split/stack   0 (data movement)
//
// Costs are for the forward pass only.
// ---------------------------------------------------------------------------

struct CostRow {
  std::string name;
  int64_t params = 0;
  int64_t flops = 0;
};

// Per-stage rows plus totals. When produced by compare_costs the report also
// carries the baseline totals and the reduction percentages
// 100·(old−new)/old.
struct CostReport {
  std::vector<CostRow> rows;
  int64_t total_params = 0;
  int64_t total_flops = 0;
  bool has_baseline = false;
  int64_t baseline_params = 0;
  int64_t baseline_flops = 0;
  double flops_drop_pct = 0.0;
  double params_drop_pct = 0.0;
};

double reduction_pct(double before, double after);

int64_t analytic_param_count(const ModelConfig& cfg);
int64_t analytic_flops(const ModelConfig& cfg, int64_t batch = 1);
CostReport analytic_cost(const ModelConfig& cfg, int64_t batch = 1);

// Runs one instrumented probe forward (see cost_probe_forward) stage by
// stage and reports the observed counts. Requires
// model.set_instrumentation(true) beforehand; throws StateError otherwise.
CostReport measured_cost(AmtsfmModel& model, const Tensor& x, const Calendar& cal);

// A zero-valued input window and matching calendar for cost probing; counts
// depend only on shapes.
Tensor probe_input(const ModelConfig& cfg);
Calendar probe_calendar(const ModelConfig& cfg);

// Analytic report for `after` with `before` as the baseline.
CostReport compare_costs(const ModelConfig& before, const ModelConfig& after,
                         int64_t batch = 1);

std::string cost_report_text(const CostReport& report);
std::string cost_report_json(const CostReport& report);

}  // namespace ramtsf
