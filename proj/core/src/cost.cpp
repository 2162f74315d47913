#include "ramtsf/cost.hpp"

#include <algorithm>
#include <cstdio>

#include "json_util.hpp"

namespace ramtsf {

namespace {

int64_t embedding_params(const ModelConfig& cfg) {
  const int64_t d = cfg.d_model;
  int64_t p = cfg.in_features * d + d;
  if (cfg.embedding.time_of_day) p += cfg.embedding.steps_per_day * d;
  if (cfg.embedding.day_of_week) p += 7 * d;
  if (cfg.embedding.node) p += cfg.nodes * d;
  return p;
}

int64_t decoder_params(const ModelConfig& cfg) {
  const int64_t d = cfg.d_model, c = cfg.out_features;
  int64_t p = d * c + c;  // output head, present in every variant
  if (cfg.decoder == DecoderKind::projection) {
    return p + cfg.lookback * cfg.horizon;
  }
  for (const BlockSpec& b : cfg.decoder_blocks) p += decoder_block_param_count(b);
  if (cfg.decoder_uses_autoregression()) {
    p += d;          // start token
    p += c * d + d;  // previous-output embedding
  } else {
    p += cfg.lookback * cfg.horizon;
  }
  return p;
}

int64_t embedding_flops(const ModelConfig& cfg) {
  const int64_t m = cfg.lookback * cfg.nodes, d = cfg.d_model;
  int64_t f = 2 * m * cfg.in_features * d + m * d;
  if (cfg.embedding.time_of_day) f += m * d;
  if (cfg.embedding.day_of_week) f += m * d;
  if (cfg.embedding.node) f += m * d;
  return f;
}

int64_t decoder_flops(const ModelConfig& cfg) {
  const int64_t t = cfg.lookback, h = cfg.horizon, d = cfg.d_model, c = cfg.out_features;
  int64_t per_node = 2 * h * d * c + h * c;  // output head
  if (cfg.decoder == DecoderKind::projection) {
    per_node += 2 * h * t * d;
  } else if (cfg.decoder_uses_autoregression()) {
    if (h > 1) per_node += 2 * (h - 1) * c * d + (h - 1) * d;  // teacher embedding
    for (const BlockSpec& b : cfg.decoder_blocks) per_node += decoder_block_flops(b, h, t);
  } else {
    per_node += 2 * h * t * d;
    for (const BlockSpec& b : cfg.decoder_blocks) per_node += block_flops(b, h);
  }
  return cfg.nodes * per_node;
}

}  // namespace

double reduction_pct(double before, double after) {
  if (before <= 0.0) throw ValueError("reduction_pct: baseline must be positive");
  return 100.0 * (before - after) / before;
}

int64_t analytic_param_count(const ModelConfig& cfg) {
  cfg.validate();
  int64_t p = embedding_params(cfg);
  for (const BlockSpec& b : cfg.temporal_blocks) p += block_param_count(b);
  for (const BlockSpec& b : cfg.spatial_blocks) p += block_param_count(b);
  return p + decoder_params(cfg);
}

CostReport analytic_cost(const ModelConfig& cfg, int64_t batch) {
  cfg.validate();
  if (batch <= 0) throw ValueError("analytic_cost: batch must be positive");
  CostReport r;
  r.rows.push_back({"embedding", embedding_params(cfg), batch * embedding_flops(cfg)});
  for (size_t l = 0; l < cfg.temporal_blocks.size(); ++l) {
    const BlockSpec& b = cfg.temporal_blocks[l];
    r.rows.push_back({"encoder.temporal[" + std::to_string(l) + "]", block_param_count(b),
                      batch * cfg.nodes * block_flops(b, cfg.lookback)});
  }
  for (size_t l = 0; l < cfg.spatial_blocks.size(); ++l) {
    const BlockSpec& b = cfg.spatial_blocks[l];
    r.rows.push_back({"encoder.spatial[" + std::to_string(l) + "]", block_param_count(b),
                      batch * cfg.lookback * block_flops(b, cfg.nodes)});
  }
  r.rows.push_back({"decoder", decoder_params(cfg), batch * decoder_flops(cfg)});
  for (const CostRow& row : r.rows) {
    r.total_params += row.params;
    r.total_flops += row.flops;
  }
  return r;
}

int64_t analytic_flops(const ModelConfig& cfg, int64_t batch) {
  return analytic_cost(cfg, batch).total_flops;
}

Tensor probe_input(const ModelConfig& cfg) {
  return Tensor::zeros({cfg.lookback, cfg.nodes, cfg.in_features});
}

Calendar probe_calendar(const ModelConfig& cfg) {
  Calendar cal;
  cal.tod.assign(static_cast<size_t>(cfg.lookback), 0);
  cal.dow.assign(static_cast<size_t>(cfg.lookback), 0);
  return cal;
}

CostReport measured_cost(AmtsfmModel& model, const Tensor& x, const Calendar& cal) {
  if (!model.instrumentation()) {
    throw StateError("measured_cost: instrumentation is off; call set_instrumentation(true)");
  }
  const ModelConfig& cfg = model.config();
  NoGradScope no_grad;
  CostReport r;
  auto staged = [&r](const std::string& name, int64_t params, auto&& fn) {
    FlopCounter c;
    {
      FlopCounterScope scope(c);
      fn();
    }
    r.rows.push_back({name, params, c.flops});
  };

  Tensor e, z, out;
  staged("embedding", embedding_params(cfg), [&] { e = model.embed(x, cal); });
  for (size_t l = 0; l < cfg.temporal_blocks.size(); ++l) {
    staged("encoder.temporal[" + std::to_string(l) + "]",
           block_param_count(cfg.temporal_blocks[l]),
           [&] { e = model.run_temporal_layer(e, l, RunMode::eval); });
  }
  for (size_t l = 0; l < cfg.spatial_blocks.size(); ++l) {
    staged("encoder.spatial[" + std::to_string(l) + "]",
           block_param_count(cfg.spatial_blocks[l]),
           [&] { e = model.run_spatial_layer(e, l, RunMode::eval); });
  }
  staged("decoder", decoder_params(cfg), [&] {
    if (cfg.decoder_uses_autoregression()) {
      Tensor zeros = Tensor::zeros({cfg.horizon, cfg.nodes, cfg.out_features});
      out = model.decode_attention(e, &zeros, /*teacher=*/true, RunMode::eval);
    } else {
      out = model.decode(e, RunMode::eval, nullptr);
    }
  });

  for (const CostRow& row : r.rows) {
    r.total_params += row.params;
    r.total_flops += row.flops;
  }
  return r;
}

CostReport compare_costs(const ModelConfig& before, const ModelConfig& after, int64_t batch) {
  CostReport base = analytic_cost(before, batch);
  CostReport r = analytic_cost(after, batch);
  r.has_baseline = true;
  r.baseline_params = base.total_params;
  r.baseline_flops = base.total_flops;
  r.flops_drop_pct = reduction_pct(static_cast<double>(base.total_flops),
                                   static_cast<double>(r.total_flops));
  r.params_drop_pct = reduction_pct(static_cast<double>(base.total_params),
                                    static_cast<double>(r.total_params));
  return r;
}

std::string cost_report_text(const CostReport& report) {
  size_t name_w = 5;
  for (const CostRow& row : report.rows) name_w = std::max(name_w, row.name.size());
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-*s %16s %16s\n", static_cast<int>(name_w), "stage",
                "params", "flops");
  out += line;
  for (const CostRow& row : report.rows) {
    std::snprintf(line, sizeof(line), "%-*s %16lld %16lld\n", static_cast<int>(name_w),
                  row.name.c_str(), static_cast<long long>(row.params),
                  static_cast<long long>(row.flops));
    out += line;
  }
  std::snprintf(line, sizeof(line), "%-*s %16lld %16lld\n", static_cast<int>(name_w), "total",
                static_cast<long long>(report.total_params),
                static_cast<long long>(report.total_flops));
  out += line;
  if (report.has_baseline) {
    std::snprintf(line, sizeof(line), "%-*s %16lld %16lld\n", static_cast<int>(name_w),
                  "baseline", static_cast<long long>(report.baseline_params),
                  static_cast<long long>(report.baseline_flops));
    out += line;
    std::snprintf(line, sizeof(line), "%-*s %15.3f%% %15.3f%%\n", static_cast<int>(name_w),
                  "drop", report.params_drop_pct, report.flops_drop_pct);
    out += line;
  }
  return out;
}

std::string cost_report_json(const CostReport& report) {
  jsonutil::json j;
  jsonutil::json rows = jsonutil::json::array();
  for (const CostRow& row : report.rows) {
    rows.push_back({{"name", row.name}, {"params", row.params}, {"flops", row.flops}});
  }
  j["rows"] = std::move(rows);
  j["total_params"] = report.total_params;
  j["total_flops"] = report.total_flops;
  if (report.has_baseline) {
    j["baseline_params"] = report.baseline_params;
    j["baseline_flops"] = report.baseline_flops;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", report.params_drop_pct);
    j["params_drop_pct"] = std::stod(buf);
    std::snprintf(buf, sizeof(buf), "%.3f", report.flops_drop_pct);
    j["flops_drop_pct"] = std::stod(buf);
  }
  return j.dump(2);
}

}  // namespace ramtsf
