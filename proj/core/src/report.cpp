#include "ramtsf/report.hpp"

#include <cstdio>
#include <string>

#include <json.hpp>

namespace ramtsf {

namespace {

using nlohmann::json;

std::string mean_std(const MetricSummary& s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f +- %.3f", s.mean, s.stddev);
  return buf;
}

double round3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return std::stod(buf);
}

std::string seeds_str(const std::vector<uint64_t>& seeds) {
  std::string out;
  for (size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(seeds[i]);
  }
  return out;
}

json summary_json(const MetricSummary& s, const std::vector<double>& per_seed) {
  return json{{"mean", s.mean}, {"stddev", s.stddev}, {"per_seed", per_seed}};
}

std::vector<double> collect(const VariantResult& v, double MetricsAccumulator::Result::*field) {
  std::vector<double> out;
  for (const auto& r : v.per_seed) out.push_back(r.horizon.*field);
  return out;
}

json variant_json(const VariantResult& v) {
  json j;
  j["name"] = v.name;
  j["config_hash"] = config_hash_hex(v.cfg);
  j["seeds"] = v.seeds;
  j["params"] = v.total_params;
  j["flops"] = v.total_flops;
  j["metrics"] = json{
      {"mae", summary_json(v.mae_s, collect(v, &MetricsAccumulator::Result::mae_avg))},
      {"rmse", summary_json(v.rmse_s, collect(v, &MetricsAccumulator::Result::rmse_avg))},
      {"mape", summary_json(v.mape_s, collect(v, &MetricsAccumulator::Result::mape_avg))},
      {"mse", summary_json(v.mse_s, collect(v, &MetricsAccumulator::Result::mse_avg))},
  };
  return j;
}

}  // namespace

std::string comparison_table_text(const ComparisonReport& report) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "config %s -> %s  seeds %s\n",
                config_hash_hex(report.original.cfg).c_str(),
                config_hash_hex(report.pruned.cfg).c_str(),
                seeds_str(report.original.seeds).c_str());
  out += line;
  std::snprintf(line, sizeof(line), "%-9s %22s %22s %14s %7s\n", "metric", "Origin",
                "RAM", "Improvement", "better");
  out += line;
  struct Row {
    const char* name;
    const MetricSummary* a;
    const MetricSummary* b;
    double pct;
  };
  const Row rows[] = {
      {"MAE", &report.original.mae_s, &report.pruned.mae_s, report.mae_improvement_pct},
      {"RMSE", &report.original.rmse_s, &report.pruned.rmse_s, report.rmse_improvement_pct},
      {"MAPE(%)", &report.original.mape_s, &report.pruned.mape_s, report.mape_improvement_pct},
      {"MSE", &report.original.mse_s, &report.pruned.mse_s, report.mse_improvement_pct},
  };
  for (const Row& r : rows) {
    std::snprintf(line, sizeof(line), "%-9s %22s %22s %13.3f%% %7s\n", r.name,
                  mean_std(*r.a).c_str(), mean_std(*r.b).c_str(), r.pct,
                  r.pct < 0.0 ? "*" : "");
    out += line;
  }
  std::snprintf(line, sizeof(line), "%-9s %22lld %22lld %13.3f%% %7s\n", "FLOPS",
                static_cast<long long>(report.original.total_flops),
                static_cast<long long>(report.pruned.total_flops),
                report.flops_drop_pct, report.flops_drop_pct > 0.0 ? "*" : "");
  out += line;
  std::snprintf(line, sizeof(line), "%-9s %22lld %22lld %13.3f%% %7s\n", "Params",
                static_cast<long long>(report.original.total_params),
                static_cast<long long>(report.pruned.total_params),
                report.params_drop_pct, report.params_drop_pct > 0.0 ? "*" : "");
  out += line;
  out +=
      "improvement = 100*(RAM - Origin)/Origin, positive = worse; FLOPS/Params "
      "rows show the reduction\n";
  return out;
}

std::string comparison_report_json(const ComparisonReport& report,
                                   const std::string& dataset_label) {
  json j;
  j["schema_version"] = 1;
  j["kind"] = "comparison";
  j["dataset"] = dataset_label;
  j["variants"] = json::array({variant_json(report.original), variant_json(report.pruned)});
  j["improvement_pct"] = json{{"mae", round3(report.mae_improvement_pct)},
                              {"rmse", round3(report.rmse_improvement_pct)},
                              {"mape", round3(report.mape_improvement_pct)},
                              {"mse", round3(report.mse_improvement_pct)}};
  j["flops_drop_pct"] = round3(report.flops_drop_pct);
  j["params_drop_pct"] = round3(report.params_drop_pct);
  return j.dump(2) + "\n";
}

std::string ablation_table_text(const std::vector<VariantResult>& variants) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-16s %18s %18s %18s %12s %14s\n", "variant",
                "MAE", "RMSE", "MAPE(%)", "params", "flops");
  out += line;
  for (const auto& v : variants) {
    std::snprintf(line, sizeof(line), "%-16s %18s %18s %18s %12lld %14lld\n",
                  v.name.c_str(), mean_std(v.mae_s).c_str(), mean_std(v.rmse_s).c_str(),
                  mean_std(v.mape_s).c_str(), static_cast<long long>(v.total_params),
                  static_cast<long long>(v.total_flops));
    out += line;
  }
  return out;
}

std::string ablation_csv(const std::vector<VariantResult>& variants) {
  std::string out = "variant,seed,mae,rmse,mape,mse,params,flops\n";
  char line[256];
  for (const auto& v : variants) {
    for (size_t i = 0; i < v.per_seed.size(); ++i) {
      const auto& h = v.per_seed[i].horizon;
      std::snprintf(line, sizeof(line), "%s,%llu,%.17g,%.17g,%.17g,%.17g,%lld,%lld\n",
                    v.name.c_str(), static_cast<unsigned long long>(v.seeds[i]),
                    h.mae_avg, h.rmse_avg, h.mape_avg, h.mse_avg,
                    static_cast<long long>(v.total_params),
                    static_cast<long long>(v.total_flops));
      out += line;
    }
  }
  return out;
}

std::string ablation_json(const std::vector<VariantResult>& variants,
                          const std::string& dataset_label) {
  json j;
  j["schema_version"] = 1;
  j["kind"] = "ablation";
  j["dataset"] = dataset_label;
  j["variants"] = json::array();
  for (const auto& v : variants) j["variants"].push_back(variant_json(v));
  return j.dump(2) + "\n";
}

std::string eval_report_text(const EvalReport& report) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%lld windows, loss %.6f (%s scale metrics)\n",
                static_cast<long long>(report.windows), report.loss,
                report.original_scale ? "original" : "normalized");
  out += line;
  std::snprintf(line, sizeof(line), "%-8s %12s %12s %12s %14s\n", "slice", "MAE",
                "RMSE", "MAPE(%)", "MSE");
  out += line;
  auto row = [&](const char* label, double mae_v, double rmse_v, double mape_v,
                 double mse_v) {
    std::snprintf(line, sizeof(line), "%-8s %12.3f %12.3f %12.3f %14.3f\n", label,
                  mae_v, rmse_v, mape_v, mse_v);
    out += line;
  };
  if (!report.slices.empty()) {
    for (const auto& s : report.slices) {
      row(s.label.c_str(), s.mae_v, s.rmse_v, s.mape_v, s.mse_v);
    }
  } else {
    const auto& h = report.horizon;
    row("avg", h.mae_avg, h.rmse_avg, h.mape_avg, h.mse_avg);
  }
  return out;
}

std::string eval_report_json(const EvalReport& report, const ModelConfig& cfg,
                             uint64_t seed, const std::string& dataset_label,
                             Split split) {
  json j;
  j["schema_version"] = 1;
  j["kind"] = "evaluation";
  j["dataset"] = dataset_label;
  j["split"] = split_name(split);
  j["config_hash"] = config_hash_hex(cfg);
  j["seed"] = seed;
  j["windows"] = report.windows;
  j["loss"] = report.loss;
  j["original_scale"] = report.original_scale;
  const auto& h = report.horizon;
  j["metrics"] = json{{"mae_avg", h.mae_avg},   {"rmse_avg", h.rmse_avg},
                      {"mape_avg", h.mape_avg}, {"mse_avg", h.mse_avg},
                      {"mae_h", h.mae_h},       {"rmse_h", h.rmse_h},
                      {"mape_h", h.mape_h},     {"mse_h", h.mse_h}};
  j["slices"] = json::array();
  for (const auto& s : report.slices) {
    j["slices"].push_back(json{{"label", s.label},
                               {"mae", s.mae_v},
                               {"rmse", s.rmse_v},
                               {"mape", s.mape_v},
                               {"mse", s.mse_v}});
  }
  return j.dump(2) + "\n";
}

}  // namespace ramtsf
