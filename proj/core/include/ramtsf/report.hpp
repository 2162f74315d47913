#pragma once

#include <string>
#include <vector>

#include "ramtsf/trainer.hpp"

namespace ramtsf {

// Renderers for the experiment outputs. Text tables are for terminals, CSV
// and JSON for downstream tooling; every artifact embeds the config hashes
// and seeds it was produced from and none of them contain wall-clock fields,
// so identical inputs reproduce identical bytes. Percentages are printed
// with three decimals; positive improvement means the second model is worse.

// Two-model table with Origin / RAM / Improvement columns, one row per
// metric, plus FLOPS and Params rows carrying the analytic reduction. Rows
// where the second model wins are flagged in the last column.
std::string comparison_table_text(const ComparisonReport& report);
std::string comparison_report_json(const ComparisonReport& report,
                                   const std::string& dataset_label);

// One row per ablation variant: aggregate metrics and analytic cost.
std::string ablation_table_text(const std::vector<VariantResult>& variants);
// Long-form per-seed rows.
std::string ablation_csv(const std::vector<VariantResult>& variants);
std::string ablation_json(const std::vector<VariantResult>& variants,
                          const std::string& dataset_label);

std::string eval_report_text(const EvalReport& report);
std::string eval_report_json(const EvalReport& report, const ModelConfig& cfg,
                             uint64_t seed, const std::string& dataset_label,
                             Split split);

}  // namespace ramtsf
