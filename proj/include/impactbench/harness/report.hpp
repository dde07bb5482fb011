#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "impactbench/core/mask.hpp"
#include "impactbench/core/records.hpp"
#include "impactbench/harness/experiment.hpp"
#include "impactbench/metrics/impact.hpp"

namespace impactbench::harness {

// {"height":H,"width":W,"pixels":[row-major indices]}
nlohmann::json mask_to_json(const BinaryMask& mask);
BinaryMask mask_from_json(const nlohmann::json& j);

nlohmann::json record_to_json(const EvalRecord& record);
EvalRecord record_from_json(const nlohmann::json& j);

nlohmann::json metrics_to_json(const metrics::MetricsReport& report);
metrics::MetricsReport metrics_from_json(const nlohmann::json& j);

// Full per-record detail plus the manifest. Doubles survive a round trip
// bit for bit.
nlohmann::json result_to_json(const ExperimentResult& result);
ExperimentResult result_from_json(const nlohmann::json& j);

// 0.761 -> "76.10%"
std::string format_percent(double fraction);
// "76.10% / 50.73%"
std::string format_impact_pair(const metrics::MetricsReport& report);

// Columns explainer,scale,n,I,I_strict,I_coverage; six decimals; n/a for
// undefined cells and for coverage outside the adversarial experiment.
std::string format_csv(const std::vector<ReportCell>& cells);

// One row per method (general) or per scale (adversarial).
std::string format_markdown(const ExperimentResult& result);

// Writes report.json, report.csv, report.md and manifest.json into `dir`.
void emit_report(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace impactbench::harness
