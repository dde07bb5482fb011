#include "impactbench/metrics/impact.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "impactbench/core/error.hpp"

namespace impactbench::metrics {

namespace {

void require_records(std::span<const EvalRecord> records) {
  if (records.empty()) throw ConfigError("metric is undefined on an empty batch");
  for (const EvalRecord& r : records) validate_record(r);
}

bool flipped(const EvalRecord& r) { return r.y_prime != r.y; }

bool impacted(const EvalRecord& r, double tau) { return flipped(r) || r.z_prime <= tau * r.z; }

const CoveragePair& coverage_of(const EvalRecord& r) {
  if (!r.coverage) throw ConfigError(fmt::format("record '{}' has no coverage pair", r.image_id));
  return *r.coverage;
}

}  // namespace

void MetricsConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError(fmt::format("tau {} must lie in (0,1]", tau));
}

double impact_score(std::span<const EvalRecord> records, const MetricsConfig& cfg) {
  cfg.validate();
  require_records(records);
  const auto hits = std::count_if(records.begin(), records.end(), [&](const EvalRecord& r) { return impacted(r, cfg.tau); });
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double impact_score_strict(std::span<const EvalRecord> records) {
  require_records(records);
  const auto hits = std::count_if(records.begin(), records.end(), flipped);
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double impact_coverage(std::span<const EvalRecord> records) {
  require_records(records);
  double total = 0.0;
  for (const EvalRecord& r : records) {
    const CoveragePair& pair = coverage_of(r);
    total += mask_intersection_union(pair.impacted, pair.critical).iou();
  }
  return total / static_cast<double>(records.size());
}

MetricsReport build_report(std::span<const EvalRecord> records, const MetricsConfig& cfg) {
  cfg.validate();
  require_records(records);
  MetricsReport report;
  report.n = records.size();
  report.flags.reserve(records.size());

  const bool with_coverage =
      std::all_of(records.begin(), records.end(), [](const EvalRecord& r) { return r.coverage.has_value(); });
  std::size_t any = 0, strict = 0, alt = 0;
  double iou_total = 0.0;
  for (const EvalRecord& r : records) {
    RecordFlags f;
    f.decision_flip = r.y_prime != r.y;
    f.confidence_drop = r.z_prime <= cfg.tau * r.z;
    if (f.decision_flip || f.confidence_drop) ++any;
    if (f.decision_flip) ++strict;
    if (cfg.argmax_variant) {
      const double alt_conf = r.z_prime_argmax.value_or(r.z_prime);
      if (f.decision_flip || alt_conf <= cfg.tau * r.z) ++alt;
    }
    if (with_coverage) {
      const IntersectionUnion iu = mask_intersection_union(r.coverage->impacted, r.coverage->critical);
      f.iou = iu.iou();
      f.empty_union = iu.union_ == 0;
      iou_total += *f.iou;
    }
    report.flags.push_back(f);
  }
  const auto n = static_cast<double>(records.size());
  report.impact_score = static_cast<double>(any) / n;
  report.impact_strict = static_cast<double>(strict) / n;
  if (with_coverage) report.impact_coverage = iou_total / n;
  if (cfg.argmax_variant) report.impact_score_argmax_variant = static_cast<double>(alt) / n;
  return report;
}

}  // namespace impactbench::metrics
