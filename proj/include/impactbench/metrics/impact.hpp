#pragma once

#include <optional>
#include <span>
#include <vector>

#include "impactbench/core/records.hpp"

namespace impactbench::metrics {

struct MetricsConfig {
  double tau = 0.5;  // confidence-drop threshold: z' <= tau * z
  // Also score the alternative z' reading (confidence of the new argmax).
  bool argmax_variant = false;

  void validate() const;
};

struct RecordFlags {
  bool decision_flip = false;
  bool confidence_drop = false;
  std::optional<double> iou;
  bool empty_union = false;  // coverage record with a = c = empty

  friend bool operator==(const RecordFlags&, const RecordFlags&) = default;
};

struct MetricsReport {
  std::size_t n = 0;
  double impact_score = 0.0;   // I
  double impact_strict = 0.0;  // I_strict
  std::optional<double> impact_coverage;
  std::optional<double> impact_score_argmax_variant;
  std::vector<RecordFlags> flags;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// I = (1/n) sum [ y' != y  or  z' <= tau z ]. Throws ConfigError on an empty batch.
double impact_score(std::span<const EvalRecord> records, const MetricsConfig& cfg);

// I_strict = (1/n) sum [ y' != y ].
double impact_score_strict(std::span<const EvalRecord> records);

// Mean intersection-over-union of (a_i, c_i); empty unions contribute 0.
double impact_coverage(std::span<const EvalRecord> records);

// Coverage is filled only when every record carries a coverage pair.
MetricsReport build_report(std::span<const EvalRecord> records, const MetricsConfig& cfg);

}  // namespace impactbench::metrics
