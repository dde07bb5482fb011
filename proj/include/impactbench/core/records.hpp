#pragma once

#include <optional>
#include <string>
#include <vector>

#include "impactbench/core/mask.hpp"

namespace impactbench {

struct CoveragePair {
  BinaryMask impacted;  // a: pixels the attack wrote
  BinaryMask critical;  // c: pixels the explainer selected

  friend bool operator==(const CoveragePair&, const CoveragePair&) = default;
};

// Outcome of one explain -> ablate -> re-classify round.
struct EvalRecord {
  std::string image_id;
  int y = 0;             // original decision
  double z = 0.0;        // confidence in y
  int y_prime = 0;       // decision after ablation
  double z_prime = 0.0;  // probability the ablated input still assigns to y
  // Confidence of the post-ablation argmax (alternative reading of z').
  std::optional<double> z_prime_argmax;
  std::optional<CoveragePair> coverage;
  std::optional<int> attack_target;
  std::optional<int> patched_label;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

// Throws RangeError / ShapeError when the record breaks its invariants.
void validate_record(const EvalRecord& record);

}  // namespace impactbench
