#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "impactbench/core/image.hpp"
#include "impactbench/core/mask.hpp"
#include "impactbench/core/saliency.hpp"
#include "impactbench/model/classifier.hpp"

namespace impactbench::explain {

// Per-call inputs that are not part of an explainer's configuration.
struct ExplainContext {
  std::uint64_t seed = 0;
  // Known causal region, when the caller has one (planted feature, patch).
  const BinaryMask* ground_truth = nullptr;
  // Class to explain; defaults to the model's decision on the input.
  std::optional<int> target_class;
};

// The method M: maps (x, N) to per-pixel importance.
class Explainer {
 public:
  virtual ~Explainer() = default;
  virtual std::string name() const = 0;
  virtual bool requires_gradients() const { return false; }
  virtual SaliencyMap explain(const Image& x, const model::Classifier& model, const ExplainContext& ctx) const = 0;
};

int resolve_target(const Image& x, const model::Classifier& model, const ExplainContext& ctx);

}  // namespace impactbench::explain
