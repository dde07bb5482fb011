#pragma once

#include "impactbench/explain/explainer.hpp"

namespace impactbench::explain {

// Scores 1 inside the context's ground-truth region and 0 elsewhere. Upper
// reference for the metrics; needs ExplainContext::ground_truth.
class OracleExplainer final : public Explainer {
 public:
  explicit OracleExplainer(std::string name = "oracle") : name_(std::move(name)) {}
  std::string name() const override { return name_; }
  SaliencyMap explain(const Image& x, const model::Classifier& model, const ExplainContext& ctx) const override;

 private:
  std::string name_;
};

// I.i.d. uniform scores from the context seed, so a top-k cut is a uniformly
// random pixel set. Chance-level control.
class RandomExplainer final : public Explainer {
 public:
  explicit RandomExplainer(std::string name = "random") : name_(std::move(name)) {}
  std::string name() const override { return name_; }
  SaliencyMap explain(const Image& x, const model::Classifier& model, const ExplainContext& ctx) const override;

 private:
  std::string name_;
};

}  // namespace impactbench::explain
