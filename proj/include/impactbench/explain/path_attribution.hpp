#pragma once

#include <cstdint>
#include <vector>

#include "impactbench/explain/explainer.hpp"

namespace impactbench::explain {

enum class BaselinePolicy { kZeroImage, kDatasetSamples };

struct PathAttributionConfig {
  int steps = 64;  // IG Riemann steps, or EG Monte Carlo samples
  BaselinePolicy baseline = BaselinePolicy::kZeroImage;
  std::uint64_t seed = 0;
  // EG only: alpha_i = (i + 0.5) / steps instead of uniform draws.
  bool stratified_alpha = false;
  model::GradientTarget gradient_target = model::GradientTarget::kLogit;

  void validate() const;
};

// Per-element attribution (x - b) * mean gradient along the straight path,
// midpoint rule, before summing channels.
std::vector<double> integrated_gradients_elementwise(const Image& x, const Image& baseline,
                                                     const model::Classifier& model, int target_class,
                                                     const PathAttributionConfig& cfg);

// Zero-image baseline; channels summed to one score per pixel.
SaliencyMap integrated_gradients(const Image& x, const model::Classifier& model, const PathAttributionConfig& cfg,
                                 int target_class);
SaliencyMap integrated_gradients(const Image& x, const model::Classifier& model, const PathAttributionConfig& cfg);

// Monte Carlo over (baseline ~ uniform over `baselines`, alpha ~ U(0,1)).
SaliencyMap expected_gradients(const Image& x, const model::Classifier& model, const std::vector<Image>& baselines,
                               const PathAttributionConfig& cfg, int target_class);
SaliencyMap expected_gradients(const Image& x, const model::Classifier& model, const std::vector<Image>& baselines,
                               const PathAttributionConfig& cfg);

// Collapses a channel-major attribution to one score per pixel.
SaliencyMap sum_channels(const Shape& shape, const std::vector<double>& attribution);

class IntegratedGradientsExplainer final : public Explainer {
 public:
  IntegratedGradientsExplainer(std::string name, PathAttributionConfig cfg);
  std::string name() const override { return name_; }
  bool requires_gradients() const override { return true; }
  SaliencyMap explain(const Image& x, const model::Classifier& model, const ExplainContext& ctx) const override;

 private:
  std::string name_;
  PathAttributionConfig cfg_;
};

class ExpectedGradientsExplainer final : public Explainer {
 public:
  ExpectedGradientsExplainer(std::string name, std::vector<Image> baselines, PathAttributionConfig cfg);
  std::string name() const override { return name_; }
  bool requires_gradients() const override { return true; }
  SaliencyMap explain(const Image& x, const model::Classifier& model, const ExplainContext& ctx) const override;

 private:
  std::string name_;
  std::vector<Image> baselines_;
  PathAttributionConfig cfg_;
};

}  // namespace impactbench::explain
