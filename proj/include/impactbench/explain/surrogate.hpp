#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "impactbench/ablation/absence.hpp"
#include "impactbench/core/error.hpp"
#include "impactbench/explain/explainer.hpp"
#include "impactbench/explain/segmentation.hpp"

namespace impactbench::explain {

class SingularSystemError : public Error {
 public:
  using Error::Error;
};

enum class SampleKernel {
  kExponential,  // LIME locality: exp(-d^2 / width^2), d = fraction of segments off
  kShapley,      // Kernel-SHAP weighting over coalition sizes
  kUniform,
};

std::string to_string(SampleKernel kernel);
SampleKernel sample_kernel_from_string(const std::string& name);

struct SurrogateConfig {
  int num_samples = 1000;
  double ridge_lambda = 1e-3;
  SampleKernel kernel = SampleKernel::kExponential;
  double kernel_width = 0.25;
  std::uint64_t seed = 0;
  // Use all 2^K presence vectors instead of sampling (K <= 20).
  bool enumerate = false;

  void validate(int segment_count) const;
};

// Weight of a presence vector with `present` of `total` segments switched on.
double sample_weight(const SurrogateConfig& cfg, int present, int total);

// Kernel-SHAP weight for full and empty coalitions.
inline constexpr double kShapleyBoundaryWeight = 1e6;

struct SurrogateFit {
  double intercept = 0.0;
  std::vector<double> coefficients;  // one per segment
};

// Weighted ridge regression of the original-class probability on segment
// presence. Throws SingularSystemError when the system is rank deficient.
SurrogateFit surrogate_fit(const Image& x, const model::Classifier& model, const Segmentation& seg,
                           const SurrogateConfig& cfg, const ablation::FillPolicy& fill, int target_class);

// Each pixel takes its segment's fitted coefficient.
SaliencyMap surrogate_explain(const Image& x, const model::Classifier& model, const Segmentation& seg,
                              const SurrogateConfig& cfg, const ablation::FillPolicy& fill);

class SurrogateExplainer final : public Explainer {
 public:
  SurrogateExplainer(std::string name, int cells_per_side, SurrogateConfig cfg, ablation::FillPolicy fill);

  std::string name() const override { return name_; }
  SaliencyMap explain(const Image& x, const model::Classifier& model, const ExplainContext& ctx) const override;

 private:
  std::string name_;
  int cells_per_side_;
  SurrogateConfig cfg_;
  ablation::FillPolicy fill_;
};

}  // namespace impactbench::explain
