#pragma once

#include "impactbench/ablation/absence.hpp"
#include "impactbench/explain/explainer.hpp"

namespace impactbench::explain {

// Slides a window x window patch with stride <= window (plus a final
// position flush with the bottom/right edge), fills it per policy and
// records the drop in the target-class probability. A pixel's score is the
// mean drop over the windows covering it. The drop is computed as the gain
// in off-target mass, which equals the probability drop but does not vanish
// when the target probability saturates at 1.
SaliencyMap occlusion_explain(const Image& x, const model::Classifier& model, int window, int stride,
                              const ablation::FillPolicy& fill, int target_class);
SaliencyMap occlusion_explain(const Image& x, const model::Classifier& model, int window, int stride,
                              const ablation::FillPolicy& fill);

class OcclusionExplainer final : public Explainer {
 public:
  OcclusionExplainer(std::string name, int window, int stride, ablation::FillPolicy fill);

  std::string name() const override { return name_; }
  SaliencyMap explain(const Image& x, const model::Classifier& model, const ExplainContext& ctx) const override;

 private:
  std::string name_;
  int window_;
  int stride_;
  ablation::FillPolicy fill_;
};

}  // namespace impactbench::explain
