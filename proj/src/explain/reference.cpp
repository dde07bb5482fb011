#include "impactbench/explain/reference.hpp"

#include "impactbench/core/error.hpp"
#include "impactbench/core/random.hpp"

namespace impactbench::explain {

SaliencyMap OracleExplainer::explain(const Image& x, const model::Classifier&, const ExplainContext& ctx) const {
  if (ctx.ground_truth == nullptr) throw ConfigError("oracle explainer needs a ground-truth region");
  const BinaryMask& truth = *ctx.ground_truth;
  if (truth.height() != x.height() || truth.width() != x.width()) {
    throw ShapeError("ground-truth region does not match the image");
  }
  std::vector<double> scores(truth.pixels(), 0.0);
  for (std::size_t p : truth.set_pixels()) scores[p] = 1.0;
  return SaliencyMap::create(x.height(), x.width(), std::move(scores));
}

SaliencyMap RandomExplainer::explain(const Image& x, const model::Classifier&, const ExplainContext& ctx) const {
  Rng rng(ctx.seed);
  std::vector<double> scores(x.shape().pixels());
  for (double& s : scores) s = rng.uniform();
  return SaliencyMap::create(x.height(), x.width(), std::move(scores));
}

}  // namespace impactbench::explain
