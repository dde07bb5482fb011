#include "impactbench/explain/path_attribution.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "impactbench/core/error.hpp"
#include "impactbench/core/random.hpp"

namespace impactbench::explain {

namespace {

void require_gradients(const model::Classifier& model) {
  if (!model.gradient_capable()) throw ConfigError("path attribution needs a gradient-capable classifier");
}

// b + alpha (x - b), clamped against rounding just outside [0,1].
Image path_point(const Image& x, const Image& b, double alpha) {
  std::vector<double> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(b.data()[i] + alpha * (x.data()[i] - b.data()[i]), 0.0, 1.0);
  }
  return Image::create(x.shape(), std::move(out));
}

}  // namespace

void PathAttributionConfig::validate() const {
  if (steps < 1) throw ConfigError("path attribution needs at least one step/sample");
}

SaliencyMap sum_channels(const Shape& shape, const std::vector<double>& attribution) {
  const std::size_t plane = shape.pixels();
  std::vector<double> scores(plane, 0.0);
  for (int c = 0; c < shape.channels; ++c) {
    for (std::size_t p = 0; p < plane; ++p) scores[p] += attribution[static_cast<std::size_t>(c) * plane + p];
  }
  return SaliencyMap::create(shape.height, shape.width, std::move(scores));
}

std::vector<double> integrated_gradients_elementwise(const Image& x, const Image& baseline,
                                                     const model::Classifier& model, int target_class,
                                                     const PathAttributionConfig& cfg) {
  require_gradients(model);
  cfg.validate();
  model::check_input(model, x);
  if (!(baseline.shape() == x.shape())) throw ShapeError("baseline shape does not match the input");

  std::vector<double> grad_sum(x.data().size(), 0.0);
  for (int i = 0; i < cfg.steps; ++i) {
    const double alpha = (i + 0.5) / cfg.steps;
    const std::vector<double> g = model.grad_input(path_point(x, baseline, alpha), target_class, cfg.gradient_target);
    for (std::size_t j = 0; j < g.size(); ++j) grad_sum[j] += g[j];
  }
  std::vector<double> attribution(grad_sum.size());
  for (std::size_t j = 0; j < attribution.size(); ++j) {
    attribution[j] = (x.data()[j] - baseline.data()[j]) * (grad_sum[j] / cfg.steps);
  }
  return attribution;
}

SaliencyMap integrated_gradients(const Image& x, const model::Classifier& model, const PathAttributionConfig& cfg,
                                 int target_class) {
  if (cfg.baseline != BaselinePolicy::kZeroImage) {
    throw ConfigError("integrated gradients supports the zero-image baseline only");
  }
  const Image zero = Image::filled(x.shape(), 0.0);
  return sum_channels(x.shape(), integrated_gradients_elementwise(x, zero, model, target_class, cfg));
}

SaliencyMap integrated_gradients(const Image& x, const model::Classifier& model, const PathAttributionConfig& cfg) {
  return integrated_gradients(x, model, cfg, model.classify(x).label());
}

SaliencyMap expected_gradients(const Image& x, const model::Classifier& model, const std::vector<Image>& baselines,
                               const PathAttributionConfig& cfg, int target_class) {
  require_gradients(model);
  cfg.validate();
  model::check_input(model, x);
  if (baselines.empty()) throw ConfigError("expected gradients needs at least one baseline");
  for (const Image& b : baselines) {
    if (!(b.shape() == x.shape())) throw ShapeError("baseline shape does not match the input");
  }

  Rng rng(cfg.seed);
  std::vector<double> total(x.data().size(), 0.0);
  for (int i = 0; i < cfg.steps; ++i) {
    const Image& b = baselines[static_cast<std::size_t>(rng.below(baselines.size()))];
    const double alpha = cfg.stratified_alpha ? (i + 0.5) / cfg.steps : rng.uniform();
    const std::vector<double> g = model.grad_input(path_point(x, b, alpha), target_class, cfg.gradient_target);
    for (std::size_t j = 0; j < g.size(); ++j) total[j] += (x.data()[j] - b.data()[j]) * g[j];
  }
  for (double& v : total) v /= cfg.steps;
  return sum_channels(x.shape(), total);
}

SaliencyMap expected_gradients(const Image& x, const model::Classifier& model, const std::vector<Image>& baselines,
                               const PathAttributionConfig& cfg) {
  return expected_gradients(x, model, baselines, cfg, model.classify(x).label());
}

IntegratedGradientsExplainer::IntegratedGradientsExplainer(std::string name, PathAttributionConfig cfg)
    : name_(std::move(name)), cfg_(cfg) {
  cfg_.validate();
  if (cfg_.baseline != BaselinePolicy::kZeroImage) {
    throw ConfigError("integrated gradients supports the zero-image baseline only");
  }
}

SaliencyMap IntegratedGradientsExplainer::explain(const Image& x, const model::Classifier& model,
                                                  const ExplainContext& ctx) const {
  return integrated_gradients(x, model, cfg_, resolve_target(x, model, ctx));
}

ExpectedGradientsExplainer::ExpectedGradientsExplainer(std::string name, std::vector<Image> baselines,
                                                       PathAttributionConfig cfg)
    : name_(std::move(name)), baselines_(std::move(baselines)), cfg_(cfg) {
  cfg_.validate();
  if (baselines_.empty()) throw ConfigError("expected gradients needs at least one baseline");
}

SaliencyMap ExpectedGradientsExplainer::explain(const Image& x, const model::Classifier& model,
                                                const ExplainContext& ctx) const {
  PathAttributionConfig cfg = cfg_;
  cfg.seed = ctx.seed;
  return expected_gradients(x, model, baselines_, cfg, resolve_target(x, model, ctx));
}

}  // namespace impactbench::explain
