#include "impactbench/explain/occlusion.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "impactbench/core/error.hpp"

namespace impactbench::explain {

namespace {

std::vector<int> window_starts(int side, int window, int stride) {
  std::vector<int> starts;
  for (int s = 0; s + window <= side; s += stride) starts.push_back(s);
  if (starts.back() != side - window) starts.push_back(side - window);
  return starts;
}

// 1 - p_target, summed from the other classes so that it keeps its precision
// when p_target rounds to 1.
double off_target_mass(const Prediction& p, int target_class) {
  double rest = 0.0;
  for (int k = 0; k < p.num_classes(); ++k) {
    if (k != target_class) rest += p.prob(k);
  }
  return rest;
}

}  // namespace

SaliencyMap occlusion_explain(const Image& x, const model::Classifier& model, int window, int stride,
                              const ablation::FillPolicy& fill, int target_class) {
  model::check_input(model, x);
  const int H = x.height(), W = x.width();
  if (window < 1 || window > std::min(H, W)) {
    throw ConfigError(fmt::format("occlusion window {} must lie in [1, {}]", window, std::min(H, W)));
  }
  if (stride < 1 || stride > window) throw ConfigError(fmt::format("occlusion stride {} must lie in [1, window]", stride));

  const double base = off_target_mass(model.classify(x), target_class);
  std::vector<double> total(static_cast<std::size_t>(H) * W, 0.0);
  std::vector<int> count(total.size(), 0);
  for (int r0 : window_starts(H, window, stride)) {
    for (int c0 : window_starts(W, window, stride)) {
      BinaryMask box(H, W);
      for (int r = r0; r < r0 + window; ++r) {
        for (int c = c0; c < c0 + window; ++c) box.set(r, c);
      }
      const double drop = off_target_mass(model.classify(ablation::apply_absence(x, box, fill)), target_class) - base;
      for (int r = r0; r < r0 + window; ++r) {
        for (int c = c0; c < c0 + window; ++c) {
          total[static_cast<std::size_t>(r) * W + c] += drop;
          ++count[static_cast<std::size_t>(r) * W + c];
        }
      }
    }
  }
  for (std::size_t i = 0; i < total.size(); ++i) total[i] /= count[i];
  return SaliencyMap::create(H, W, std::move(total));
}

SaliencyMap occlusion_explain(const Image& x, const model::Classifier& model, int window, int stride,
                              const ablation::FillPolicy& fill) {
  return occlusion_explain(x, model, window, stride, fill, model.classify(x).label());
}

OcclusionExplainer::OcclusionExplainer(std::string name, int window, int stride, ablation::FillPolicy fill)
    : name_(std::move(name)), window_(window), stride_(stride), fill_(std::move(fill)) {
  if (window < 1 || stride < 1 || stride > window) {
    throw ConfigError("occlusion needs window >= 1 and 1 <= stride <= window");
  }
  fill_.validate();
}

SaliencyMap OcclusionExplainer::explain(const Image& x, const model::Classifier& model,
                                        const ExplainContext& ctx) const {
  return occlusion_explain(x, model, window_, stride_, fill_, resolve_target(x, model, ctx));
}

}  // namespace impactbench::explain
