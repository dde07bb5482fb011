#include "impactbench/explain/binarize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "impactbench/core/error.hpp"

namespace impactbench::explain {

std::size_t topk_count(std::size_t pixels, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0) throw ConfigError(fmt::format("fraction {} must lie in (0,1]", fraction));
  return std::min(pixels, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(pixels))));
}

BinaryMask binarize_top_count(const SaliencyMap& saliency, std::size_t count) {
  const auto scores = saliency.scores();
  if (count > scores.size()) {
    throw RangeError(fmt::format("cannot select {} of {} pixels", count, scores.size()));
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto before = [&scores](std::size_t a, std::size_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  };
  if (count < order.size()) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(), before);
  }
  BinaryMask mask(saliency.height(), saliency.width());
  for (std::size_t i = 0; i < count; ++i) mask.set(order[i]);
  return mask;
}

BinaryMask binarize_topk(const SaliencyMap& saliency, double fraction) {
  return binarize_top_count(saliency, topk_count(saliency.scores().size(), fraction));
}

}  // namespace impactbench::explain
