#include "impactbench/core/saliency.hpp"

#include <cmath>

#include <fmt/format.h>

#include "impactbench/core/error.hpp"

namespace impactbench {

SaliencyMap::SaliencyMap(int height, int width) : height_(height), width_(width) {
  if (height <= 0 || width <= 0) throw ShapeError("saliency map dimensions must be positive");
  scores_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), 0.0);
}

SaliencyMap SaliencyMap::create(int height, int width, std::vector<double> scores) {
  SaliencyMap map(height, width);
  if (scores.size() != map.scores_.size()) {
    throw ShapeError(fmt::format("saliency length {} does not match {}x{}", scores.size(), height, width));
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw RangeError(fmt::format("saliency score at index {} is not finite", i));
  }
  map.scores_ = std::move(scores);
  return map;
}

}  // namespace impactbench
