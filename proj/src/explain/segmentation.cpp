#include "impactbench/explain/segmentation.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "impactbench/core/error.hpp"

namespace impactbench::explain {

std::vector<int> Segmentation::segment_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(segment_count), 0);
  for (int label : labels) ++sizes[static_cast<std::size_t>(label)];
  return sizes;
}

Segmentation grid_segmentation(int height, int width, int cells_per_side) {
  if (height <= 0 || width <= 0) throw ShapeError("segmentation dimensions must be positive");
  if (cells_per_side < 1 || cells_per_side > std::min(height, width)) {
    throw ConfigError(fmt::format("cells_per_side {} must lie in [1, {}]", cells_per_side, std::min(height, width)));
  }
  // Base cell size is floor(side / cells); the final cell takes the rest.
  auto cell_of = [cells_per_side](int coord, int side) {
    const int base = side / cells_per_side;
    return std::min(coord / base, cells_per_side - 1);
  };
  Segmentation seg;
  seg.height = height;
  seg.width = width;
  seg.segment_count = cells_per_side * cells_per_side;
  seg.labels.resize(static_cast<std::size_t>(height) * width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      seg.labels[static_cast<std::size_t>(r) * width + c] = cell_of(r, height) * cells_per_side + cell_of(c, width);
    }
  }
  return seg;
}

}  // namespace impactbench::explain
