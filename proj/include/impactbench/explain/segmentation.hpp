#pragma once

#include <vector>

namespace impactbench::explain {

struct Segmentation {
  int height = 0;
  int width = 0;
  int segment_count = 0;
  std::vector<int> labels;  // row-major segment index per pixel

  std::vector<int> segment_sizes() const;
};

// Rectangular cells_per_side x cells_per_side grid of floor(side / cells)
// pixel cells; the last row and column of cells absorb the remainder.
Segmentation grid_segmentation(int height, int width, int cells_per_side);

}  // namespace impactbench::explain
