#pragma once

#include <cstddef>

#include "impactbench/core/mask.hpp"
#include "impactbench/core/saliency.hpp"

namespace impactbench::explain {

// The `count` highest-scoring pixels; ties go to the lower row-major index.
BinaryMask binarize_top_count(const SaliencyMap& saliency, std::size_t count);

// Top ceil(q * H * W) pixels, 0 < q <= 1.
BinaryMask binarize_topk(const SaliencyMap& saliency, double fraction);

std::size_t topk_count(std::size_t pixels, double fraction);

}  // namespace impactbench::explain
