#include "impactbench/core/mask.hpp"

#include <bit>
#include <numeric>

#include <fmt/format.h>

#include "impactbench/core/error.hpp"
#include "impactbench/core/random.hpp"

namespace impactbench {

BinaryMask::BinaryMask(int height, int width)
    : height_(height), width_(width), words_per_row_((static_cast<std::size_t>(width) + 63) / 64) {
  if (height <= 0 || width <= 0) throw ShapeError("mask dimensions must be positive");
  words_.assign(words_per_row_ * static_cast<std::size_t>(height), 0);
}

BinaryMask BinaryMask::full(int height, int width) {
  BinaryMask mask(height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) mask.set(r, c);
  }
  return mask;
}

BinaryMask BinaryMask::from_pixels(int height, int width, const std::vector<std::size_t>& pixels) {
  BinaryMask mask(height, width);
  for (std::size_t p : pixels) {
    if (p >= mask.pixels()) throw RangeError(fmt::format("pixel index {} outside {}x{} mask", p, height, width));
    mask.set(p);
  }
  return mask;
}

void BinaryMask::set(int row, int col, bool value) {
  std::uint64_t& word = words_[word_index(row, col)];
  const std::uint64_t bit = std::uint64_t{1} << (col & 63);
  const bool was = (word & bit) != 0;
  if (value && !was) {
    word |= bit;
    ++area_;
  } else if (!value && was) {
    word &= ~bit;
    --area_;
  }
}

std::vector<std::size_t> BinaryMask::set_pixels() const {
  std::vector<std::size_t> out;
  out.reserve(area_);
  for (int r = 0; r < height_; ++r) {
    for (int c = 0; c < width_; ++c) {
      if (test(r, c)) out.push_back(static_cast<std::size_t>(r) * width_ + c);
    }
  }
  return out;
}

IntersectionUnion mask_intersection_union(const BinaryMask& a, const BinaryMask& c) {
  if (a.height() != c.height() || a.width() != c.width()) {
    throw ShapeError(fmt::format("mask shapes differ: {}x{} vs {}x{}", a.height(), a.width(), c.height(),
                                 c.width()));
  }
  IntersectionUnion result;
  const auto& wa = a.words();
  const auto& wc = c.words();
  for (std::size_t i = 0; i < wa.size(); ++i) {
    result.intersection += static_cast<std::size_t>(std::popcount(wa[i] & wc[i]));
    result.union_ += static_cast<std::size_t>(std::popcount(wa[i] | wc[i]));
  }
  return result;
}

BinaryMask mask_complement(const BinaryMask& mask) {
  BinaryMask out(mask.height(), mask.width());
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) out.set(r, c, !mask.test(r, c));
  }
  return out;
}

BinaryMask mask_random(int height, int width, std::size_t area, std::uint64_t seed) {
  BinaryMask mask(height, width);
  if (area > mask.pixels()) {
    throw RangeError(fmt::format("mask area {} exceeds {}x{}", area, height, width));
  }
  std::vector<std::size_t> order(mask.pixels());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first `area` slots are a uniform sample.
  for (std::size_t i = 0; i < area; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
    mask.set(order[i]);
  }
  return mask;
}

}  // namespace impactbench
