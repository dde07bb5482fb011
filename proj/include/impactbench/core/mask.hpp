#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace impactbench {

// Spatial pixel set stored as one packed 64-bit word row per image row, with
// the set-pixel count cached.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width);  // all false
  static BinaryMask full(int height, int width);
  static BinaryMask from_pixels(int height, int width, const std::vector<std::size_t>& pixels);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_); }
  std::size_t area() const { return area_; }
  bool empty() const { return area_ == 0; }

  bool test(int row, int col) const {
    return (words_[word_index(row, col)] >> (col & 63)) & 1U;
  }
  bool test(std::size_t pixel) const {
    return test(static_cast<int>(pixel / width_), static_cast<int>(pixel % width_));
  }
  void set(int row, int col, bool value = true);
  void set(std::size_t pixel, bool value = true) {
    set(static_cast<int>(pixel / width_), static_cast<int>(pixel % width_), value);
  }

  // Row-major indices of set pixels.
  std::vector<std::size_t> set_pixels() const;

  std::size_t words_per_row() const { return words_per_row_; }
  const std::vector<std::uint64_t>& words() const { return words_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t word_index(int row, int col) const {
    return static_cast<std::size_t>(row) * words_per_row_ + static_cast<std::size_t>(col >> 6);
  }

  int height_ = 0;
  int width_ = 0;
  std::size_t words_per_row_ = 0;
  std::size_t area_ = 0;
  std::vector<std::uint64_t> words_;
};

struct IntersectionUnion {
  std::size_t intersection = 0;
  std::size_t union_ = 0;

  double iou() const { return union_ == 0 ? 0.0 : static_cast<double>(intersection) / static_cast<double>(union_); }
  friend bool operator==(const IntersectionUnion&, const IntersectionUnion&) = default;
};

// Throws ShapeError on dimension mismatch.
IntersectionUnion mask_intersection_union(const BinaryMask& a, const BinaryMask& c);

BinaryMask mask_complement(const BinaryMask& mask);

// Exactly `area` distinct pixels chosen uniformly; deterministic per seed.
BinaryMask mask_random(int height, int width, std::size_t area, std::uint64_t seed);

}  // namespace impactbench
