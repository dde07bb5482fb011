#pragma once

#include <span>
#include <vector>

namespace impactbench {

// Per-pixel importance scores, row-major, finite, any sign.
class SaliencyMap {
 public:
  SaliencyMap(int height, int width);  // all zero
  static SaliencyMap create(int height, int width, std::vector<double> scores);

  int height() const { return height_; }
  int width() const { return width_; }
  std::span<const double> scores() const { return scores_; }
  double at(int row, int col) const { return scores_[static_cast<std::size_t>(row) * width_ + col]; }

  friend bool operator==(const SaliencyMap&, const SaliencyMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> scores_;
};

}  // namespace impactbench
