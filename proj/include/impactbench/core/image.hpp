#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace impactbench {

struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t pixels() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
  std::size_t size() const { return static_cast<std::size_t>(channels) * pixels(); }

  friend bool operator==(const Shape&, const Shape&) = default;
};

// Dense channel-major image with intensities in [0, 1].
class Image {
 public:
  // Validates dimensions, length and range; throws ShapeError / RangeError.
  static Image create(Shape shape, std::vector<double> data);
  static Image filled(Shape shape, double value);

  const Shape& shape() const { return shape_; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }

  std::span<const double> data() const { return data_; }
  std::vector<double> to_vector() const { return data_; }

  std::size_t index(int channel, int row, int col) const {
    return (static_cast<std::size_t>(channel) * shape_.height + row) * shape_.width + col;
  }
  double at(int channel, int row, int col) const { return data_[index(channel, row, col)]; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  Image(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {}

  Shape shape_;
  std::vector<double> data_;
};

Image new_image_checked(int channels, int height, int width, std::vector<double> data);

}  // namespace impactbench
