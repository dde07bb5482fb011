#include "impactbench/core/image.hpp"

#include <cmath>

#include <fmt/format.h>

#include "impactbench/core/error.hpp"

namespace impactbench {

Image Image::create(Shape shape, std::vector<double> data) {
  if (shape.channels <= 0 || shape.height <= 0 || shape.width <= 0) {
    throw ShapeError(fmt::format("image dimensions must be positive, got {}x{}x{}", shape.channels,
                                 shape.height, shape.width));
  }
  if (data.size() != shape.size()) {
    throw ShapeError(fmt::format("image data length {} does not match {}x{}x{} = {}", data.size(),
                                 shape.channels, shape.height, shape.width, shape.size()));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i]) || data[i] < 0.0 || data[i] > 1.0) {
      throw RangeError(fmt::format("image element {} = {} is outside [0,1]", i, data[i]));
    }
  }
  return Image(shape, std::move(data));
}

Image Image::filled(Shape shape, double value) {
  return create(shape, std::vector<double>(shape.size(), value));
}

Image new_image_checked(int channels, int height, int width, std::vector<double> data) {
  return Image::create(Shape{channels, height, width}, std::move(data));
}

}  // namespace impactbench
