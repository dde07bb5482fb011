#include "impactbench/model/classifier.hpp"

#include <fmt/format.h>

#include "impactbench/core/error.hpp"

namespace impactbench::model {

std::vector<double> Classifier::grad_input(const Image&, int, GradientTarget) const {
  throw ConfigError("classifier does not provide input gradients");
}

void check_input(const Classifier& model, const Image& x) {
  const Shape want = model.input_shape();
  if (!(x.shape() == want)) {
    throw ShapeError(fmt::format("image shape {}x{}x{} does not match classifier input {}x{}x{}", x.channels(),
                                 x.height(), x.width(), want.channels, want.height, want.width));
  }
}

}  // namespace impactbench::model
