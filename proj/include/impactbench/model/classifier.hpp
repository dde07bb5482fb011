#pragma once

#include <vector>

#include "impactbench/core/image.hpp"
#include "impactbench/core/prediction.hpp"

namespace impactbench::model {

// Quantity differentiated by grad_input.
enum class GradientTarget {
  kLogit,        // pre-softmax score of the class
  kProbability,  // post-softmax probability of the class
};

// The network N: maps an image to a decision and its probabilities.
// Implementations must be deterministic and safe for concurrent const calls.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual Prediction classify(const Image& x) const = 0;
  virtual Shape input_shape() const = 0;
  virtual int num_classes() const = 0;
  virtual bool gradient_capable() const { return false; }

  // d(target of class_index)/dx, same layout as x.data(). Throws
  // ConfigError when the classifier is not gradient capable.
  virtual std::vector<double> grad_input(const Image& x, int class_index,
                                         GradientTarget target = GradientTarget::kLogit) const;
};

// Throws ShapeError if x does not match the classifier's input shape.
void check_input(const Classifier& model, const Image& x);

}  // namespace impactbench::model
