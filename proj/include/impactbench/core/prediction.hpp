#pragma once

#include <span>
#include <vector>

namespace impactbench {

inline constexpr double kProbabilitySumTolerance = 1e-5;

// Class decision plus the probability vector it came from.
class Prediction {
 public:
  // Throws RangeError unless every entry is in [0,1] and the sum is within
  // kProbabilitySumTolerance of 1. Label is the argmax, lowest index on ties.
  static Prediction from_probs(std::vector<double> probs);

  int label() const { return label_; }
  double confidence() const { return probs_[static_cast<std::size_t>(label_)]; }
  double prob(int cls) const { return probs_.at(static_cast<std::size_t>(cls)); }
  std::span<const double> probs() const { return probs_; }
  int num_classes() const { return static_cast<int>(probs_.size()); }

  friend bool operator==(const Prediction&, const Prediction&) = default;

 private:
  Prediction(int label, std::vector<double> probs) : label_(label), probs_(std::move(probs)) {}

  int label_ = 0;
  std::vector<double> probs_;
};

// Index of the largest element; lowest index wins ties.
int argmax(std::span<const double> values);

// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace impactbench
