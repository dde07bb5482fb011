#include "impactbench/core/prediction.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "impactbench/core/error.hpp"

namespace impactbench {

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

Prediction Prediction::from_probs(std::vector<double> probs) {
  if (probs.empty()) throw RangeError("probability vector is empty");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!std::isfinite(probs[i]) || probs[i] < 0.0 || probs[i] > 1.0) {
      throw RangeError(fmt::format("probability {} = {} is outside [0,1]", i, probs[i]));
    }
    total += probs[i];
  }
  if (std::abs(total - 1.0) > kProbabilitySumTolerance) {
    throw RangeError(fmt::format("probabilities sum to {}, expected 1", total));
  }
  const int label = argmax(probs);
  return Prediction(label, std::move(probs));
}

}  // namespace impactbench
