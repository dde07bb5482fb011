#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "impactbench/model/classifier.hpp"

namespace impactbench::model {

enum class Activation { kRelu, kIdentity };

std::string to_string(Activation activation);
Activation activation_from_string(const std::string& name);

// conv(same padding) -> activation -> 2x2 average pool -> flatten -> dense -> softmax
struct Architecture {
  int in_channels = 1;
  int height = 24;
  int width = 24;
  int conv_channels = 4;
  int kernel = 3;  // odd
  int num_classes = 2;
  Activation activation = Activation::kRelu;

  int pooled_height() const { return height / 2; }
  int pooled_width() const { return width / 2; }
  std::size_t conv_weight_count() const;
  std::size_t dense_inputs() const;
  std::size_t dense_weight_count() const;
  Shape input_shape() const { return Shape{in_channels, height, width}; }

  void validate() const;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct Parameters {
  std::vector<double> conv_weights;   // [out][in][k][k]
  std::vector<double> conv_bias;      // [out]
  std::vector<double> dense_weights;  // [class][dense input]
  std::vector<double> dense_bias;     // [class]

  static Parameters zeros(const Architecture& arch);
  void axpy(double alpha, const Parameters& other);
  friend bool operator==(const Parameters&, const Parameters&) = default;
};

struct ForwardResult {
  std::vector<double> logits;
  Prediction prediction;
};

struct LossAndGradient {
  double loss = 0.0;
  Parameters gradient;
};

class ToyCnn final : public Classifier {
 public:
  ToyCnn(Architecture arch, Parameters params);

  // Uniform in [-s, s], s = 1/sqrt(fan_in) per layer.
  static ToyCnn initialize(const Architecture& arch, std::uint64_t seed);

  ForwardResult forward(const Image& x) const;

  // Raw entry points over unchecked intensities (used by finite-difference
  // oracles and the patch optimizer, whose probes may leave [0,1]).
  std::vector<double> logits(std::span<const double> x) const;
  std::vector<double> input_gradient(std::span<const double> x, int class_index,
                                     GradientTarget target = GradientTarget::kLogit) const;
  // Cross-entropy loss and its parameter gradient for one example.
  LossAndGradient loss_gradient(std::span<const double> x, int label) const;
  // Same against an arbitrary target distribution.
  LossAndGradient loss_gradient(std::span<const double> x, std::span<const double> target) const;

  Prediction classify(const Image& x) const override;
  Shape input_shape() const override { return arch_.input_shape(); }
  int num_classes() const override { return arch_.num_classes; }
  bool gradient_capable() const override { return true; }
  std::vector<double> grad_input(const Image& x, int class_index,
                                 GradientTarget target = GradientTarget::kLogit) const override;

  const Architecture& architecture() const { return arch_; }
  const Parameters& parameters() const { return params_; }
  // Gradient step; used by the trainer only.
  void apply_update(const Parameters& gradient, double step);

 private:
  struct Activations {
    std::vector<double> pre;     // conv output before activation [out][h][w]
    std::vector<double> pooled;  // [out][ph][pw]
    std::vector<double> logits;
  };

  Activations run(std::span<const double> x) const;
  // Back-propagates d(loss)/d(logits) to d(loss)/d(pre-activation).
  std::vector<double> backprop_to_pre(const Activations& acts, std::span<const double> dlogits) const;

  Architecture arch_;
  Parameters params_;
};

}  // namespace impactbench::model
