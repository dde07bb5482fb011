#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "impactbench/model/toy_cnn.hpp"

namespace impactbench::model {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainSummary {
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
};

// Plain mini-batch gradient descent on cross-entropy, starting from
// ToyCnn::initialize(arch, cfg.seed). Single-threaded and deterministic.
ToyCnn train_toy_cnn(const Architecture& arch, std::span<const Image> images, std::span<const int> labels,
                     const TrainConfig& cfg, TrainSummary* summary = nullptr);

// As above, with extra `abstain` inputs trained toward the uniform
// distribution (evidence-free images should not favour any class).
ToyCnn train_toy_cnn(const Architecture& arch, std::span<const Image> images, std::span<const int> labels,
                     std::span<const Image> abstain, const TrainConfig& cfg, TrainSummary* summary = nullptr);

// Fraction of images whose predicted label matches.
double accuracy(const Classifier& model, std::span<const Image> images, std::span<const int> labels);

}  // namespace impactbench::model
