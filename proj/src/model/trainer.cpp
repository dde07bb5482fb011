#include "impactbench/model/trainer.hpp"

#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "impactbench/core/error.hpp"
#include "impactbench/core/random.hpp"

namespace impactbench::model {

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
}

ToyCnn train_toy_cnn(const Architecture& arch, std::span<const Image> images, std::span<const int> labels,
                     const TrainConfig& cfg, TrainSummary* summary) {
  return train_toy_cnn(arch, images, labels, {}, cfg, summary);
}

ToyCnn train_toy_cnn(const Architecture& arch, std::span<const Image> images, std::span<const int> labels,
                     std::span<const Image> abstain, const TrainConfig& cfg, TrainSummary* summary) {
  cfg.validate();
  if (images.size() != labels.size()) throw ShapeError("images and labels differ in length");
  if (images.empty()) throw ConfigError("training set is empty");
  for (const auto set : {images, abstain}) {
    for (const Image& x : set) {
      if (!(x.shape() == arch.input_shape())) throw ShapeError("training image shape does not match architecture");
    }
  }
  const std::vector<double> uniform(static_cast<std::size_t>(arch.num_classes), 1.0 / arch.num_classes);

  ToyCnn model = ToyCnn::initialize(arch, cfg.seed);
  Rng rng(mix64(cfg.seed + 1));
  std::vector<std::size_t> order(images.size() + abstain.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Parameters batch = Parameters::zeros(arch);
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t idx = order[i];
        LossAndGradient lg = idx < images.size()
                                 ? model.loss_gradient(images[idx].data(), labels[idx])
                                 : model.loss_gradient(abstain[idx - images.size()].data(), uniform);
        epoch_loss += lg.loss;
        batch.axpy(1.0, lg.gradient);
      }
      model.apply_update(batch, cfg.learning_rate / static_cast<double>(end - start));
    }
    epoch_loss /= static_cast<double>(order.size());
    spdlog::debug("epoch {}: loss {:.6f}", epoch, epoch_loss);
    if (summary != nullptr) summary->epoch_loss.push_back(epoch_loss);
  }
  return model;
}

double accuracy(const Classifier& model, std::span<const Image> images, std::span<const int> labels) {
  if (images.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (model.classify(images[i]).label() == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(images.size());
}

}  // namespace impactbench::model
