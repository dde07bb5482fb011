#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "impactbench/ablation/absence.hpp"
#include "impactbench/adversarial/patch.hpp"
#include "impactbench/data/dataset.hpp"
#include "impactbench/explain/explainer.hpp"
#include "impactbench/metrics/impact.hpp"
#include "impactbench/model/toy_cnn.hpp"
#include "impactbench/model/trainer.hpp"

namespace impactbench::harness {

inline constexpr const char* kVersion = "0.1.0";

struct DatasetConfig {
  enum class Kind { kSynthetic, kFolder };
  Kind kind = Kind::kSynthetic;
  data::SyntheticSpec synthetic;
  std::filesystem::path root;
  std::filesystem::path labels = "labels.csv";
  int num_classes = 0;

  std::vector<data::LabelledExample> load() const;
};

struct ModelConfig {
  std::filesystem::path weights;        // in-process toy CNN
  std::optional<std::string> endpoint;  // remote classifier (tcp:// or stdio:)
  int timeout_ms = 10000;
};

struct TrainingConfig {
  int conv_channels = 16;
  int kernel = 3;
  model::Activation activation = model::Activation::kRelu;
  model::TrainConfig train{100, 16, 0.1, 1};
  // Feature-free images trained toward the uniform distribution (synthetic only).
  int abstain_samples = 0;
  std::optional<DatasetConfig> dataset;  // defaults to the experiment dataset
  std::optional<DatasetConfig> held_out;
};

struct ExplainerConfig {
  std::string type;   // occlusion | lime | kernel-shap | integrated-gradients | expected-gradients | oracle | random
  std::string label;  // report name; defaults to type
  nlohmann::json params = nlohmann::json::object();
};

struct BinarizeConfig {
  enum class Mode { kFraction, kPatchArea };
  Mode mode = Mode::kFraction;
  double fraction = 0.10;
};

// Which prediction the adversarial ablation is compared against.
enum class AdversarialReference { kPatched, kClean };

struct PatchConfig {
  adversarial::PatchTrainingConfig training;
  std::optional<std::filesystem::path> file;
  AdversarialReference reference = AdversarialReference::kPatched;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  ModelConfig model;
  std::optional<TrainingConfig> training;
  std::vector<ExplainerConfig> explainers;
  BinarizeConfig binarize;
  ablation::FillPolicy fill = ablation::FillPolicy::image_mean();
  metrics::MetricsConfig metrics;
  PatchConfig patch;
  std::uint64_t seed = 1;
  int workers = 1;
  std::filesystem::path output_dir = "out";
  bool write_artifacts = true;

  // Throws ConfigError on any missing or invalid field.
  static ExperimentConfig from_json(const nlohmann::json& j);
  // Relative paths are resolved against `base` when it is non-empty.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base);
  nlohmann::json to_json() const;
  // Hash of every field that can influence results (not workers/output_dir).
  std::string hash() const;

  void validate_for_evaluation() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

// Builds one explainer. `baseline_pool` feeds expected gradients'
// dataset-sample baselines.
std::unique_ptr<explain::Explainer> make_explainer(const ExplainerConfig& cfg, const ablation::FillPolicy& fill,
                                                   const std::vector<Image>& baseline_pool);

}  // namespace impactbench::harness
