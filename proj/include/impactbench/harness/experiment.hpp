#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "impactbench/adversarial/patch.hpp"
#include "impactbench/core/error.hpp"
#include "impactbench/core/records.hpp"
#include "impactbench/data/dataset.hpp"
#include "impactbench/harness/config.hpp"
#include "impactbench/metrics/impact.hpp"
#include "impactbench/model/classifier.hpp"

namespace impactbench::harness {

// More than 10% of the images aborted.
class RunFailure : public Error {
 public:
  using Error::Error;
};

// One row of a results table: an explainer, and a patch scale for the
// adversarial experiment. `report` is empty when no record survived the
// filters (rendered as n/a).
struct ReportCell {
  std::string explainer;
  std::optional<double> scale;
  std::optional<metrics::MetricsReport> report;
  std::vector<EvalRecord> records;

  friend bool operator==(const ReportCell&, const ReportCell&) = default;
};

struct ScaleTally {
  double scale = 0.0;
  std::size_t attempts = 0;
  std::size_t successes = 0;

  friend bool operator==(const ScaleTally&, const ScaleTally&) = default;
};

struct ArtifactEntry {
  std::string image_id;
  std::string path;  // relative to the output directory

  friend bool operator==(const ArtifactEntry&, const ArtifactEntry&) = default;
};

struct RunManifest {
  std::string experiment;  // general | adversarial
  std::string config_hash;
  std::string version = kVersion;
  std::uint64_t seed = 0;
  std::string reference;  // adversarial only: patched | clean
  std::size_t images_total = 0;
  std::size_t images_correct = 0;
  std::size_t images_aborted = 0;
  std::vector<ScaleTally> attacks;
  std::vector<std::pair<std::string, double>> timings_ms;
  std::vector<ArtifactEntry> artifacts;

  nlohmann::json to_json(bool include_timings = true) const;
};

struct ExperimentResult {
  std::vector<ReportCell> cells;
  RunManifest manifest;
};

// Called once per worker. In-process models are shared; remote endpoints get
// one connection per call.
using ClassifierFactory = std::function<std::shared_ptr<const model::Classifier>()>;

ClassifierFactory make_classifier_factory(const ModelConfig& cfg);

// Experiment 1: classify, keep correct, explain, binarize, ablate, re-classify.
ExperimentResult run_experiment1(const ExperimentConfig& cfg, const std::vector<data::LabelledExample>& examples,
                                 const ClassifierFactory& classifier);
ExperimentResult run_experiment1(const ExperimentConfig& cfg);

// Experiment 2: patch each correctly classified image at every scale, keep
// successful attacks, explain and ablate the patched image.
ExperimentResult run_experiment2(const ExperimentConfig& cfg, const std::vector<data::LabelledExample>& examples,
                                 const ClassifierFactory& classifier, const adversarial::Patch& patch);
ExperimentResult run_experiment2(const ExperimentConfig& cfg);

// Loads cfg.patch.file, or trains a patch on the correctly classified images
// whose label differs from the target.
adversarial::Patch obtain_patch(const ExperimentConfig& cfg, const std::vector<data::LabelledExample>& examples,
                                const model::Classifier& model);

}  // namespace impactbench::harness
