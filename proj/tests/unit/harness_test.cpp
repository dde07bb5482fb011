#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "impactbench/core/error.hpp"
#include "impactbench/harness/config.hpp"
#include "impactbench/harness/experiment.hpp"
#include "impactbench/harness/report.hpp"
#include "impactbench/model/trainer.hpp"
#include "impactbench/model/weights_io.hpp"
#include "support.hpp"

using namespace impactbench;
using namespace impactbench::harness;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

json small_config() {
  return json::parse(R"({
    "dataset": {"kind": "synthetic", "num_classes": 3, "image_side": 12, "samples_per_class": 6,
                "feature_side": 4, "seed": 4},
    "model": {"weights": "model.bin"},
    "explainers": [
      {"type": "oracle"}, {"type": "random"},
      {"type": "occlusion", "params": {"window": 3, "stride": 3}},
      {"type": "integrated-gradients", "params": {"steps": 8}},
      {"type": "expected-gradients", "params": {"steps": 8, "baseline_count": 4}},
      {"type": "lime", "params": {"cells": 3, "samples": 40}},
      {"type": "kernel-shap", "label": "shap", "params": {"cells": 3, "samples": 40}}
    ],
    "binarize_fraction": 0.1,
    "patch": {"target_class": 0, "iterations": 5, "patch_side": 4, "scales": [0.3, 0.5], "seed": 2},
    "seed": 7,
    "write_artifacts": false
  })");
}

// Small trained model shared by the tests in this file.
const fs::path& model_path() {
  static const fs::path path = [] {
    const fs::path dir = fs::temp_directory_path() / "impactbench_harness";
    fs::create_directories(dir);
    data::SyntheticSpec spec;
    spec.num_classes = 3;
    spec.image_side = 12;
    spec.feature_side = 4;
    spec.samples_per_class = 60;
    spec.seed = 99;
    const auto train = data::generate_planted(spec);
    const model::Architecture arch{1, 12, 12, 4, 3, 3, model::Activation::kRelu};
    model::TrainConfig tc;
    tc.epochs = 15;
    tc.learning_rate = 0.1;
    const auto net = model::train_toy_cnn(arch, data::images_of(train), data::labels_of(train), tc);
    model::save_weights(dir / "model.bin", net);
    return dir / "model.bin";
  }();
  return path;
}

ExperimentConfig config_with(const json& j) {
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  cfg.model.weights = model_path();
  return cfg;
}

}  // namespace

TEST(Config, RoundTripAndHash) {
  const ExperimentConfig cfg = ExperimentConfig::from_json(small_config());
  const ExperimentConfig back = ExperimentConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());
  EXPECT_EQ(back.hash(), cfg.hash());
  EXPECT_EQ(cfg.explainers[6].label, "shap");
  EXPECT_EQ(cfg.explainers[0].label, "oracle");

  json j = small_config();
  j["workers"] = 4;
  j["output_dir"] = "elsewhere";
  EXPECT_EQ(ExperimentConfig::from_json(j).hash(), cfg.hash());
  j["seed"] = 8;
  EXPECT_NE(ExperimentConfig::from_json(j).hash(), cfg.hash());
}

TEST(Config, RejectsBadInput) {
  auto expect_bad = [](json j) { EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError) << j.dump(); };
  json j = small_config();
  j["explainers"] = json::array();
  EXPECT_THROW(ExperimentConfig::from_json(j).validate_for_evaluation(), ConfigError);
  j = small_config();
  j["mystery"] = 1;
  expect_bad(j);
  j = small_config();
  j["explainers"][0]["type"] = "gradcam";
  expect_bad(j);
  j = small_config();
  j["explainers"][2]["params"]["window"] = 0;
  expect_bad(j);
  j = small_config();
  j["binarize_fraction"] = 0.0;
  expect_bad(j);
  j = small_config();
  j["tau"] = 1.5;
  expect_bad(j);
  j = small_config();
  j["explainers"][1]["label"] = "oracle";
  expect_bad(j);
  j = small_config();
  j["explainers"][1]["label"] = "a,b";
  expect_bad(j);
  j = small_config();
  j["patch"]["scales"] = {0.3, 1.0};
  expect_bad(j);
  j = small_config();
  j["fill"] = "inpaint";
  expect_bad(j);
  j = small_config();
  j.erase("model");
  EXPECT_THROW(ExperimentConfig::from_json(j).validate_for_evaluation(), ConfigError);
  try {
    j = small_config();
    j["dataset"]["image_sid"] = 3;
    ExperimentConfig::from_json(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("image_sid"), std::string::npos);
  }
}

TEST(Config, RelativePathsFollowTheConfigFile) {
  const fs::path dir = fs::temp_directory_path() / "impactbench_cfgdir";
  fs::create_directories(dir);
  std::ofstream(dir / "c.json") << small_config().dump();
  const ExperimentConfig cfg = load_config(dir / "c.json");
  EXPECT_EQ(cfg.model.weights, dir / "model.bin");
  EXPECT_THROW(load_config(dir / "absent.json"), ConfigError);
  std::ofstream(dir / "broken.json") << "{";
  EXPECT_THROW(load_config(dir / "broken.json"), ConfigError);
  fs::remove_all(dir);
}

TEST(Report, Formatting) {
  EXPECT_EQ(format_percent(0.761), "76.10%");
  metrics::MetricsReport r;
  r.n = 3;
  r.impact_score = 0.761;
  r.impact_strict = 0.5073;
  EXPECT_EQ(format_impact_pair(r), "76.10% / 50.73%");
  std::vector<ReportCell> cells(2);
  cells[0].explainer = "occlusion";
  cells[0].report = r;
  cells[1].explainer = "lime";
  cells[1].scale = 0.3;
  EXPECT_EQ(format_csv(cells),
            "explainer,scale,n,I,I_strict,I_coverage\n"
            "occlusion,,3,0.761000,0.507300,n/a\n"
            "lime,0.3,0,n/a,n/a,n/a\n");
}

TEST(Experiment1, ProducesOneCellPerExplainer) {
  const ExperimentConfig cfg = config_with(small_config());
  const auto result = run_experiment1(cfg);
  ASSERT_EQ(result.cells.size(), 7u);
  EXPECT_EQ(result.manifest.images_total, 18u);
  EXPECT_EQ(result.manifest.images_aborted, 0u);
  for (const auto& cell : result.cells) {
    ASSERT_TRUE(cell.report.has_value()) << cell.explainer;
    EXPECT_EQ(cell.report->n, result.manifest.images_correct);
    EXPECT_LE(cell.report->impact_strict, cell.report->impact_score);
    EXPECT_FALSE(cell.report->impact_coverage.has_value());
    for (const auto& rec : cell.records) {
      EXPECT_FALSE(rec.coverage.has_value());
      validate_record(rec);
    }
  }
}

TEST(Experiment1, WorkerCountDoesNotChangeResults) {
  ExperimentConfig one = config_with(small_config());
  ExperimentConfig four = one;
  four.workers = 4;
  const auto a = run_experiment1(one);
  const auto b = run_experiment1(four);
  EXPECT_EQ(format_csv(a.cells), format_csv(b.cells));
  EXPECT_EQ(a.cells, b.cells);
  EXPECT_EQ(a.manifest.to_json(false), b.manifest.to_json(false));
}

TEST(Experiment1, ArtifactsAndReportFiles) {
  const fs::path out = fs::temp_directory_path() / "impactbench_exp1_out";
  fs::remove_all(out);
  json j = small_config();
  j["write_artifacts"] = true;
  ExperimentConfig cfg = config_with(j);
  cfg.output_dir = out;
  const auto result = run_experiment1(cfg);
  emit_report(result, out);
  for (const char* name : {"report.json", "report.csv", "report.md", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(out / name)) << name;
  }
  ASSERT_FALSE(result.manifest.artifacts.empty());
  const json artifact = json::parse(std::ifstream(out / result.manifest.artifacts.front().path));
  EXPECT_EQ(artifact.at("image_id"), result.manifest.artifacts.front().image_id);

  std::ifstream in(out / "report.json");
  const ExperimentResult back = result_from_json(json::parse(in));
  EXPECT_EQ(back.cells, result.cells);
  EXPECT_EQ(format_csv(back.cells), format_csv(result.cells));
  EXPECT_EQ(back.manifest.to_json(), result.manifest.to_json());
  fs::remove_all(out);
}

TEST(Experiment1, AbortBudget) {
  json j = small_config();
  j["explainers"] = json::parse(R"([{"type": "random"}, {"type": "occlusion"}])");
  ExperimentConfig cfg = config_with(j);
  const auto examples = cfg.dataset.load();
  const Shape shape = examples.front().image.shape();
  auto failing = [&](std::size_t failures) -> ClassifierFactory {
    // Fails on the first `failures` dataset images (recognised by content).
    std::vector<Image> bad;
    for (std::size_t i = 0; i < failures; ++i) bad.push_back(examples[i].image);
    auto model = std::make_shared<testing_support::FunctionModel>(shape, [bad](const Image& x) {
      for (const auto& b : bad) {
        if (b == x) throw IoError("simulated failure");
      }
      return 0.9;
    });
    return [model] { return model; };
  };
  const auto ok = run_experiment1(cfg, examples, failing(1));
  EXPECT_EQ(ok.manifest.images_aborted, 1u);
  EXPECT_THROW(run_experiment1(cfg, examples, failing(2)), RunFailure);
}

TEST(Experiment2, CellsPerScaleAndCoverage) {
  json j = small_config();
  j["binarize_fraction"] = "patch_area";
  ExperimentConfig cfg = config_with(j);
  const auto examples = cfg.dataset.load();
  const auto net = model::load_weights(model_path());
  // All-dark patch: pushes towards class 0, whose planted intensity is lowest.
  adversarial::Patch patch = adversarial::Patch::uniform(4, 1, 0, 0.0);
  const auto factory = make_classifier_factory(cfg.model);
  const auto result = run_experiment2(cfg, examples, factory, patch);
  ASSERT_EQ(result.cells.size(), 14u);
  ASSERT_EQ(result.manifest.attacks.size(), 2u);
  EXPECT_GT(result.manifest.attacks[1].successes, 0u);
  for (const auto& cell : result.cells) {
    ASSERT_TRUE(cell.scale.has_value());
    const auto& tally = cell.scale == 0.3 ? result.manifest.attacks[0] : result.manifest.attacks[1];
    EXPECT_EQ(cell.records.size(), tally.successes);
    for (const auto& rec : cell.records) {
      ASSERT_TRUE(rec.coverage.has_value());
      EXPECT_EQ(rec.patched_label, rec.attack_target);
    }
    if (cell.report) {
      ASSERT_TRUE(cell.report->impact_coverage.has_value());
      if (cell.explainer == "oracle") EXPECT_EQ(*cell.report->impact_coverage, 1.0);
    }
  }
  ExperimentConfig four = cfg;
  four.workers = 4;
  EXPECT_EQ(run_experiment2(four, examples, factory, patch).cells, result.cells);
  EXPECT_FALSE(format_markdown(result).empty());
}
