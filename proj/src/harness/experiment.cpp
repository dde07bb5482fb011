#include "impactbench/harness/experiment.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "impactbench/ablation/absence.hpp"
#include "impactbench/core/random.hpp"
#include "impactbench/explain/binarize.hpp"
#include "impactbench/harness/report.hpp"
#include "impactbench/model/weights_io.hpp"
#include "impactbench/model/wire.hpp"

namespace impactbench::harness {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Runs fn(model, i) for i in [0, n) on `workers` threads, each with its own
// classifier from the factory. fn must handle per-item errors itself; any
// exception that escapes is rethrown after all threads join.
template <typename Fn>
void parallel_for(std::size_t n, int workers, const ClassifierFactory& factory, Fn&& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1)))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    try {
      const auto model = factory();
      for (std::size_t i = next++; i < n; i = next++) fn(*model, i);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = n;
    }
  };
  if (threads == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

ablation::FillPolicy fill_for(const ExperimentConfig& cfg, const std::string& id, const std::string& stage) {
  ablation::FillPolicy fill = cfg.fill;
  if (fill.kind == ablation::FillPolicy::Kind::kUniformNoise) fill.noise_seed = derive_seed(cfg.seed, id, stage);
  return fill;
}

void check_abort_budget(std::size_t aborted, std::size_t total) {
  if (aborted * 10 > total) {
    throw RunFailure(fmt::format("{} of {} images aborted (limit 10%)", aborted, total));
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << j.dump(1) << '\n';
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

std::string artifact_name(std::size_t index) { return fmt::format("artifacts/{:06d}.json", index); }

json prediction_json(const Prediction& p) { return {{"label", p.label()}, {"probs", p.probs()}}; }

std::vector<std::unique_ptr<explain::Explainer>> build_explainers(const ExperimentConfig& cfg,
                                                                  const std::vector<data::LabelledExample>& examples) {
  const auto pool = data::images_of(examples);
  std::vector<std::unique_ptr<explain::Explainer>> out;
  for (const auto& e : cfg.explainers) out.push_back(make_explainer(e, cfg.fill, pool));
  return out;
}

void prepare_output(const ExperimentConfig& cfg) {
  if (!cfg.write_artifacts) return;
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir / "artifacts", ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", (cfg.output_dir / "artifacts").string(), ec.message()));
}

RunManifest base_manifest(const ExperimentConfig& cfg, const char* experiment, std::size_t total) {
  RunManifest m;
  m.experiment = experiment;
  m.config_hash = cfg.hash();
  m.seed = cfg.seed;
  m.images_total = total;
  return m;
}

struct GeneralOutcome {
  enum class Status { kAborted, kMisclassified, kEvaluated };
  Status status = Status::kAborted;
  std::vector<EvalRecord> records;  // one per explainer
};

struct AdversarialOutcome {
  enum class Status { kAborted, kMisclassified, kTargetLabel, kEvaluated };
  Status status = Status::kAborted;
  std::vector<std::vector<EvalRecord>> records;  // [scale][explainer]
  std::vector<bool> success;                     // per scale
};

}  // namespace

json RunManifest::to_json(bool include_timings) const {
  json j{{"experiment", experiment},
         {"config_hash", config_hash},
         {"version", version},
         {"seed", seed},
         {"images", {{"total", images_total}, {"correct", images_correct}, {"aborted", images_aborted}}}};
  if (!reference.empty()) j["reference"] = reference;
  if (!attacks.empty()) {
    json a = json::array();
    for (const auto& t : attacks) a.push_back({{"scale", t.scale}, {"attempts", t.attempts}, {"successes", t.successes}});
    j["attacks"] = a;
  }
  if (include_timings) {
    json t = json::object();
    for (const auto& [stage, ms] : timings_ms) t[stage] = ms;
    j["timings_ms"] = t;
  }
  json index = json::array();
  for (const auto& a : artifacts) index.push_back({{"image_id", a.image_id}, {"path", a.path}});
  j["artifacts"] = index;
  return j;
}

ClassifierFactory make_classifier_factory(const ModelConfig& cfg) {
  if (cfg.endpoint) {
    const auto endpoint = model::Endpoint::parse(*cfg.endpoint);
    const auto timeout = std::chrono::milliseconds(cfg.timeout_ms);
    return [endpoint, timeout]() -> std::shared_ptr<const model::Classifier> {
      return model::RemoteClassifier::connect(endpoint, timeout);
    };
  }
  if (cfg.weights.empty()) throw ConfigError("config.model: weights or endpoint is required");
  std::shared_ptr<const model::Classifier> shared = std::make_shared<model::ToyCnn>(model::load_weights(cfg.weights));
  return [shared] { return shared; };
}

ExperimentResult run_experiment1(const ExperimentConfig& cfg, const std::vector<data::LabelledExample>& examples,
                                 const ClassifierFactory& classifier) {
  cfg.validate_for_evaluation();
  if (cfg.binarize.mode != BinarizeConfig::Mode::kFraction) {
    throw ConfigError("config.binarize_fraction: patch_area applies to the adversarial experiment only");
  }
  if (examples.empty()) throw ConfigError("dataset is empty");
  const auto start = Clock::now();
  ExperimentResult result;
  result.manifest = base_manifest(cfg, "general", examples.size());
  const auto explainers = build_explainers(cfg, examples);
  prepare_output(cfg);
  const std::size_t keep = explain::topk_count(examples.front().image.shape().pixels(), cfg.binarize.fraction);

  std::vector<GeneralOutcome> outcomes(examples.size());
  const auto pipeline_start = Clock::now();
  parallel_for(examples.size(), cfg.workers, classifier, [&](const model::Classifier& model, std::size_t i) {
    const auto& ex = examples[i];
    GeneralOutcome& out = outcomes[i];
    try {
      const Prediction p = model.classify(ex.image);
      json artifact{{"image_id", ex.id}, {"label", ex.label}, {"prediction", prediction_json(p)}};
      if (p.label() != ex.label) {
        out.status = GeneralOutcome::Status::kMisclassified;
      } else {
        json per = json::array();
        for (const auto& e : explainers) {
          explain::ExplainContext ctx;
          ctx.seed = derive_seed(cfg.seed, ex.id, "explain:" + e->name());
          ctx.ground_truth = ex.ground_truth ? &*ex.ground_truth : nullptr;
          const SaliencyMap saliency = e->explain(ex.image, model, ctx);
          const BinaryMask mask = explain::binarize_top_count(saliency, keep);
          const Image ablated = ablation::apply_absence(ex.image, mask, fill_for(cfg, ex.id, "fill:" + e->name()));
          const Prediction q = model.classify(ablated);
          EvalRecord r;
          r.image_id = ex.id;
          r.y = p.label();
          r.z = p.confidence();
          r.y_prime = q.label();
          r.z_prime = q.prob(p.label());
          r.z_prime_argmax = q.confidence();
          validate_record(r);
          out.records.push_back(std::move(r));
          if (cfg.write_artifacts) {
            per.push_back({{"explainer", e->name()},
                           {"saliency", saliency.scores()},
                           {"mask", mask_to_json(mask)},
                           {"ablated_prediction", prediction_json(q)}});
          }
        }
        artifact["explainers"] = per;
        out.status = GeneralOutcome::Status::kEvaluated;
      }
      if (cfg.write_artifacts) write_json_file(cfg.output_dir / artifact_name(i), artifact);
    } catch (const Error& e) {
      spdlog::warn("image {} aborted: {}", ex.id, e.what());
      out = GeneralOutcome{};
    }
  });
  result.manifest.timings_ms.emplace_back("pipeline", elapsed_ms(pipeline_start));

  const auto aggregate_start = Clock::now();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto status = outcomes[i].status;
    if (status == GeneralOutcome::Status::kAborted) ++result.manifest.images_aborted;
    if (status == GeneralOutcome::Status::kEvaluated) ++result.manifest.images_correct;
    if (cfg.write_artifacts && status != GeneralOutcome::Status::kAborted) {
      result.manifest.artifacts.push_back({examples[i].id, artifact_name(i)});
    }
  }
  check_abort_budget(result.manifest.images_aborted, examples.size());
  for (std::size_t k = 0; k < explainers.size(); ++k) {
    ReportCell cell;
    cell.explainer = explainers[k]->name();
    for (const auto& o : outcomes) {
      if (o.status == GeneralOutcome::Status::kEvaluated) cell.records.push_back(o.records[k]);
    }
    if (!cell.records.empty()) cell.report = metrics::build_report(cell.records, cfg.metrics);
    result.cells.push_back(std::move(cell));
  }
  result.manifest.timings_ms.emplace_back("aggregate", elapsed_ms(aggregate_start));
  result.manifest.timings_ms.emplace_back("total", elapsed_ms(start));
  return result;
}

ExperimentResult run_experiment1(const ExperimentConfig& cfg) {
  cfg.validate_for_evaluation();
  const auto factory = make_classifier_factory(cfg.model);
  return run_experiment1(cfg, cfg.dataset.load(), factory);
}

adversarial::Patch obtain_patch(const ExperimentConfig& cfg, const std::vector<data::LabelledExample>& examples,
                                const model::Classifier& model) {
  if (cfg.patch.file) return adversarial::load_patch(*cfg.patch.file);
  if (!model.gradient_capable()) throw ConfigError("training a patch needs a gradient-capable model");
  std::vector<Image> train_set;
  for (const auto& ex : examples) {
    if (ex.label == cfg.patch.training.target_class) continue;
    if (model.classify(ex.image).label() == ex.label) train_set.push_back(ex.image);
  }
  if (train_set.empty()) throw ConfigError("no correctly classified non-target images to train the patch on");
  return adversarial::train_patch(model, train_set, cfg.patch.training);
}

ExperimentResult run_experiment2(const ExperimentConfig& cfg, const std::vector<data::LabelledExample>& examples,
                                 const ClassifierFactory& classifier, const adversarial::Patch& patch) {
  cfg.validate_for_evaluation();
  if (examples.empty()) throw ConfigError("dataset is empty");
  patch.validate();
  const auto start = Clock::now();
  const auto& scales = cfg.patch.training.scales;
  const int target = patch.target_class;
  ExperimentResult result;
  result.manifest = base_manifest(cfg, "adversarial", examples.size());
  result.manifest.reference = cfg.patch.reference == AdversarialReference::kPatched ? "patched" : "clean";
  const auto explainers = build_explainers(cfg, examples);
  prepare_output(cfg);
  const Shape shape = examples.front().image.shape();

  std::vector<AdversarialOutcome> outcomes(examples.size());
  const auto pipeline_start = Clock::now();
  parallel_for(examples.size(), cfg.workers, classifier, [&](const model::Classifier& model, std::size_t i) {
    const auto& ex = examples[i];
    AdversarialOutcome& out = outcomes[i];
    try {
      const Prediction clean = model.classify(ex.image);
      json artifact{{"image_id", ex.id}, {"label", ex.label}, {"prediction", prediction_json(clean)}};
      if (clean.label() != ex.label) {
        out.status = AdversarialOutcome::Status::kMisclassified;
      } else if (clean.label() == target) {
        out.status = AdversarialOutcome::Status::kTargetLabel;
      } else {
        json per_scale = json::array();
        for (double scale : scales) {
          const std::string tag = fmt::format("{}", scale);
          const auto placement = adversarial::sample_placement(shape, scale, derive_seed(cfg.seed, ex.id, "placement:" + tag));
          const auto overlay = adversarial::overlay_patch(ex.image, patch, placement);
          const Prediction attacked = model.classify(overlay.image);
          const bool success = attacked.label() == target;
          const Prediction& ref = cfg.patch.reference == AdversarialReference::kPatched ? attacked : clean;
          const std::size_t keep = cfg.binarize.mode == BinarizeConfig::Mode::kPatchArea
                                       ? overlay.impacted.area()
                                       : explain::topk_count(shape.pixels(), cfg.binarize.fraction);
          std::vector<EvalRecord> records;
          json per = json::array();
          for (const auto& e : explainers) {
            EvalRecord r;
            r.image_id = ex.id;
            r.y = ref.label();
            r.z = ref.confidence();
            r.attack_target = target;
            r.patched_label = attacked.label();
            if (!success) {
              r.y_prime = r.y;
              r.z_prime = r.z;
              records.push_back(std::move(r));
              continue;
            }
            explain::ExplainContext ctx;
            ctx.seed = derive_seed(cfg.seed, ex.id, fmt::format("explain:{}:{}", e->name(), tag));
            ctx.ground_truth = &overlay.impacted;
            const SaliencyMap saliency = e->explain(overlay.image, model, ctx);
            const BinaryMask mask = explain::binarize_top_count(saliency, keep);
            const Image ablated = ablation::apply_absence(
                overlay.image, mask, fill_for(cfg, ex.id, fmt::format("fill:{}:{}", e->name(), tag)));
            const Prediction q = model.classify(ablated);
            r.y_prime = q.label();
            r.z_prime = q.prob(r.y);
            r.z_prime_argmax = q.confidence();
            r.coverage = CoveragePair{overlay.impacted, mask};
            validate_record(r);
            if (cfg.write_artifacts) {
              per.push_back({{"explainer", e->name()},
                             {"saliency", saliency.scores()},
                             {"mask", mask_to_json(mask)},
                             {"ablated_prediction", prediction_json(q)}});
            }
            records.push_back(std::move(r));
          }
          out.records.push_back(std::move(records));
          out.success.push_back(success);
          per_scale.push_back({{"scale", scale},
                               {"placement",
                                {{"side", placement.side},
                                 {"rotation", adversarial::degrees(placement.rotation)},
                                 {"top", placement.top},
                                 {"left", placement.left}}},
                               {"patched_prediction", prediction_json(attacked)},
                               {"success", success},
                               {"explainers", per}});
        }
        artifact["scales"] = per_scale;
        out.status = AdversarialOutcome::Status::kEvaluated;
      }
      if (cfg.write_artifacts) write_json_file(cfg.output_dir / artifact_name(i), artifact);
    } catch (const Error& e) {
      spdlog::warn("image {} aborted: {}", ex.id, e.what());
      out = AdversarialOutcome{};
    }
  });
  result.manifest.timings_ms.emplace_back("pipeline", elapsed_ms(pipeline_start));

  const auto aggregate_start = Clock::now();
  for (double scale : scales) result.manifest.attacks.push_back({scale, 0, 0});
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    if (o.status == AdversarialOutcome::Status::kAborted) ++result.manifest.images_aborted;
    if (o.status == AdversarialOutcome::Status::kEvaluated || o.status == AdversarialOutcome::Status::kTargetLabel) {
      ++result.manifest.images_correct;
    }
    if (o.status == AdversarialOutcome::Status::kEvaluated) {
      for (std::size_t s = 0; s < scales.size(); ++s) {
        ++result.manifest.attacks[s].attempts;
        if (o.success[s]) ++result.manifest.attacks[s].successes;
      }
    }
    if (cfg.write_artifacts && o.status != AdversarialOutcome::Status::kAborted) {
      result.manifest.artifacts.push_back({examples[i].id, artifact_name(i)});
    }
  }
  check_abort_budget(result.manifest.images_aborted, examples.size());
  for (std::size_t k = 0; k < explainers.size(); ++k) {
    for (std::size_t s = 0; s < scales.size(); ++s) {
      std::vector<EvalRecord> attempts;
      for (const auto& o : outcomes) {
        if (o.status == AdversarialOutcome::Status::kEvaluated) attempts.push_back(o.records[s][k]);
      }
      ReportCell cell;
      cell.explainer = explainers[k]->name();
      cell.scale = scales[s];
      cell.records = adversarial::attack_success_filter(std::move(attempts));
      if (!cell.records.empty()) cell.report = metrics::build_report(cell.records, cfg.metrics);
      result.cells.push_back(std::move(cell));
    }
  }
  result.manifest.timings_ms.emplace_back("aggregate", elapsed_ms(aggregate_start));
  result.manifest.timings_ms.emplace_back("total", elapsed_ms(start));
  return result;
}

ExperimentResult run_experiment2(const ExperimentConfig& cfg) {
  cfg.validate_for_evaluation();
  const auto factory = make_classifier_factory(cfg.model);
  const auto examples = cfg.dataset.load();
  const auto model = factory();
  const auto patch = obtain_patch(cfg, examples, *model);
  return run_experiment2(cfg, examples, factory, patch);
}

}  // namespace impactbench::harness
