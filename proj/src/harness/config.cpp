#include "impactbench/harness/config.hpp"

#include <fmt/format.h>

#include <fstream>
#include <set>
#include <sstream>

#include "impactbench/core/error.hpp"
#include "impactbench/core/random.hpp"
#include "impactbench/explain/occlusion.hpp"
#include "impactbench/explain/path_attribution.hpp"
#include "impactbench/explain/reference.hpp"
#include "impactbench/explain/surrogate.hpp"

namespace impactbench::harness {

using nlohmann::json;

namespace {

// Typed access to one JSON object; remembers which keys were read so that
// typos surface as errors instead of silently falling back to defaults.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(fmt::format("{}: expected an object", path_));
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    return convert<T>(key);
  }

  template <typename T>
  T require(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) throw ConfigError(fmt::format("{}.{}: required", path_, key));
    return convert<T>(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(fmt::format("{}.{}: unknown key", path_, key));
    }
  }

 private:
  template <typename T>
  T convert(const std::string& key) const {
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("{}.{}: {}", path_, key, e.what()));
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  if (p.is_relative() && !base.empty()) return base / p;
  return p;
}

DatasetConfig parse_dataset(const json& j, const std::string& path, const std::filesystem::path& base) {
  Section s(j, path);
  DatasetConfig d;
  const auto kind = s.get<std::string>("kind", "synthetic");
  if (kind == "synthetic") {
    d.kind = DatasetConfig::Kind::kSynthetic;
    auto& sp = d.synthetic;
    sp.num_classes = s.get("num_classes", sp.num_classes);
    sp.image_side = s.get("image_side", sp.image_side);
    sp.samples_per_class = s.get("samples_per_class", sp.samples_per_class);
    sp.feature_side = s.get("feature_side", sp.feature_side);
    sp.noise_amplitude = s.get("noise_amplitude", sp.noise_amplitude);
    sp.seed = s.get<std::uint64_t>("seed", sp.seed);
    sp.channels = s.get("channels", sp.channels);
    try {
      sp.validate();
    } catch (const Error& e) {
      throw ConfigError(fmt::format("{}: {}", path, e.what()));
    }
  } else if (kind == "folder") {
    d.kind = DatasetConfig::Kind::kFolder;
    d.root = resolve(base, s.require<std::string>("root"));
    d.labels = s.get<std::string>("labels", "labels.csv");
    d.num_classes = s.require<int>("num_classes");
    if (d.num_classes < 2) throw ConfigError(fmt::format("{}.num_classes: must be >= 2", path));
  } else {
    throw ConfigError(fmt::format("{}.kind: expected synthetic or folder, got '{}'", path, kind));
  }
  s.finish();
  return d;
}

json dataset_to_json(const DatasetConfig& d) {
  if (d.kind == DatasetConfig::Kind::kFolder) {
    return {{"kind", "folder"}, {"root", d.root.string()}, {"labels", d.labels.string()},
            {"num_classes", d.num_classes}};
  }
  const auto& sp = d.synthetic;
  return {{"kind", "synthetic"},
          {"num_classes", sp.num_classes},
          {"image_side", sp.image_side},
          {"samples_per_class", sp.samples_per_class},
          {"feature_side", sp.feature_side},
          {"noise_amplitude", sp.noise_amplitude},
          {"seed", sp.seed},
          {"channels", sp.channels}};
}

ablation::FillPolicy parse_fill(const json& j, const std::string& path) {
  ablation::FillPolicy fill;
  if (j.is_string()) {
    try {
      fill.kind = ablation::fill_kind_from_string(j.get<std::string>());
    } catch (const Error& e) {
      throw ConfigError(fmt::format("{}: {}", path, e.what()));
    }
  } else {
    Section s(j, path);
    try {
      fill.kind = ablation::fill_kind_from_string(s.require<std::string>("kind"));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(fmt::format("{}.kind: {}", path, e.what()));
    }
    fill.dataset_means = s.get<std::vector<double>>("means", {});
    fill.noise_seed = s.get<std::uint64_t>("noise_seed", 0);
    s.finish();
  }
  try {
    fill.validate();
  } catch (const Error& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
  return fill;
}

// Explainer parameters after defaults; shared by validation and construction.
struct ExplainerParams {
  int window = 4;
  int stride = 2;
  int cells = 8;
  int samples = 1000;
  double lambda = 1e-3;
  double kernel_width = 0.25;
  int steps = 64;
  std::string baselines = "dataset";
  int baseline_count = 16;
  model::GradientTarget gradient_target = model::GradientTarget::kLogit;
};

const std::set<std::string>& explainer_types() {
  static const std::set<std::string> types{"occlusion",          "lime",   "kernel-shap", "integrated-gradients",
                                           "expected-gradients", "oracle", "random"};
  return types;
}

ExplainerParams parse_params(const ExplainerConfig& cfg, const std::string& path) {
  Section s(cfg.params, path);
  ExplainerParams p;
  const auto& t = cfg.type;
  auto positive = [&](const std::string& key, int value) {
    if (value < 1) throw ConfigError(fmt::format("{}: must be >= 1", s.path(key)));
    return value;
  };
  if (t == "occlusion") {
    p.window = positive("window", s.get("window", p.window));
    p.stride = positive("stride", s.get("stride", p.stride));
    if (p.stride > p.window) throw ConfigError(fmt::format("{}: must not exceed the window", s.path("stride")));
  } else if (t == "lime" || t == "kernel-shap") {
    p.cells = positive("cells", s.get("cells", p.cells));
    p.samples = positive("samples", s.get("samples", p.samples));
    p.lambda = s.get("lambda", p.lambda);
    if (!(p.lambda >= 0.0)) throw ConfigError(fmt::format("{}: must be >= 0", s.path("lambda")));
    if (t == "lime") {
      p.kernel_width = s.get("kernel_width", p.kernel_width);
      if (!(p.kernel_width > 0.0)) throw ConfigError(fmt::format("{}: must be > 0", s.path("kernel_width")));
    }
  } else if (t == "integrated-gradients" || t == "expected-gradients") {
    p.steps = positive("steps", s.get("steps", p.steps));
    const auto target = s.get<std::string>("gradient_target", "logit");
    if (target == "logit") {
      p.gradient_target = model::GradientTarget::kLogit;
    } else if (target == "probability") {
      p.gradient_target = model::GradientTarget::kProbability;
    } else {
      throw ConfigError(fmt::format("{}: expected logit or probability", s.path("gradient_target")));
    }
    if (t == "expected-gradients") {
      p.baselines = s.get<std::string>("baselines", p.baselines);
      if (p.baselines != "dataset" && p.baselines != "zero") {
        throw ConfigError(fmt::format("{}: expected dataset or zero", s.path("baselines")));
      }
      p.baseline_count = positive("baseline_count", s.get("baseline_count", p.baseline_count));
    }
  }
  s.finish();
  return p;
}

}  // namespace

std::vector<data::LabelledExample> DatasetConfig::load() const {
  if (kind == Kind::kSynthetic) return data::generate_planted(synthetic);
  return data::load_folder(root, labels, num_classes);
}

ExperimentConfig ExperimentConfig::from_json(const json& j) { return from_json(j, {}); }

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::filesystem::path& base) {
  Section s(j, "config");
  ExperimentConfig cfg;

  if (s.has("dataset")) cfg.dataset = parse_dataset(s.raw("dataset"), "config.dataset", base);

  if (s.has("model")) {
    Section m(s.raw("model"), "config.model");
    if (m.has("weights")) cfg.model.weights = resolve(base, m.require<std::string>("weights"));
    if (m.has("endpoint")) cfg.model.endpoint = m.require<std::string>("endpoint");
    cfg.model.timeout_ms = m.get("timeout_ms", cfg.model.timeout_ms);
    if (cfg.model.timeout_ms < 1) throw ConfigError("config.model.timeout_ms: must be >= 1");
    if (!cfg.model.weights.empty() && cfg.model.endpoint) {
      throw ConfigError("config.model: set either weights or endpoint, not both");
    }
    m.finish();
  }

  if (s.has("training")) {
    Section t(s.raw("training"), "config.training");
    TrainingConfig tc;
    tc.conv_channels = t.get("conv_channels", tc.conv_channels);
    tc.kernel = t.get("kernel", tc.kernel);
    try {
      tc.activation = model::activation_from_string(t.get<std::string>("activation", "relu"));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(fmt::format("config.training.activation: {}", e.what()));
    }
    tc.train.epochs = t.get("epochs", tc.train.epochs);
    tc.train.batch_size = t.get("batch_size", tc.train.batch_size);
    tc.train.learning_rate = t.get("learning_rate", tc.train.learning_rate);
    tc.train.seed = t.get<std::uint64_t>("seed", tc.train.seed);
    tc.abstain_samples = t.get("abstain_samples", tc.abstain_samples);
    if (tc.abstain_samples < 0) throw ConfigError("config.training.abstain_samples: must be >= 0");
    if (t.has("dataset")) tc.dataset = parse_dataset(t.raw("dataset"), "config.training.dataset", base);
    if (t.has("held_out")) tc.held_out = parse_dataset(t.raw("held_out"), "config.training.held_out", base);
    t.finish();
    try {
      tc.train.validate();
    } catch (const Error& e) {
      throw ConfigError(fmt::format("config.training: {}", e.what()));
    }
    cfg.training = tc;
  }

  if (s.has("explainers")) {
    const json& list = s.raw("explainers");
    if (!list.is_array()) throw ConfigError("config.explainers: expected an array");
    std::set<std::string> labels;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto path = fmt::format("config.explainers[{}]", i);
      Section e(list[i], path);
      ExplainerConfig ec;
      ec.type = e.require<std::string>("type");
      if (!explainer_types().count(ec.type)) throw ConfigError(fmt::format("{}.type: unknown explainer '{}'", path, ec.type));
      ec.label = e.get<std::string>("label", ec.type);
      if (ec.label.empty() || ec.label.find_first_of(",\n|/") != std::string::npos) {
        throw ConfigError(fmt::format("{}.label: must be non-empty without ',', '|', '/' or newlines", path));
      }
      if (!labels.insert(ec.label).second) throw ConfigError(fmt::format("{}.label: duplicate '{}'", path, ec.label));
      if (e.has("params")) ec.params = e.raw("params");
      e.finish();
      parse_params(ec, path + ".params");
      cfg.explainers.push_back(std::move(ec));
    }
  }

  if (s.has("binarize_fraction")) {
    const json& b = s.raw("binarize_fraction");
    if (b.is_string() && b.get<std::string>() == "patch_area") {
      cfg.binarize.mode = BinarizeConfig::Mode::kPatchArea;
    } else if (b.is_number()) {
      cfg.binarize.mode = BinarizeConfig::Mode::kFraction;
      cfg.binarize.fraction = b.get<double>();
      if (!(cfg.binarize.fraction > 0.0 && cfg.binarize.fraction <= 1.0)) {
        throw ConfigError("config.binarize_fraction: must be in (0, 1]");
      }
    } else {
      throw ConfigError("config.binarize_fraction: expected a number or \"patch_area\"");
    }
  }

  if (s.has("fill")) cfg.fill = parse_fill(s.raw("fill"), "config.fill");

  cfg.metrics.tau = s.get("tau", cfg.metrics.tau);
  cfg.metrics.argmax_variant = s.get("report_argmax_variant", cfg.metrics.argmax_variant);
  try {
    cfg.metrics.validate();
  } catch (const Error& e) {
    throw ConfigError(fmt::format("config.tau: {}", e.what()));
  }

  if (s.has("patch")) {
    Section p(s.raw("patch"), "config.patch");
    auto& pt = cfg.patch.training;
    pt.target_class = p.get("target_class", pt.target_class);
    pt.scales = p.get("scales", pt.scales);
    pt.patch_side = p.get("patch_side", pt.patch_side);
    pt.iterations = p.get("iterations", pt.iterations);
    pt.step_size = p.get("step_size", pt.step_size);
    pt.seed = p.get<std::uint64_t>("seed", pt.seed);
    if (p.has("file")) cfg.patch.file = resolve(base, p.require<std::string>("file"));
    const auto reference = p.get<std::string>("reference", "patched");
    if (reference == "patched") {
      cfg.patch.reference = AdversarialReference::kPatched;
    } else if (reference == "clean") {
      cfg.patch.reference = AdversarialReference::kClean;
    } else {
      throw ConfigError("config.patch.reference: expected patched or clean");
    }
    p.finish();
    for (double sc : pt.scales) {
      if (!(sc > 0.0 && sc < 1.0)) throw ConfigError(fmt::format("config.patch.scales: {} outside (0, 1)", sc));
    }
    try {
      pt.validate();
    } catch (const Error& e) {
      throw ConfigError(fmt::format("config.patch: {}", e.what()));
    }
  }

  cfg.seed = s.get<std::uint64_t>("seed", cfg.seed);
  cfg.workers = s.get("workers", cfg.workers);
  if (cfg.workers < 1) throw ConfigError("config.workers: must be >= 1");
  if (s.has("output_dir")) cfg.output_dir = resolve(base, s.require<std::string>("output_dir"));
  cfg.write_artifacts = s.get("write_artifacts", cfg.write_artifacts);
  s.finish();
  return cfg;
}

json ExperimentConfig::to_json() const {
  json j;
  j["dataset"] = dataset_to_json(dataset);
  json m = json::object();
  if (!model.weights.empty()) m["weights"] = model.weights.string();
  if (model.endpoint) m["endpoint"] = *model.endpoint;
  m["timeout_ms"] = model.timeout_ms;
  j["model"] = m;
  if (training) {
    const auto& t = *training;
    json tj{{"conv_channels", t.conv_channels},
            {"kernel", t.kernel},
            {"activation", model::to_string(t.activation)},
            {"epochs", t.train.epochs},
            {"batch_size", t.train.batch_size},
            {"learning_rate", t.train.learning_rate},
            {"seed", t.train.seed},
            {"abstain_samples", t.abstain_samples}};
    if (t.dataset) tj["dataset"] = dataset_to_json(*t.dataset);
    if (t.held_out) tj["held_out"] = dataset_to_json(*t.held_out);
    j["training"] = tj;
  }
  json list = json::array();
  for (const auto& e : explainers) list.push_back({{"type", e.type}, {"label", e.label}, {"params", e.params}});
  j["explainers"] = list;
  if (binarize.mode == BinarizeConfig::Mode::kPatchArea) {
    j["binarize_fraction"] = "patch_area";
  } else {
    j["binarize_fraction"] = binarize.fraction;
  }
  json f{{"kind", ablation::to_string(fill.kind)}};
  if (!fill.dataset_means.empty()) f["means"] = fill.dataset_means;
  if (fill.kind == ablation::FillPolicy::Kind::kUniformNoise) f["noise_seed"] = fill.noise_seed;
  j["fill"] = f;
  j["tau"] = metrics.tau;
  j["report_argmax_variant"] = metrics.argmax_variant;
  json p{{"target_class", patch.training.target_class},
         {"scales", patch.training.scales},
         {"patch_side", patch.training.patch_side},
         {"iterations", patch.training.iterations},
         {"step_size", patch.training.step_size},
         {"seed", patch.training.seed},
         {"reference", patch.reference == AdversarialReference::kPatched ? "patched" : "clean"}};
  if (patch.file) p["file"] = patch.file->string();
  j["patch"] = p;
  j["seed"] = seed;
  j["workers"] = workers;
  j["output_dir"] = output_dir.string();
  j["write_artifacts"] = write_artifacts;
  return j;
}

std::string ExperimentConfig::hash() const {
  json j = to_json();
  j.erase("workers");
  j.erase("output_dir");
  j.erase("write_artifacts");
  return fmt::format("{:016x}", fnv1a(j.dump()));
}

void ExperimentConfig::validate_for_evaluation() const {
  if (explainers.empty()) throw ConfigError("config.explainers: at least one explainer is required");
  if (model.weights.empty() && !model.endpoint) throw ConfigError("config.model: weights or endpoint is required");
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file {}", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return ExperimentConfig::from_json(j, path.parent_path());
}

std::unique_ptr<explain::Explainer> make_explainer(const ExplainerConfig& cfg, const ablation::FillPolicy& fill,
                                                   const std::vector<Image>& baseline_pool) {
  const auto p = parse_params(cfg, "explainer " + cfg.label);
  const auto& t = cfg.type;
  if (t == "occlusion") return std::make_unique<explain::OcclusionExplainer>(cfg.label, p.window, p.stride, fill);
  if (t == "lime" || t == "kernel-shap") {
    explain::SurrogateConfig sc;
    sc.num_samples = p.samples;
    sc.ridge_lambda = p.lambda;
    sc.kernel = t == "lime" ? explain::SampleKernel::kExponential : explain::SampleKernel::kShapley;
    sc.kernel_width = p.kernel_width;
    return std::make_unique<explain::SurrogateExplainer>(cfg.label, p.cells, sc, fill);
  }
  if (t == "integrated-gradients" || t == "expected-gradients") {
    explain::PathAttributionConfig pc;
    pc.steps = p.steps;
    pc.gradient_target = p.gradient_target;
    if (t == "integrated-gradients") return std::make_unique<explain::IntegratedGradientsExplainer>(cfg.label, pc);
    if (baseline_pool.empty()) throw ConfigError(fmt::format("explainer {}: no images to derive baselines from", cfg.label));
    std::vector<Image> baselines;
    if (p.baselines == "zero") {
      pc.baseline = explain::BaselinePolicy::kZeroImage;
      baselines.push_back(Image::filled(baseline_pool.front().shape(), 0.0));
    } else {
      pc.baseline = explain::BaselinePolicy::kDatasetSamples;
      const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(p.baseline_count), baseline_pool.size());
      for (std::size_t i = 0; i < count; ++i) baselines.push_back(baseline_pool[i * baseline_pool.size() / count]);
    }
    return std::make_unique<explain::ExpectedGradientsExplainer>(cfg.label, std::move(baselines), pc);
  }
  if (t == "oracle") return std::make_unique<explain::OracleExplainer>(cfg.label);
  if (t == "random") return std::make_unique<explain::RandomExplainer>(cfg.label);
  throw ConfigError(fmt::format("unknown explainer type '{}'", t));
}

}  // namespace impactbench::harness
