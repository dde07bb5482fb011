// impactbench command-line driver.

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "impactbench/ablation/absence.hpp"
#include "impactbench/adversarial/patch.hpp"
#include "impactbench/core/error.hpp"
#include "impactbench/core/log.hpp"
#include "impactbench/core/random.hpp"
#include "impactbench/data/dataset.hpp"
#include "impactbench/explain/binarize.hpp"
#include "impactbench/harness/config.hpp"
#include "impactbench/harness/experiment.hpp"
#include "impactbench/harness/report.hpp"
#include "impactbench/model/trainer.hpp"
#include "impactbench/model/weights_io.hpp"
#include "impactbench/model/wire.hpp"

namespace ib = impactbench;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Override the run seed");
  cmd->add_option("--workers", o.workers, "Override the worker count")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "Override the output location");
}

ib::harness::ExperimentConfig load(const Overrides& o) {
  auto cfg = ib::harness::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers) cfg.workers = *o.workers;
  if (o.out) cfg.output_dir = *o.out;
  return cfg;
}

ib::model::Architecture architecture_for(const ib::harness::TrainingConfig& t,
                                         const std::vector<ib::data::LabelledExample>& examples, int num_classes) {
  if (examples.empty()) throw ib::ConfigError("training dataset is empty");
  const auto shape = examples.front().image.shape();
  ib::model::Architecture arch;
  arch.in_channels = shape.channels;
  arch.height = shape.height;
  arch.width = shape.width;
  arch.conv_channels = t.conv_channels;
  arch.kernel = t.kernel;
  arch.num_classes = num_classes;
  arch.activation = t.activation;
  try {
    arch.validate();
  } catch (const ib::Error& e) {
    throw ib::ConfigError(fmt::format("config.training: {}", e.what()));
  }
  return arch;
}

int num_classes_of(const ib::harness::DatasetConfig& d) {
  return d.kind == ib::harness::DatasetConfig::Kind::kSynthetic ? d.synthetic.num_classes : d.num_classes;
}

int cmd_train_model(const Overrides& o) {
  auto cfg = load(o);
  if (!cfg.training) throw ib::ConfigError("config.training: required for train-model");
  auto t = *cfg.training;
  if (o.seed) t.train.seed = *o.seed;
  const auto dataset = t.dataset.value_or(cfg.dataset);
  auto held_out = t.held_out;
  if (!held_out && dataset.kind == ib::harness::DatasetConfig::Kind::kSynthetic) {
    held_out = dataset;
    held_out->synthetic.seed = ib::mix64(dataset.synthetic.seed);
  }
  const auto examples = dataset.load();
  const auto arch = architecture_for(t, examples, num_classes_of(dataset));
  const auto images = ib::data::images_of(examples);
  const auto labels = ib::data::labels_of(examples);
  std::vector<ib::Image> abstain;
  if (t.abstain_samples > 0) {
    if (dataset.kind != ib::harness::DatasetConfig::Kind::kSynthetic) {
      throw ib::ConfigError("config.training.abstain_samples: needs a synthetic dataset");
    }
    abstain = ib::data::generate_background(dataset.synthetic, static_cast<std::size_t>(t.abstain_samples));
  }
  ib::model::TrainSummary summary;
  const auto model = ib::model::train_toy_cnn(arch, images, labels, abstain, t.train, &summary);
  const fs::path out = o.out ? fs::path(*o.out) : cfg.model.weights.empty() ? cfg.output_dir / "model.bin" : cfg.model.weights;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  ib::model::save_weights(out, model);
  json report{{"weights", out.string()},
              {"train_accuracy", ib::model::accuracy(model, images, labels)},
              {"final_loss", summary.epoch_loss.empty() ? 0.0 : summary.epoch_loss.back()}};
  if (held_out) {
    const auto h = held_out->load();
    report["held_out_accuracy"] = ib::model::accuracy(model, ib::data::images_of(h), ib::data::labels_of(h));
  }
  std::cout << report.dump() << '\n';
  return 0;
}

int cmd_train_patch(const Overrides& o) {
  auto cfg = load(o);
  if (cfg.model.weights.empty()) throw ib::ConfigError("config.model.weights: required for train-patch");
  if (o.seed) cfg.patch.training.seed = *o.seed;
  cfg.patch.file.reset();
  const auto model = ib::model::load_weights(cfg.model.weights);
  const auto examples = cfg.dataset.load();
  const auto patch = ib::harness::obtain_patch(cfg, examples, model);
  const fs::path out = o.out ? fs::path(*o.out) : cfg.output_dir / "patch.bin";
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  ib::adversarial::save_patch(out, patch);
  std::cout << json{{"patch", out.string()},
                    {"iterations", patch.metadata.iterations},
                    {"mean_target_probability", patch.metadata.final_mean_target_probability},
                    {"success_rate", patch.metadata.success_rate}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_explain(const Overrides& o, const std::string& image_path, const std::string& label) {
  auto cfg = load(o);
  if (cfg.explainers.empty()) throw ib::ConfigError("config.explainers: at least one explainer is required");
  const auto factory = ib::harness::make_classifier_factory(cfg.model);
  const auto model = factory();
  const auto image = ib::data::read_image(image_path);
  const auto it = label.empty() ? cfg.explainers.begin()
                                : std::find_if(cfg.explainers.begin(), cfg.explainers.end(),
                                               [&](const auto& e) { return e.label == label; });
  if (it == cfg.explainers.end()) throw ib::ConfigError(fmt::format("no explainer labelled '{}' in config", label));
  const auto explainer = ib::harness::make_explainer(*it, cfg.fill, {image});
  const std::string id = fs::path(image_path).filename().string();
  ib::explain::ExplainContext ctx;
  ctx.seed = ib::derive_seed(cfg.seed, id, "explain:" + explainer->name());
  const auto p = model->classify(image);
  const auto saliency = explainer->explain(image, *model, ctx);
  const auto mask = ib::explain::binarize_topk(saliency, cfg.binarize.fraction);
  const auto ablated = ib::ablation::apply_absence(image, mask, cfg.fill);
  const auto q = model->classify(ablated);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  json out{{"image", image_path},
           {"explainer", explainer->name()},
           {"prediction", {{"label", p.label()}, {"probs", p.probs()}}},
           {"saliency", saliency.scores()},
           {"mask", ib::harness::mask_to_json(mask)},
           {"ablated_prediction", {{"label", q.label()}, {"probs", q.probs()}}}};
  std::ofstream(dir / "explanation.json") << out.dump(1) << '\n';
  ib::data::write_ppm(dir / "ablated.ppm", ablated);
  std::vector<double> mask_pixels(mask.pixels());
  for (std::size_t i = 0; i < mask_pixels.size(); ++i) mask_pixels[i] = mask.test(i) ? 1.0 : 0.0;
  ib::data::write_ppm(dir / "mask.pgm", ib::Image::create({1, mask.height(), mask.width()}, std::move(mask_pixels)));
  std::cout << fmt::format("label {} ({:.4f}) -> {} ({:.4f} on original class), wrote {}\n", p.label(), p.confidence(),
                           q.label(), q.prob(p.label()), dir.string());
  return 0;
}

int cmd_eval(const Overrides& o, bool adversarial) {
  const auto cfg = load(o);
  const auto result = adversarial ? ib::harness::run_experiment2(cfg) : ib::harness::run_experiment1(cfg);
  ib::harness::emit_report(result, cfg.output_dir);
  std::cout << ib::harness::format_markdown(result);
  return 0;
}

int cmd_report(const std::string& input, const std::optional<std::string>& out) {
  std::ifstream in(input);
  if (!in) throw ib::IoError(fmt::format("cannot open {}", input));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ib::IoError(fmt::format("{}: {}", input, e.what()));
  }
  const auto result = ib::harness::result_from_json(j);
  const fs::path dir = out ? fs::path(*out) : fs::path(input).parent_path();
  ib::harness::emit_report(result, dir.empty() ? fs::path(".") : dir);
  std::cout << ib::harness::format_markdown(result);
  return 0;
}

int cmd_serve(const std::string& weights, std::optional<int> port) {
  const auto model = ib::model::load_weights(weights);
  const auto handler = ib::model::make_classifier_handler(model);
  if (!port) {
    ib::model::FdChannel channel(0, 1, /*owns_fds=*/false);
    ib::model::serve_channel(handler, channel);
    return 0;
  }
  ib::model::TcpServer server(handler, static_cast<std::uint16_t>(*port));
  std::cerr << "listening on 127.0.0.1:" << server.port() << std::endl;
  server.wait();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  ib::log::init_from_env(spdlog::level::info);
  CLI::App app{"Impact Score benchmark for saliency explainers"};
  app.require_subcommand(1);

  Overrides train_model, train_patch, explain, general, adversarial;
  add_common(app.add_subcommand("train-model", "Train the toy CNN on the configured dataset"), train_model);
  add_common(app.add_subcommand("train-patch", "Train an adversarial patch against the configured model"), train_patch);
  auto* explain_cmd = app.add_subcommand("explain", "Explain, binarize and ablate one image");
  add_common(explain_cmd, explain);
  std::string image_path, explainer_label;
  explain_cmd->add_option("--image", image_path, "PPM/PGM or PNG image")->required()->check(CLI::ExistingFile);
  explain_cmd->add_option("--explainer", explainer_label, "Explainer label from the config (default: first)");
  add_common(app.add_subcommand("eval-general", "Impact Score over the dataset"), general);
  add_common(app.add_subcommand("eval-adversarial", "Impact Score and Coverage under patch attacks"), adversarial);

  auto* report_cmd = app.add_subcommand("report", "Re-render CSV/Markdown from a report.json");
  std::string report_input;
  std::optional<std::string> report_out;
  report_cmd->add_option("--input", report_input, "report.json")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--out", report_out, "Output directory (default: next to the input)");

  auto* serve_cmd = app.add_subcommand("serve", "Serve a toy CNN over the line protocol (stdio unless --port)");
  std::string serve_weights;
  std::optional<int> serve_port;
  serve_cmd->add_option("--weights", serve_weights, "Weights file")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--port", serve_port, "TCP port on 127.0.0.1 (0 picks one)")->check(CLI::Range(0, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand("train-model")) return cmd_train_model(train_model);
    if (app.got_subcommand("train-patch")) return cmd_train_patch(train_patch);
    if (app.got_subcommand("explain")) return cmd_explain(explain, image_path, explainer_label);
    if (app.got_subcommand("eval-general")) return cmd_eval(general, false);
    if (app.got_subcommand("eval-adversarial")) return cmd_eval(adversarial, true);
    if (app.got_subcommand("report")) return cmd_report(report_input, report_out);
    if (app.got_subcommand("serve")) return cmd_serve(serve_weights, serve_port);
  } catch (const ib::harness::RunFailure& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}
