#include "impactbench/adversarial/patch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "impactbench/core/error.hpp"
#include "impactbench/core/random.hpp"
#include "impactbench/model/weights_io.hpp"

namespace impactbench::adversarial {

namespace {

constexpr const char* kPatchFormat = "impactbench-patch";

}  // namespace

Patch Patch::uniform(int side, int channels, int target_class, double value) {
  Patch p;
  p.side = side;
  p.channels = channels;
  p.target_class = target_class;
  p.data.assign(static_cast<std::size_t>(side) * side * channels, value);
  p.validate();
  return p;
}

void Patch::validate() const {
  if (side < 1 || channels < 1) throw RangeError("patch side and channels must be positive");
  if (data.size() != static_cast<std::size_t>(side) * side * channels) throw ShapeError("patch data length mismatch");
  for (double v : data) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw RangeError("patch values must lie in [0,1]");
  }
  if (target_class < 0) throw RangeError("patch target class must be non-negative");
}

int degrees(Rotation rotation) { return 90 * static_cast<int>(rotation); }

int placed_side(const Shape& shape, double scale) {
  const int limit = std::min(shape.height, shape.width);
  const double raw = std::round(scale * limit);
  if (!std::isfinite(scale) || raw < 1.0 || raw > limit) {
    throw RangeError(fmt::format("scale {} gives a patch side outside [1, {}]", scale, limit));
  }
  return static_cast<int>(raw);
}

Placement make_placement(const Shape& shape, double scale, Rotation rotation, int top, int left) {
  Placement p{scale, placed_side(shape, scale), rotation, top, left, 0};
  if (top < 0 || left < 0 || top + p.side > shape.height || left + p.side > shape.width) {
    throw RangeError(fmt::format("patch of side {} at ({}, {}) does not fit a {}x{} image", p.side, top, left,
                                 shape.height, shape.width));
  }
  return p;
}

Placement sample_placement(const Shape& shape, double scale, std::uint64_t seed) {
  const int side = placed_side(shape, scale);
  Rng rng(seed);
  const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(shape.height - side + 1)));
  const int left = static_cast<int>(rng.below(static_cast<std::uint64_t>(shape.width - side + 1)));
  const auto rotation = static_cast<Rotation>(rng.below(4));
  Placement p = make_placement(shape, scale, rotation, top, left);
  p.seed = seed;
  return p;
}

SourcePixel source_pixel(int patch_side, const Placement& placement, int row, int col) {
  const int S = placement.side;
  int i = row, j = col;
  switch (placement.rotation) {
    case Rotation::k0: break;
    case Rotation::k90: i = S - 1 - col; j = row; break;
    case Rotation::k180: i = S - 1 - row; j = S - 1 - col; break;
    case Rotation::k270: i = col; j = S - 1 - row; break;
  }
  // Nearest neighbour on pixel centres.
  return SourcePixel{((2 * i + 1) * patch_side) / (2 * S), ((2 * j + 1) * patch_side) / (2 * S)};
}

Overlay overlay_patch(const Image& x, const Patch& patch, const Placement& placement) {
  if (patch.channels != x.channels()) {
    throw ShapeError(fmt::format("patch has {} channels, image has {}", patch.channels, x.channels()));
  }
  if (placement.side < 1 || placement.top < 0 || placement.left < 0 || placement.top + placement.side > x.height() ||
      placement.left + placement.side > x.width()) {
    throw RangeError("patch placement does not fit inside the image");
  }
  std::vector<double> out = x.to_vector();
  BinaryMask impacted(x.height(), x.width());
  for (int r = 0; r < placement.side; ++r) {
    for (int c = 0; c < placement.side; ++c) {
      const SourcePixel src = source_pixel(patch.side, placement, r, c);
      const int row = placement.top + r, col = placement.left + c;
      for (int ch = 0; ch < x.channels(); ++ch) out[x.index(ch, row, col)] = patch.at(ch, src.row, src.col);
      impacted.set(row, col);
    }
  }
  return Overlay{Image::create(x.shape(), std::move(out)), std::move(impacted)};
}

std::vector<double> patch_gradient(const model::Classifier& model, const Image& x, const Patch& patch,
                                   const Placement& placement, int target_class) {
  const Overlay patched = overlay_patch(x, patch, placement);
  const std::vector<double> g = model.grad_input(patched.image, target_class);
  std::vector<double> out(patch.data.size(), 0.0);
  for (int r = 0; r < placement.side; ++r) {
    for (int c = 0; c < placement.side; ++c) {
      const SourcePixel src = source_pixel(patch.side, placement, r, c);
      for (int ch = 0; ch < x.channels(); ++ch) {
        out[(static_cast<std::size_t>(ch) * patch.side + src.row) * patch.side + src.col] +=
            g[x.index(ch, placement.top + r, placement.left + c)];
      }
    }
  }
  return out;
}

void PatchTrainingConfig::validate() const {
  if (target_class < 0) throw ConfigError("patch target class must be non-negative");
  if (scales.empty()) throw ConfigError("patch training needs at least one scale");
  for (double s : scales) {
    if (!(s > 0.0 && s < 1.0)) throw ConfigError(fmt::format("patch scale {} must lie in (0,1)", s));
  }
  if (patch_side < 1) throw ConfigError("patch side must be positive");
  if (iterations < 0) throw ConfigError("patch iterations must be non-negative");
  if (!(step_size > 0.0)) throw ConfigError("patch step size must be positive");
}

std::vector<Placement> sample_placements(std::size_t count, const Shape& shape, std::span<const double> scales,
                                         std::uint64_t seed) {
  std::vector<Placement> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(sample_placement(shape, scales[i % scales.size()], mix64(seed + i)));
  }
  return out;
}

double mean_target_probability(const model::Classifier& model, std::span<const Image> images, const Patch& patch,
                               std::span<const Placement> placements) {
  if (images.size() != placements.size()) throw ShapeError("one placement per image is required");
  if (images.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    total += model.classify(overlay_patch(images[i], patch, placements[i]).image).prob(patch.target_class);
  }
  return total / static_cast<double>(images.size());
}

Patch train_patch(const model::Classifier& model, std::span<const Image> train_set, const PatchTrainingConfig& cfg) {
  cfg.validate();
  if (!model.gradient_capable()) throw ConfigError("patch training needs a gradient-capable classifier");
  if (train_set.empty()) throw ConfigError("patch training set is empty");
  if (cfg.target_class >= model.num_classes()) throw ConfigError("patch target class is out of range");
  const Shape shape = train_set.front().shape();

  Patch patch = Patch::uniform(cfg.patch_side, shape.channels, cfg.target_class, 0.5);
  Rng rng(cfg.seed);
  for (int it = 0; it < cfg.iterations; ++it) {
    const Image& x = train_set[static_cast<std::size_t>(rng.below(train_set.size()))];
    const double scale = cfg.scales[static_cast<std::size_t>(rng.below(cfg.scales.size()))];
    const Placement placement = sample_placement(shape, scale, rng.next());
    const std::vector<double> g = patch_gradient(model, x, patch, placement, cfg.target_class);
    for (std::size_t i = 0; i < patch.data.size(); ++i) {
      patch.data[i] = std::clamp(patch.data[i] + cfg.step_size * g[i], 0.0, 1.0);
    }
  }

  const std::vector<Placement> eval = sample_placements(train_set.size(), shape, cfg.scales, mix64(cfg.seed ^ 0x5eed));
  double total = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    const Prediction p = model.classify(overlay_patch(train_set[i], patch, eval[i]).image);
    total += p.prob(cfg.target_class);
    if (p.label() == cfg.target_class) ++hits;
  }
  patch.metadata.iterations = cfg.iterations;
  patch.metadata.final_mean_target_probability = total / static_cast<double>(train_set.size());
  patch.metadata.success_rate = static_cast<double>(hits) / static_cast<double>(train_set.size());
  spdlog::info("patch for class {}: mean target probability {:.4f}, success rate {:.4f}", cfg.target_class,
               patch.metadata.final_mean_target_probability, patch.metadata.success_rate);
  return patch;
}

std::vector<EvalRecord> attack_success_filter(std::vector<EvalRecord> records) {
  std::vector<EvalRecord> kept;
  for (EvalRecord& r : records) {
    if (!r.attack_target || !r.patched_label) {
      throw ConfigError(fmt::format("record '{}' lacks attack_target/patched_label", r.image_id));
    }
    if (*r.patched_label == *r.attack_target) kept.push_back(std::move(r));
  }
  return kept;
}

void save_patch(const std::filesystem::path& path, const Patch& patch) {
  patch.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write patch file {}", path.string()));
  const nlohmann::json header = {
      {"format", kPatchFormat},
      {"side", patch.side},
      {"channels", patch.channels},
      {"target_class", patch.target_class},
      {"metadata",
       {{"iterations", patch.metadata.iterations},
        {"final_mean_target_probability", patch.metadata.final_mean_target_probability},
        {"success_rate", patch.metadata.success_rate}}},
  };
  model::write_header_and_doubles(out, header, patch.data);
  if (!out) throw IoError(fmt::format("failed writing patch file {}", path.string()));
}

Patch load_patch(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open patch file {}", path.string()));
  const std::string what = path.string();
  const nlohmann::json header = model::read_header(in, what);
  if (header.value("format", std::string()) != kPatchFormat) throw IoError(fmt::format("{}: not a patch file", what));
  Patch patch;
  try {
    patch.side = header.at("side").get<int>();
    patch.channels = header.at("channels").get<int>();
    patch.target_class = header.at("target_class").get<int>();
    const auto& meta = header.at("metadata");
    patch.metadata.iterations = meta.at("iterations").get<int>();
    patch.metadata.final_mean_target_probability = meta.at("final_mean_target_probability").get<double>();
    patch.metadata.success_rate = meta.at("success_rate").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("{}: malformed patch header: {}", what, e.what()));
  }
  if (patch.side < 1 || patch.channels < 1) throw IoError(fmt::format("{}: invalid patch dimensions", what));
  patch.data = model::read_doubles(in, static_cast<std::size_t>(patch.side) * patch.side * patch.channels, what);
  patch.validate();
  return patch;
}

}  // namespace impactbench::adversarial
