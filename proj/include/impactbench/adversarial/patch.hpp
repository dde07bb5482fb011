#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "impactbench/core/image.hpp"
#include "impactbench/core/mask.hpp"
#include "impactbench/core/records.hpp"
#include "impactbench/model/classifier.hpp"

namespace impactbench::adversarial {

struct PatchMetadata {
  int iterations = 0;
  // Over the training set, one seeded placement per image.
  double final_mean_target_probability = 0.0;
  double success_rate = 0.0;

  friend bool operator==(const PatchMetadata&, const PatchMetadata&) = default;
};

// Square adversarial patch at its native resolution, channel-major.
struct Patch {
  int side = 0;
  int channels = 0;
  std::vector<double> data;
  int target_class = 0;
  PatchMetadata metadata;

  static Patch uniform(int side, int channels, int target_class, double value = 0.5);
  double at(int channel, int row, int col) const {
    return data[(static_cast<std::size_t>(channel) * side + row) * side + col];
  }
  void validate() const;

  friend bool operator==(const Patch&, const Patch&) = default;
};

enum class Rotation { k0 = 0, k90 = 1, k180 = 2, k270 = 3 };  // clockwise

int degrees(Rotation rotation);

struct Placement {
  double scale = 0.0;
  int side = 0;  // round(scale * min(H, W))
  Rotation rotation = Rotation::k0;
  int top = 0;
  int left = 0;
  std::uint64_t seed = 0;  // provenance when sampled

  friend bool operator==(const Placement&, const Placement&) = default;
};

// round(scale * min(H, W)); throws RangeError outside [1, min(H, W)].
int placed_side(const Shape& shape, double scale);

Placement make_placement(const Shape& shape, double scale, Rotation rotation, int top, int left);

// Uniform top-left over valid positions and uniform right-angle rotation.
Placement sample_placement(const Shape& shape, double scale, std::uint64_t seed);

struct Overlay {
  Image image;
  BinaryMask impacted;  // exactly the written pixels
};

// Nearest-neighbour resample to placement.side, rotate, write over x.
Overlay overlay_patch(const Image& x, const Patch& patch, const Placement& placement);

// Native patch pixel feeding placed offset (row, col).
struct SourcePixel {
  int row;
  int col;
};
SourcePixel source_pixel(int patch_side, const Placement& placement, int row, int col);

// d(target-class logit of the patched image)/d(patch pixels); every written
// pixel's input gradient is accumulated into its source patch pixel.
std::vector<double> patch_gradient(const model::Classifier& model, const Image& x, const Patch& patch,
                                   const Placement& placement, int target_class);

struct PatchTrainingConfig {
  int target_class = 0;
  std::vector<double> scales{0.3, 0.4, 0.5, 0.6, 0.7};
  int patch_side = 16;
  int iterations = 500;
  double step_size = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
};

// Projected gradient ascent from mid-gray on the target logit, one random
// (image, scale, placement) per step, clamped to [0,1] after every update.
Patch train_patch(const model::Classifier& model, std::span<const Image> train_set, const PatchTrainingConfig& cfg);

// One placement per image, scales cycling through `scales`.
std::vector<Placement> sample_placements(std::size_t count, const Shape& shape, std::span<const double> scales,
                                         std::uint64_t seed);

// Mean target-class probability with patch applied at the given placements.
double mean_target_probability(const model::Classifier& model, std::span<const Image> images, const Patch& patch,
                               std::span<const Placement> placements);

// Keeps records whose patched label equals the attack target, in order.
// Throws ConfigError if a record lacks the attack fields.
std::vector<EvalRecord> attack_success_filter(std::vector<EvalRecord> records);

// Header {"format":"impactbench-patch","side":..,"channels":..,"target_class":..,"metadata":{..}}
// followed by side*side*channels little-endian float64s.
void save_patch(const std::filesystem::path& path, const Patch& patch);
Patch load_patch(const std::filesystem::path& path);

}  // namespace impactbench::adversarial
