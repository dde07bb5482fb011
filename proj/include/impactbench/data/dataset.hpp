#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "impactbench/core/image.hpp"
#include "impactbench/core/mask.hpp"

namespace impactbench::data {

struct LabelledExample {
  Image image;
  int label = 0;
  std::string id;
  std::optional<BinaryMask> ground_truth;  // synthetic data only
};

// Binary PPM/PGM (P6/P5, maxval up to 65535) or PNG, chosen by magic bytes.
Image read_image(const std::filesystem::path& path);
// P5 for one channel, P6 for three; 8-bit, rounded.
void write_ppm(const std::filesystem::path& path, const Image& image);
void write_png(const std::filesystem::path& path, const Image& image);

// Reads a `filename,label` CSV (header required) and the images it names,
// relative to `root`, in file order.
std::vector<LabelledExample> load_folder(const std::filesystem::path& root, const std::filesystem::path& labels_file,
                                         int num_classes);

struct SyntheticSpec {
  int num_classes = 3;
  int image_side = 24;
  int samples_per_class = 200;
  int feature_side = 6;
  double noise_amplitude = 0.1;
  std::uint64_t seed = 1;
  int channels = 1;

  void validate() const;
};

// Constant intensity stamped for class k of `num_classes`; values avoid the
// band around the 0.5 background.
double class_intensity(int cls, int num_classes);

// Background 0.5 + uniform noise in [-amplitude, amplitude]; the class
// intensity fills a feature_side square at a seeded position, which is also
// the example's ground-truth region. Classes are interleaved.
std::vector<LabelledExample> generate_planted(const SyntheticSpec& spec);

// `count` feature-free images drawn like the planted backgrounds, from a
// stream independent of generate_planted's.
std::vector<Image> generate_background(const SyntheticSpec& spec, std::size_t count);

std::vector<Image> images_of(const std::vector<LabelledExample>& examples);
std::vector<int> labels_of(const std::vector<LabelledExample>& examples);

}  // namespace impactbench::data
