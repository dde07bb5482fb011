#include "impactbench/data/dataset.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "impactbench/core/error.hpp"
#include "impactbench/core/random.hpp"

namespace impactbench::data {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<LabelledExample> load_folder(const std::filesystem::path& root, const std::filesystem::path& labels_file,
                                         int num_classes) {
  if (num_classes <= 0) throw ConfigError("num_classes must be positive");
  const std::filesystem::path labels_path = labels_file.is_absolute() ? labels_file : root / labels_file;
  std::ifstream in(labels_path);
  if (!in) throw IoError(fmt::format("cannot open labels file {}", labels_path.string()));

  std::string line;
  if (!std::getline(in, line) || trim(line) != "filename,label") {
    throw IoError(fmt::format("{}: expected header 'filename,label'", labels_path.string()));
  }
  std::vector<LabelledExample> out;
  for (int line_no = 2; std::getline(in, line); ++line_no) {
    const std::string row = trim(line);
    if (row.empty()) continue;
    const auto comma = row.rfind(',');
    if (comma == std::string::npos) {
      throw IoError(fmt::format("{}:{}: expected 'filename,label'", labels_path.string(), line_no));
    }
    const std::string filename = trim(row.substr(0, comma));
    int label = -1;
    try {
      std::size_t used = 0;
      const std::string field = trim(row.substr(comma + 1));
      label = std::stoi(field, &used);
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw IoError(fmt::format("{}:{}: label of '{}' is not an integer", labels_path.string(), line_no, filename));
    }
    if (label < 0 || label >= num_classes) {
      throw RangeError(fmt::format("{}:{}: label {} of '{}' outside [0,{})", labels_path.string(), line_no, label,
                                   filename, num_classes));
    }
    const std::filesystem::path image_path = root / filename;
    if (!std::filesystem::exists(image_path)) {
      throw IoError(fmt::format("{}:{}: image '{}' not found", labels_path.string(), line_no, filename));
    }
    out.push_back(LabelledExample{read_image(image_path), label, filename, std::nullopt});
  }
  return out;
}

void SyntheticSpec::validate() const {
  if (num_classes < 1) throw ConfigError("synthetic num_classes must be positive");
  if (channels < 1) throw ConfigError("synthetic channels must be positive");
  if (samples_per_class < 1) throw ConfigError("synthetic samples_per_class must be positive");
  if (feature_side < 1 || feature_side >= image_side) {
    throw ConfigError(fmt::format("feature side {} must lie in [1, image side {})", feature_side, image_side));
  }
  if (!(noise_amplitude >= 0.0 && noise_amplitude <= 0.5)) throw ConfigError("noise amplitude must lie in [0, 0.5]");
}

double class_intensity(int cls, int num_classes) {
  // Spread classes over [0.05, 0.30] and [0.70, 0.95].
  const double t = num_classes == 1 ? 0.0 : static_cast<double>(cls) / (num_classes - 1);
  const double u = 0.5 * t;
  return u <= 0.25 ? 0.05 + u : 0.70 + (u - 0.25);
}

std::vector<LabelledExample> generate_planted(const SyntheticSpec& spec) {
  spec.validate();
  const Shape shape{spec.channels, spec.image_side, spec.image_side};
  const int total = spec.num_classes * spec.samples_per_class;
  Rng rng(spec.seed);
  std::vector<LabelledExample> out;
  out.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    const int label = i % spec.num_classes;
    std::vector<double> data(shape.size());
    for (double& v : data) v = 0.5 + spec.noise_amplitude * (2.0 * rng.uniform() - 1.0);
    const int span = spec.image_side - spec.feature_side + 1;
    const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(span)));
    const int left = static_cast<int>(rng.below(static_cast<std::uint64_t>(span)));
    const double value = class_intensity(label, spec.num_classes);
    BinaryMask region(spec.image_side, spec.image_side);
    for (int r = top; r < top + spec.feature_side; ++r) {
      for (int c = left; c < left + spec.feature_side; ++c) {
        region.set(r, c);
        for (int ch = 0; ch < spec.channels; ++ch) {
          data[(static_cast<std::size_t>(ch) * spec.image_side + r) * spec.image_side + c] = value;
        }
      }
    }
    for (double& v : data) v = std::clamp(v, 0.0, 1.0);
    out.push_back(LabelledExample{Image::create(shape, std::move(data)), label,
                                  fmt::format("planted-{}-{:05d}", spec.seed, i), std::move(region)});
  }
  return out;
}

std::vector<Image> generate_background(const SyntheticSpec& spec, std::size_t count) {
  spec.validate();
  const Shape shape{spec.channels, spec.image_side, spec.image_side};
  Rng rng(mix64(spec.seed ^ 0xb4c6'0f1eULL));
  std::vector<Image> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> data(shape.size());
    for (double& v : data) v = std::clamp(0.5 + spec.noise_amplitude * (2.0 * rng.uniform() - 1.0), 0.0, 1.0);
    out.push_back(Image::create(shape, std::move(data)));
  }
  return out;
}

std::vector<Image> images_of(const std::vector<LabelledExample>& examples) {
  std::vector<Image> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.image);
  return out;
}

std::vector<int> labels_of(const std::vector<LabelledExample>& examples) {
  std::vector<int> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.label);
  return out;
}

}  // namespace impactbench::data
