#include "impactbench/ablation/absence.hpp"

#include <cmath>

#include <fmt/format.h>

#include "impactbench/core/error.hpp"
#include "impactbench/core/random.hpp"

namespace impactbench::ablation {

void FillPolicy::validate() const {
  if (kind == Kind::kDatasetChannelMean) {
    if (dataset_means.empty()) throw ConfigError("dataset-channel-mean fill needs per-channel means");
    for (double m : dataset_means) {
      if (!std::isfinite(m) || m < 0.0 || m > 1.0) throw ConfigError("dataset channel means must lie in [0,1]");
    }
  } else if (!dataset_means.empty()) {
    throw ConfigError("dataset means are only valid with dataset-channel-mean fill");
  }
}

std::string to_string(FillPolicy::Kind kind) {
  switch (kind) {
    case FillPolicy::Kind::kZero: return "zero";
    case FillPolicy::Kind::kImageChannelMean: return "image-mean";
    case FillPolicy::Kind::kDatasetChannelMean: return "dataset-mean";
    case FillPolicy::Kind::kUniformNoise: return "uniform-noise";
  }
  return "unknown";
}

FillPolicy::Kind fill_kind_from_string(const std::string& name) {
  if (name == "zero") return FillPolicy::Kind::kZero;
  if (name == "image-mean") return FillPolicy::Kind::kImageChannelMean;
  if (name == "dataset-mean") return FillPolicy::Kind::kDatasetChannelMean;
  if (name == "uniform-noise") return FillPolicy::Kind::kUniformNoise;
  throw ConfigError(fmt::format("unknown fill policy '{}'", name));
}

std::vector<double> fill_values(const Image& x, const BinaryMask& removed, const FillPolicy& policy) {
  const auto channels = static_cast<std::size_t>(x.channels());
  switch (policy.kind) {
    case FillPolicy::Kind::kZero:
    case FillPolicy::Kind::kUniformNoise:
      return std::vector<double>(channels, 0.0);
    case FillPolicy::Kind::kImageChannelMean: {
      std::vector<double> means(channels, 0.0);
      const std::size_t plane = x.shape().pixels();
      // Kept pixels only, so a second pass reproduces the same fill.
      const bool all_removed = removed.area() == plane;
      const std::size_t kept = all_removed ? plane : plane - removed.area();
      for (std::size_t c = 0; c < channels; ++c) {
        // Shifted by the first kept value so a constant plane gives that value exactly.
        double shift = 0.0, sum = 0.0;
        bool first = true;
        for (std::size_t i = 0; i < plane; ++i) {
          if (!all_removed && removed.test(i)) continue;
          const double v = x.data()[c * plane + i];
          if (first) shift = v, first = false;
          sum += v - shift;
        }
        means[c] = std::min(1.0, std::max(0.0, shift + sum / static_cast<double>(kept)));
      }
      return means;
    }
    case FillPolicy::Kind::kDatasetChannelMean:
      if (policy.dataset_means.size() != channels) {
        throw ShapeError(fmt::format("fill has {} channel means, image has {} channels", policy.dataset_means.size(),
                                     channels));
      }
      return policy.dataset_means;
  }
  return {};
}

Image apply_absence(const Image& x, const BinaryMask& removed, const FillPolicy& policy) {
  if (removed.height() != x.height() || removed.width() != x.width()) {
    throw ShapeError(fmt::format("mask {}x{} does not match image {}x{}", removed.height(), removed.width(),
                                 x.height(), x.width()));
  }
  policy.validate();
  std::vector<double> out = x.to_vector();
  if (removed.empty()) return Image::create(x.shape(), std::move(out));

  const std::vector<double> fill = fill_values(x, removed, policy);
  const std::size_t plane = x.shape().pixels();
  const std::vector<std::size_t> pixels = removed.set_pixels();
  if (policy.kind == FillPolicy::Kind::kUniformNoise) {
    Rng rng(policy.noise_seed);
    for (std::size_t p : pixels) {
      for (int c = 0; c < x.channels(); ++c) out[static_cast<std::size_t>(c) * plane + p] = rng.uniform();
    }
  } else {
    for (std::size_t p : pixels) {
      for (int c = 0; c < x.channels(); ++c) out[static_cast<std::size_t>(c) * plane + p] = fill[c];
    }
  }
  return Image::create(x.shape(), std::move(out));
}

}  // namespace impactbench::ablation
