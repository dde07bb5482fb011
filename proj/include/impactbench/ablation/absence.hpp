#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "impactbench/core/image.hpp"
#include "impactbench/core/mask.hpp"

namespace impactbench::ablation {

// How removed pixels are filled. A masked pixel is replaced in every channel.
struct FillPolicy {
  enum class Kind {
    kZero,
    kImageChannelMean,    // per-channel mean of the pixels that are kept
    kDatasetChannelMean,  // fixed per-channel means supplied up front
    kUniformNoise,        // seeded uniform [0,1) per masked element
  };

  Kind kind = Kind::kImageChannelMean;
  std::vector<double> dataset_means;
  std::uint64_t noise_seed = 0;

  static FillPolicy zero() { return {Kind::kZero, {}, 0}; }
  static FillPolicy image_mean() { return {Kind::kImageChannelMean, {}, 0}; }
  static FillPolicy dataset_mean(std::vector<double> means) { return {Kind::kDatasetChannelMean, std::move(means), 0}; }
  static FillPolicy uniform_noise(std::uint64_t seed) { return {Kind::kUniformNoise, {}, seed}; }

  void validate() const;
};

std::string to_string(FillPolicy::Kind kind);
FillPolicy::Kind fill_kind_from_string(const std::string& name);

// Per-channel fill values for the masked pixels of x (not used for noise).
// The image mean is taken over unmasked pixels, or the whole image when
// everything is masked.
std::vector<double> fill_values(const Image& x, const BinaryMask& removed, const FillPolicy& policy);

// x' = x with the pixels of `removed` replaced per policy. Pixels outside the
// mask are copied bit for bit.
Image apply_absence(const Image& x, const BinaryMask& removed, const FillPolicy& policy);

}  // namespace impactbench::ablation
