#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "impactbench/adversarial/patch.hpp"
#include "impactbench/core/error.hpp"
#include "impactbench/model/toy_cnn.hpp"
#include "support.hpp"

using namespace impactbench;
using namespace impactbench::adversarial;
using testing_support::kink_margin;
using testing_support::LinearModel;
using testing_support::naive_forward;
using testing_support::random_image;

TEST(Overlay, TopLeftHalfScale) {
  const Image x = Image::filled({1, 32, 32}, 0.3);
  const Patch patch = Patch::uniform(16, 1, 0, 0.9);
  const auto out = overlay_patch(x, patch, make_placement(x.shape(), 0.5, Rotation::k0, 0, 0));
  EXPECT_EQ(out.impacted.area(), 256u);
  for (int r = 0; r < 32; ++r) {
    for (int c = 0; c < 32; ++c) {
      const bool inside = r < 16 && c < 16;
      EXPECT_EQ(out.impacted.test(r, c), inside);
      EXPECT_EQ(out.image.at(0, r, c), inside ? 0.9 : 0.3);
    }
  }
}

TEST(Overlay, FullSideCoversEverything) {
  const Shape shape{2, 10, 10};
  const Placement p = sample_placement(shape, 1.0, 17);
  EXPECT_EQ(p.top, 0);
  EXPECT_EQ(p.left, 0);
  const auto out = overlay_patch(Image::filled(shape, 0.1), Patch::uniform(5, 2, 0), p);
  EXPECT_EQ(out.impacted, BinaryMask::full(10, 10));
}

TEST(Overlay, RotationsMatchIndexOracle) {
  // Distinct values so any misplaced pixel shows.
  Patch patch = Patch::uniform(4, 1, 0);
  for (int i = 0; i < 16; ++i) patch.data[i] = i / 16.0;
  const Image x = Image::filled({1, 6, 6}, 1.0);
  for (int rot = 0; rot < 4; ++rot) {
    const auto out = overlay_patch(x, patch, make_placement(x.shape(), 4.0 / 6.0, static_cast<Rotation>(rot), 1, 2));
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        // Clockwise rotation: placed (r, c) shows the patch pixel that the
        // inverse rotation maps it to.
        int i = r, j = c;
        if (rot == 1) i = 3 - c, j = r;
        if (rot == 2) i = 3 - r, j = 3 - c;
        if (rot == 3) i = c, j = 3 - r;
        EXPECT_EQ(out.image.at(0, 1 + r, 2 + c), patch.at(0, i, j)) << rot;
      }
    }
    // Clockwise: the patch's top-left corner lands top-right at 90 degrees.
    if (rot == 1) EXPECT_EQ(out.image.at(0, 1, 5), patch.at(0, 0, 0));
  }
}

TEST(Overlay, NearestNeighbourUpsampling) {
  Patch patch = Patch::uniform(2, 1, 0);
  patch.data = {0.1, 0.2, 0.3, 0.4};
  const auto out = overlay_patch(Image::filled({1, 4, 4}, 1.0), patch, make_placement({1, 4, 4}, 1.0, Rotation::k0, 0, 0));
  EXPECT_EQ(out.image.to_vector(),
            (std::vector<double>{0.1, 0.1, 0.2, 0.2, 0.1, 0.1, 0.2, 0.2, 0.3, 0.3, 0.4, 0.4, 0.3, 0.3, 0.4, 0.4}));
}

TEST(Overlay, OnlyImpactedPixelsChange) {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const Shape shape{3, 12, 9};
    const Image x = random_image(shape, rng);
    Patch patch = Patch::uniform(5, 3, 0);
    for (double& v : patch.data) v = rng.uniform();
    const double scale = rng.uniform(0.1, 0.99);
    const Placement p = sample_placement(shape, scale, rng.next());
    const auto out = overlay_patch(x, patch, p);
    EXPECT_EQ(out.impacted.area(), static_cast<std::size_t>(p.side * p.side));
    for (int ch = 0; ch < 3; ++ch) {
      for (int r = 0; r < 12; ++r) {
        for (int c = 0; c < 9; ++c) {
          if (!out.impacted.test(r, c)) EXPECT_EQ(out.image.at(ch, r, c), x.at(ch, r, c));
        }
      }
    }
    EXPECT_EQ(overlay_patch(x, patch, p).image, out.image);
  }
}

TEST(Placement, ScaleAndBounds) {
  const Shape shape{1, 32, 32};
  EXPECT_EQ(placed_side(shape, 0.3), 10);
  EXPECT_EQ(placed_side(shape, 0.7), 22);
  EXPECT_THROW(placed_side(shape, 1.2), RangeError);
  EXPECT_THROW(placed_side(shape, 0.001), RangeError);
  EXPECT_THROW(make_placement(shape, 0.5, Rotation::k0, 17, 0), RangeError);
  EXPECT_EQ(sample_placement(shape, 0.4, 3), sample_placement(shape, 0.4, 3));
  EXPECT_THROW(overlay_patch(Image::filled(shape, 0.0), Patch::uniform(4, 3, 0), sample_placement(shape, 0.4, 3)),
               ShapeError);
}

TEST(Placement, TallyCoversEveryPosition) {
  const Shape shape{1, 32, 32};
  const int side = placed_side(shape, 0.3);
  const int span = 32 - side + 1;
  std::vector<int> seen(static_cast<std::size_t>(span * span), 0);
  std::set<int> rotations;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const Placement p = sample_placement(shape, 0.3, derive_seed(99, std::to_string(seed), "tally"));
    ++seen[static_cast<std::size_t>(p.top * span + p.left)];
    rotations.insert(static_cast<int>(p.rotation));
  }
  for (int count : seen) EXPECT_GT(count, 0);
  EXPECT_EQ(rotations.size(), 4u);
}

TEST(PatchTraining, ZeroIterationsIsMidGray) {
  const Shape shape{1, 8, 8};
  const LinearModel model(shape, std::vector<double>(64, 0.01), 0.0);
  PatchTrainingConfig cfg;
  cfg.iterations = 0;
  cfg.patch_side = 4;
  const Patch p = train_patch(model, std::vector<Image>{Image::filled(shape, 0.2)}, cfg);
  EXPECT_EQ(p.data, std::vector<double>(16, 0.5));
}

TEST(PatchTraining, LinearAscent) {
  const Shape shape{1, 8, 8};
  const LinearModel model(shape, std::vector<double>(64, 0.01), 0.0);
  PatchTrainingConfig cfg;
  cfg.target_class = 1;
  cfg.scales = {0.5};
  cfg.patch_side = 4;
  cfg.step_size = 10.0;
  const std::vector<Image> train{Image::filled(shape, 0.2)};
  for (int it = 0; it <= 7; ++it) {
    cfg.iterations = it;
    const Patch p = train_patch(model, train, cfg);
    for (double v : p.data) EXPECT_NEAR(v, std::min(1.0, 0.5 + 0.1 * it), 1e-12) << it;
  }
}

TEST(PatchTraining, GradientMatchesFiniteDifferences) {
  const model::Architecture arch{1, 10, 10, 2, 3, 3, model::Activation::kRelu};
  const auto net = model::ToyCnn::initialize(arch, 4);
  Rng rng(8);
  int checked = 0;
  for (int t = 0; checked < 8 && t < 500; ++t) {
    const Image x = random_image(arch.input_shape(), rng);
    Patch patch = Patch::uniform(3, 1, 2);
    for (double& v : patch.data) v = rng.uniform(0.2, 0.8);
    const Placement pl = sample_placement(arch.input_shape(), 0.6, rng.next());
    const auto base = overlay_patch(x, patch, pl);
    if (kink_margin(arch, naive_forward(arch, net.parameters(), base.image.to_vector())) < 1e-3) continue;
    const auto g = patch_gradient(net, x, patch, pl, 2);
    for (std::size_t i = 0; i < patch.data.size(); ++i) {
      Patch up = patch, down = patch;
      up.data[i] += 1e-4;
      down.data[i] -= 1e-4;
      const double numeric = (net.logits(overlay_patch(x, up, pl).image.data())[2] -
                              net.logits(overlay_patch(x, down, pl).image.data())[2]) /
                             2e-4;
      EXPECT_LE(std::abs(g[i] - numeric) / std::max(std::abs(g[i]), 1e-8), 1e-4);
    }
    ++checked;
  }
  EXPECT_EQ(checked, 8);
}

TEST(PatchTraining, RejectsBadInputs) {
  const Shape shape{1, 8, 8};
  const testing_support::ConstantModel constant(shape, {0.5, 0.5});
  PatchTrainingConfig cfg;
  const std::vector<Image> train{Image::filled(shape, 0.2)};
  EXPECT_THROW(train_patch(constant, train, cfg), ConfigError);
  const LinearModel model(shape, std::vector<double>(64, 0.01), 0.0);
  EXPECT_THROW(train_patch(model, std::vector<Image>{}, cfg), ConfigError);
  cfg.scales = {1.0};
  EXPECT_THROW(train_patch(model, train, cfg), ConfigError);
}

TEST(SuccessFilter, KeepsSuccessfulRecordsInOrder) {
  auto rec = [](const std::string& id, int target, int label) {
    EvalRecord r;
    r.image_id = id;
    r.attack_target = target;
    r.patched_label = label;
    return r;
  };
  const std::vector<EvalRecord> mixed{rec("a", 1, 0), rec("b", 1, 1), rec("c", 1, 2), rec("d", 0, 0), rec("e", 2, 1)};
  const auto kept = attack_success_filter(mixed);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].image_id, "b");
  EXPECT_EQ(kept[1].image_id, "d");
  const std::vector<EvalRecord> all{rec("a", 1, 1), rec("b", 0, 0)};
  EXPECT_EQ(attack_success_filter(all), all);
  EXPECT_TRUE(attack_success_filter({rec("a", 1, 0)}).empty());
  EXPECT_THROW(attack_success_filter({EvalRecord{}}), ConfigError);
}

TEST(PatchFile, RoundTrip) {
  Patch p = Patch::uniform(5, 3, 2);
  Rng rng(1);
  for (double& v : p.data) v = rng.uniform();
  p.metadata = {12, 0.625, 0.5};
  const auto path = std::filesystem::temp_directory_path() / "impactbench_patch_roundtrip.bin";
  save_patch(path, p);
  EXPECT_EQ(load_patch(path), p);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 1);
  EXPECT_THROW(load_patch(path), IoError);
  std::filesystem::remove(path);
}
