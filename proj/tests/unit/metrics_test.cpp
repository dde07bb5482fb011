#include <gtest/gtest.h>

#include <algorithm>

#include "impactbench/core/error.hpp"
#include "impactbench/metrics/impact.hpp"
#include "support.hpp"

using namespace impactbench;
using namespace impactbench::metrics;

namespace {

EvalRecord rec(int y, double z, int y_prime, double z_prime) {
  EvalRecord r;
  r.image_id = "r";
  r.y = y;
  r.z = z;
  r.y_prime = y_prime;
  r.z_prime = z_prime;
  return r;
}

EvalRecord with_coverage(EvalRecord r, BinaryMask a, BinaryMask c) {
  r.coverage = CoveragePair{std::move(a), std::move(c)};
  return r;
}

std::vector<EvalRecord> random_batch(Rng& rng, std::size_t n) {
  std::vector<EvalRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(rng.below(4));
    const int yp = rng.uniform() < 0.3 ? static_cast<int>(rng.below(4)) : y;
    out.push_back(rec(y, rng.uniform(0.25, 1.0), yp, rng.uniform()));
  }
  return out;
}

// Direct transcription of the three definitions.
struct Naive {
  double i = 0, strict = 0;
};
Naive naive_scores(const std::vector<EvalRecord>& rs, double tau) {
  Naive n;
  for (const auto& r : rs) {
    const bool flip = r.y_prime != r.y;
    n.strict += flip ? 1 : 0;
    n.i += (flip || r.z_prime <= tau * r.z) ? 1 : 0;
  }
  n.i /= rs.size();
  n.strict /= rs.size();
  return n;
}

}  // namespace

TEST(ImpactScore, HandCountedExamples) {
  const MetricsConfig cfg;
  EXPECT_EQ(impact_score(std::vector{rec(3, 0.9, 3, 0.9)}, cfg), 0.0);
  EXPECT_EQ(impact_score(std::vector{rec(3, 0.9, 5, 0.95)}, cfg), 1.0);
  const std::vector three{rec(1, 0.9, 2, 0.1), rec(1, 0.8, 1, 0.3), rec(1, 0.8, 1, 0.7)};
  EXPECT_DOUBLE_EQ(impact_score(three, cfg), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(impact_score_strict(three), 1.0 / 3.0);
  EXPECT_EQ(impact_score_strict(std::vector{rec(0, 0.9, 1, 0.1), rec(1, 0.9, 0, 0.1)}), 1.0);
  EXPECT_EQ(impact_score_strict(std::vector{rec(0, 0.9, 0, 0.1)}), 0.0);
  // Boundary is inclusive.
  EXPECT_EQ(impact_score(std::vector{rec(0, 0.8, 0, 0.4)}, cfg), 1.0);
}

TEST(ImpactScore, EmptyBatchIsUndefined) {
  const std::vector<EvalRecord> none;
  EXPECT_THROW(impact_score(none, {}), ConfigError);
  EXPECT_THROW(impact_score_strict(none), ConfigError);
  EXPECT_THROW(impact_coverage(none), ConfigError);
  EXPECT_THROW(build_report(none, {}), ConfigError);
  EXPECT_THROW(MetricsConfig{.tau = 0.0}.validate(), ConfigError);
  EXPECT_THROW(MetricsConfig{.tau = 1.5}.validate(), ConfigError);
}

TEST(ImpactCoverage, Examples) {
  const BinaryMask full = BinaryMask::full(3, 3);
  const auto left = BinaryMask::from_pixels(3, 3, {0, 3, 6});
  const auto right = BinaryMask::from_pixels(3, 3, {2, 5, 8});
  const auto rows01 = BinaryMask::from_pixels(4, 4, {0, 1, 2, 3, 4, 5, 6, 7});
  const auto rows12 = BinaryMask::from_pixels(4, 4, {4, 5, 6, 7, 8, 9, 10, 11});
  const auto base = rec(0, 0.9, 1, 0.1);
  EXPECT_EQ(impact_coverage(std::vector{with_coverage(base, full, full)}), 1.0);
  EXPECT_EQ(impact_coverage(std::vector{with_coverage(base, left, right)}), 0.0);
  EXPECT_DOUBLE_EQ(impact_coverage(std::vector{with_coverage(base, full, full), with_coverage(base, rows01, rows12)}),
                   2.0 / 3.0);
  EXPECT_THROW(impact_coverage(std::vector{base}), ConfigError);

  const auto empty = with_coverage(base, BinaryMask(3, 3), BinaryMask(3, 3));
  const auto report = build_report(std::vector{empty, with_coverage(base, full, full)}, {});
  EXPECT_EQ(report.impact_coverage, 0.5);
  EXPECT_TRUE(report.flags[0].empty_union);
  EXPECT_FALSE(report.flags[1].empty_union);
}

TEST(ImpactCoverage, MatchesNaiveOracle) {
  Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    std::vector<EvalRecord> batch;
    double expected = 0.0;
    const std::size_t n = 1 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) {
      const int h = 1 + static_cast<int>(rng.below(16)), w = 1 + static_cast<int>(rng.below(16));
      const auto a = testing_support::random_bools(rng, h * w, rng.uniform());
      const auto c = testing_support::random_bools(rng, h * w, rng.uniform());
      const auto oracle = testing_support::naive_iou(a, c, h, w);
      expected += oracle.union_ == 0 ? 0.0 : static_cast<double>(oracle.intersection) / oracle.union_;
      batch.push_back(with_coverage(rec(0, 0.9, 0, 0.9), testing_support::mask_from_bools(a, h, w),
                                    testing_support::mask_from_bools(c, h, w)));
    }
    EXPECT_NEAR(impact_coverage(batch), expected / n, 1e-15);
  }
}

TEST(Metrics, PropertiesOverRandomBatches) {
  Rng rng(7);
  for (int t = 0; t < 300; ++t) {
    auto batch = random_batch(rng, 1 + rng.below(40));
    double previous = -1.0;
    for (double tau = 0.1; tau <= 0.9 + 1e-12; tau += 0.1) {
      const MetricsConfig cfg{.tau = tau};
      const double i = impact_score(batch, cfg);
      const double strict = impact_score_strict(batch);
      const Naive n = naive_scores(batch, tau);
      EXPECT_EQ(i, n.i);
      EXPECT_EQ(strict, n.strict);
      EXPECT_LE(strict, i);
      EXPECT_GE(i, previous);
      EXPECT_GE(i, 0.0);
      EXPECT_LE(i, 1.0);
      previous = i;
    }
    auto shuffled = batch;
    rng.shuffle(std::span<EvalRecord>(shuffled));
    EXPECT_EQ(impact_score(shuffled, {}), impact_score(batch, {}));
    EXPECT_EQ(impact_score_strict(shuffled), impact_score_strict(batch));
  }
}

TEST(Metrics, ReportMatchesDirectFunctions) {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const auto batch = random_batch(rng, 1 + rng.below(30));
    const MetricsConfig cfg{.tau = rng.uniform(0.05, 1.0)};
    const auto report = build_report(batch, cfg);
    EXPECT_EQ(report.n, batch.size());
    EXPECT_EQ(report.impact_score, impact_score(batch, cfg));
    EXPECT_EQ(report.impact_strict, impact_score_strict(batch));
    EXPECT_FALSE(report.impact_coverage.has_value());
    ASSERT_EQ(report.flags.size(), batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      EXPECT_EQ(report.flags[i].decision_flip, batch[i].y_prime != batch[i].y);
      EXPECT_EQ(report.flags[i].confidence_drop, batch[i].z_prime <= cfg.tau * batch[i].z);
    }
  }
  std::vector<EvalRecord> unchanged;
  for (int i = 0; i < 5; ++i) unchanged.push_back(rec(i % 3, 0.7, i % 3, 0.7));
  const auto zero = build_report(unchanged, {});
  EXPECT_EQ(zero.impact_score, 0.0);
  EXPECT_EQ(zero.impact_strict, 0.0);
}

TEST(Metrics, ArgmaxVariant) {
  auto r = rec(0, 0.9, 1, 0.2);
  r.z_prime_argmax = 0.6;
  auto kept = rec(0, 0.9, 0, 0.3);
  kept.z_prime_argmax = 0.3;
  MetricsConfig cfg;
  cfg.argmax_variant = true;
  const auto report = build_report(std::vector{r, kept}, cfg);
  ASSERT_TRUE(report.impact_score_argmax_variant.has_value());
  EXPECT_EQ(report.impact_score, 1.0);
  EXPECT_EQ(*report.impact_score_argmax_variant, 1.0);
  EXPECT_FALSE(build_report(std::vector{r, kept}, {}).impact_score_argmax_variant.has_value());
}
