#include "impactbench/explain/surrogate.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "impactbench/core/random.hpp"

namespace impactbench::explain {

std::string to_string(SampleKernel kernel) {
  switch (kernel) {
    case SampleKernel::kExponential: return "exponential";
    case SampleKernel::kShapley: return "shapley";
    case SampleKernel::kUniform: return "uniform";
  }
  return "unknown";
}

SampleKernel sample_kernel_from_string(const std::string& name) {
  if (name == "exponential") return SampleKernel::kExponential;
  if (name == "shapley") return SampleKernel::kShapley;
  if (name == "uniform") return SampleKernel::kUniform;
  throw ConfigError(fmt::format("unknown sample kernel '{}'", name));
}

void SurrogateConfig::validate(int segment_count) const {
  if (ridge_lambda < 0.0 || !std::isfinite(ridge_lambda)) throw ConfigError("ridge lambda must be >= 0");
  if (kernel == SampleKernel::kExponential && !(kernel_width > 0.0)) {
    throw ConfigError("exponential kernel width must be positive");
  }
  if (enumerate) {
    if (segment_count > 20) throw ConfigError("enumeration is limited to 20 segments");
  } else if (num_samples < segment_count + 1) {
    throw ConfigError(fmt::format("num_samples {} must be at least segment count + 1 = {}", num_samples,
                                  segment_count + 1));
  }
}

double sample_weight(const SurrogateConfig& cfg, int present, int total) {
  switch (cfg.kernel) {
    case SampleKernel::kUniform:
      return 1.0;
    case SampleKernel::kExponential: {
      const double d = static_cast<double>(total - present) / static_cast<double>(total);
      return std::exp(-(d * d) / (cfg.kernel_width * cfg.kernel_width));
    }
    case SampleKernel::kShapley: {
      if (present == 0 || present == total) return kShapleyBoundaryWeight;
      // C(K, k) via lgamma keeps large K finite.
      const double log_binom =
          std::lgamma(total + 1.0) - std::lgamma(present + 1.0) - std::lgamma(total - present + 1.0);
      return (total - 1.0) / (std::exp(log_binom) * present * (total - present));
    }
  }
  return 1.0;
}

namespace {

SaliencyMap spread_over_segments(const Segmentation& seg, const SurrogateFit& fit) {
  std::vector<double> scores(seg.labels.size());
  for (std::size_t p = 0; p < scores.size(); ++p) scores[p] = fit.coefficients[static_cast<std::size_t>(seg.labels[p])];
  return SaliencyMap::create(seg.height, seg.width, std::move(scores));
}

}  // namespace

SurrogateFit surrogate_fit(const Image& x, const model::Classifier& model, const Segmentation& seg,
                           const SurrogateConfig& cfg, const ablation::FillPolicy& fill, int target_class) {
  model::check_input(model, x);
  if (seg.height != x.height() || seg.width != x.width()) throw ShapeError("segmentation does not match the image");
  const int K = seg.segment_count;
  cfg.validate(K);

  const std::size_t rows = cfg.enumerate ? (std::size_t{1} << K) : static_cast<std::size_t>(cfg.num_samples);
  Eigen::MatrixXd design(static_cast<Eigen::Index>(rows + K), K + 1);
  Eigen::VectorXd target = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows + K));
  design.setZero();

  Rng rng(cfg.seed);
  std::vector<bool> present(static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < rows; ++i) {
    int on = 0;
    for (int k = 0; k < K; ++k) {
      present[k] = cfg.enumerate ? ((i >> k) & 1U) != 0 : rng.coin();
      on += present[k] ? 1 : 0;
    }
    BinaryMask removed(x.height(), x.width());
    for (std::size_t p = 0; p < seg.labels.size(); ++p) {
      if (!present[static_cast<std::size_t>(seg.labels[p])]) removed.set(p);
    }
    const double prob = model.classify(ablation::apply_absence(x, removed, fill)).prob(target_class);
    const double root_w = std::sqrt(sample_weight(cfg, on, K));
    const auto row = static_cast<Eigen::Index>(i);
    design(row, 0) = root_w;
    for (int k = 0; k < K; ++k) design(row, k + 1) = present[k] ? root_w : 0.0;
    target(row) = root_w * prob;
  }
  // Ridge rows penalise the coefficients but not the intercept.
  const double root_lambda = std::sqrt(cfg.ridge_lambda);
  for (int k = 0; k < K; ++k) design(static_cast<Eigen::Index>(rows) + k, k + 1) = root_lambda;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < K + 1) {
    throw SingularSystemError(fmt::format("surrogate regression is rank deficient (rank {} of {}); raise lambda",
                                          qr.rank(), K + 1));
  }
  const Eigen::VectorXd beta = qr.solve(target);

  SurrogateFit fit;
  fit.intercept = beta(0);
  fit.coefficients.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) fit.coefficients[k] = beta(k + 1);
  return fit;
}

SaliencyMap surrogate_explain(const Image& x, const model::Classifier& model, const Segmentation& seg,
                              const SurrogateConfig& cfg, const ablation::FillPolicy& fill) {
  const int target = model.classify(x).label();
  const SurrogateFit fit = surrogate_fit(x, model, seg, cfg, fill, target);
  return spread_over_segments(seg, fit);
}

SurrogateExplainer::SurrogateExplainer(std::string name, int cells_per_side, SurrogateConfig cfg,
                                       ablation::FillPolicy fill)
    : name_(std::move(name)), cells_per_side_(cells_per_side), cfg_(cfg), fill_(std::move(fill)) {
  cfg_.validate(cells_per_side * cells_per_side);
  fill_.validate();
}

SaliencyMap SurrogateExplainer::explain(const Image& x, const model::Classifier& model,
                                        const ExplainContext& ctx) const {
  const Segmentation seg = grid_segmentation(x.height(), x.width(), cells_per_side_);
  SurrogateConfig cfg = cfg_;
  cfg.seed = ctx.seed;
  const int target = resolve_target(x, model, ctx);
  const SurrogateFit fit = surrogate_fit(x, model, seg, cfg, fill_, target);
  return spread_over_segments(seg, fit);
}

}  // namespace impactbench::explain
