#include "impactbench/model/toy_cnn.hpp"

#include <cmath>

#include <fmt/format.h>

#include "impactbench/core/error.hpp"
#include "impactbench/core/random.hpp"

namespace impactbench::model {

std::string to_string(Activation activation) {
  return activation == Activation::kRelu ? "relu" : "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigError(fmt::format("unknown activation '{}'", name));
}

std::size_t Architecture::conv_weight_count() const {
  return static_cast<std::size_t>(conv_channels) * in_channels * kernel * kernel;
}

std::size_t Architecture::dense_inputs() const {
  return static_cast<std::size_t>(conv_channels) * pooled_height() * pooled_width();
}

std::size_t Architecture::dense_weight_count() const {
  return static_cast<std::size_t>(num_classes) * dense_inputs();
}

void Architecture::validate() const {
  if (in_channels <= 0 || conv_channels <= 0 || num_classes <= 0) {
    throw ConfigError("architecture channel and class counts must be positive");
  }
  if (height < 2 || width < 2) throw ConfigError("architecture input must be at least 2x2");
  if (kernel <= 0 || kernel % 2 == 0) throw ConfigError(fmt::format("kernel size {} must be odd", kernel));
}

Parameters Parameters::zeros(const Architecture& arch) {
  Parameters p;
  p.conv_weights.assign(arch.conv_weight_count(), 0.0);
  p.conv_bias.assign(static_cast<std::size_t>(arch.conv_channels), 0.0);
  p.dense_weights.assign(arch.dense_weight_count(), 0.0);
  p.dense_bias.assign(static_cast<std::size_t>(arch.num_classes), 0.0);
  return p;
}

void Parameters::axpy(double alpha, const Parameters& other) {
  auto add = [alpha](std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += alpha * src[i];
  };
  add(conv_weights, other.conv_weights);
  add(conv_bias, other.conv_bias);
  add(dense_weights, other.dense_weights);
  add(dense_bias, other.dense_bias);
}

ToyCnn::ToyCnn(Architecture arch, Parameters params) : arch_(arch), params_(std::move(params)) {
  arch_.validate();
  const Parameters expected = Parameters::zeros(arch_);
  if (params_.conv_weights.size() != expected.conv_weights.size() ||
      params_.conv_bias.size() != expected.conv_bias.size() ||
      params_.dense_weights.size() != expected.dense_weights.size() ||
      params_.dense_bias.size() != expected.dense_bias.size()) {
    throw ShapeError("parameter counts do not match the architecture");
  }
  for (const auto* block : {&params_.conv_weights, &params_.conv_bias, &params_.dense_weights, &params_.dense_bias}) {
    for (double v : *block) {
      if (!std::isfinite(v)) throw RangeError("model parameters must be finite");
    }
  }
}

ToyCnn ToyCnn::initialize(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  Parameters p = Parameters::zeros(arch);
  Rng rng(seed);
  const double conv_scale = 1.0 / std::sqrt(static_cast<double>(arch.in_channels * arch.kernel * arch.kernel));
  const double dense_scale = 1.0 / std::sqrt(static_cast<double>(arch.dense_inputs()));
  for (double& w : p.conv_weights) w = rng.uniform(-conv_scale, conv_scale);
  for (double& b : p.conv_bias) b = rng.uniform(-conv_scale, conv_scale);
  for (double& w : p.dense_weights) w = rng.uniform(-dense_scale, dense_scale);
  for (double& b : p.dense_bias) b = rng.uniform(-dense_scale, dense_scale);
  return ToyCnn(arch, std::move(p));
}

ToyCnn::Activations ToyCnn::run(std::span<const double> x) const {
  const int C = arch_.in_channels, H = arch_.height, W = arch_.width;
  const int O = arch_.conv_channels, K = arch_.kernel, pad = K / 2;
  const int PH = arch_.pooled_height(), PW = arch_.pooled_width();
  if (x.size() != arch_.input_shape().size()) {
    throw ShapeError(fmt::format("input length {} does not match {}", x.size(), arch_.input_shape().size()));
  }

  Activations acts;
  acts.pre.assign(static_cast<std::size_t>(O) * H * W, 0.0);
  for (int o = 0; o < O; ++o) {
    double* out = acts.pre.data() + static_cast<std::size_t>(o) * H * W;
    for (int i = 0; i < H * W; ++i) out[i] = params_.conv_bias[o];
    for (int c = 0; c < C; ++c) {
      const double* in = x.data() + static_cast<std::size_t>(c) * H * W;
      const double* kern = params_.conv_weights.data() + (static_cast<std::size_t>(o) * C + c) * K * K;
      for (int kr = 0; kr < K; ++kr) {
        for (int kc = 0; kc < K; ++kc) {
          const double w = kern[kr * K + kc];
          const int dr = kr - pad, dc = kc - pad;
          const int r0 = std::max(0, -dr), r1 = std::min(H, H - dr);
          const int c0 = std::max(0, -dc), c1 = std::min(W, W - dc);
          for (int r = r0; r < r1; ++r) {
            const double* src = in + static_cast<std::size_t>(r + dr) * W + dc;
            double* dst = out + static_cast<std::size_t>(r) * W;
            for (int col = c0; col < c1; ++col) dst[col] += w * src[col];
          }
        }
      }
    }
  }

  const bool relu = arch_.activation == Activation::kRelu;
  acts.pooled.assign(arch_.dense_inputs(), 0.0);
  for (int o = 0; o < O; ++o) {
    const double* pre = acts.pre.data() + static_cast<std::size_t>(o) * H * W;
    for (int pr = 0; pr < PH; ++pr) {
      for (int pc = 0; pc < PW; ++pc) {
        double sum = 0.0;
        for (int i = 0; i < 2; ++i) {
          for (int j = 0; j < 2; ++j) {
            const double v = pre[(2 * pr + i) * W + 2 * pc + j];
            sum += relu ? (v > 0.0 ? v : 0.0) : v;
          }
        }
        acts.pooled[(static_cast<std::size_t>(o) * PH + pr) * PW + pc] = 0.25 * sum;
      }
    }
  }

  const std::size_t D = arch_.dense_inputs();
  acts.logits.assign(static_cast<std::size_t>(arch_.num_classes), 0.0);
  for (int k = 0; k < arch_.num_classes; ++k) {
    const double* row = params_.dense_weights.data() + static_cast<std::size_t>(k) * D;
    double acc = params_.dense_bias[k];
    for (std::size_t j = 0; j < D; ++j) acc += row[j] * acts.pooled[j];
    acts.logits[k] = acc;
  }
  return acts;
}

std::vector<double> ToyCnn::backprop_to_pre(const Activations& acts, std::span<const double> dlogits) const {
  const int H = arch_.height, W = arch_.width, O = arch_.conv_channels;
  const int PH = arch_.pooled_height(), PW = arch_.pooled_width();
  const std::size_t D = arch_.dense_inputs();

  std::vector<double> dpooled(D, 0.0);
  for (int k = 0; k < arch_.num_classes; ++k) {
    if (dlogits[k] == 0.0) continue;
    const double* row = params_.dense_weights.data() + static_cast<std::size_t>(k) * D;
    for (std::size_t j = 0; j < D; ++j) dpooled[j] += dlogits[k] * row[j];
  }

  const bool relu = arch_.activation == Activation::kRelu;
  std::vector<double> dpre(acts.pre.size(), 0.0);
  for (int o = 0; o < O; ++o) {
    for (int pr = 0; pr < PH; ++pr) {
      for (int pc = 0; pc < PW; ++pc) {
        const double g = 0.25 * dpooled[(static_cast<std::size_t>(o) * PH + pr) * PW + pc];
        for (int i = 0; i < 2; ++i) {
          for (int j = 0; j < 2; ++j) {
            const std::size_t idx = (static_cast<std::size_t>(o) * H + 2 * pr + i) * W + 2 * pc + j;
            if (!relu || acts.pre[idx] > 0.0) dpre[idx] = g;
          }
        }
      }
    }
  }
  return dpre;
}

std::vector<double> ToyCnn::logits(std::span<const double> x) const { return run(x).logits; }

std::vector<double> ToyCnn::input_gradient(std::span<const double> x, int class_index,
                                           GradientTarget target) const {
  if (class_index < 0 || class_index >= arch_.num_classes) {
    throw RangeError(fmt::format("class index {} outside [0,{})", class_index, arch_.num_classes));
  }
  const Activations acts = run(x);
  std::vector<double> dlogits(static_cast<std::size_t>(arch_.num_classes), 0.0);
  if (target == GradientTarget::kLogit) {
    dlogits[class_index] = 1.0;
  } else {
    const std::vector<double> p = softmax(acts.logits);
    for (int j = 0; j < arch_.num_classes; ++j) {
      dlogits[j] = p[class_index] * ((j == class_index ? 1.0 : 0.0) - p[j]);
    }
  }
  const std::vector<double> dpre = backprop_to_pre(acts, dlogits);

  const int C = arch_.in_channels, H = arch_.height, W = arch_.width;
  const int O = arch_.conv_channels, K = arch_.kernel, pad = K / 2;
  std::vector<double> dx(x.size(), 0.0);
  for (int o = 0; o < O; ++o) {
    const double* g = dpre.data() + static_cast<std::size_t>(o) * H * W;
    for (int c = 0; c < C; ++c) {
      double* out = dx.data() + static_cast<std::size_t>(c) * H * W;
      const double* kern = params_.conv_weights.data() + (static_cast<std::size_t>(o) * C + c) * K * K;
      for (int kr = 0; kr < K; ++kr) {
        for (int kc = 0; kc < K; ++kc) {
          const double w = kern[kr * K + kc];
          if (w == 0.0) continue;
          const int dr = kr - pad, dc = kc - pad;
          const int r0 = std::max(0, -dr), r1 = std::min(H, H - dr);
          const int c0 = std::max(0, -dc), c1 = std::min(W, W - dc);
          for (int r = r0; r < r1; ++r) {
            double* dst = out + static_cast<std::size_t>(r + dr) * W + dc;
            const double* src = g + static_cast<std::size_t>(r) * W;
            for (int col = c0; col < c1; ++col) dst[col] += w * src[col];
          }
        }
      }
    }
  }
  return dx;
}

LossAndGradient ToyCnn::loss_gradient(std::span<const double> x, int label) const {
  if (label < 0 || label >= arch_.num_classes) throw RangeError(fmt::format("label {} out of range", label));
  std::vector<double> target(static_cast<std::size_t>(arch_.num_classes), 0.0);
  target[static_cast<std::size_t>(label)] = 1.0;
  return loss_gradient(x, target);
}

LossAndGradient ToyCnn::loss_gradient(std::span<const double> x, std::span<const double> target) const {
  if (target.size() != static_cast<std::size_t>(arch_.num_classes)) throw ShapeError("target length != num_classes");
  const Activations acts = run(x);
  std::vector<double> dlogits = softmax(acts.logits);
  LossAndGradient out;
  for (int k = 0; k < arch_.num_classes; ++k) {
    if (target[k] != 0.0) out.loss -= target[k] * std::log(std::max(dlogits[k], 1e-300));
    dlogits[k] -= target[k];
  }

  out.gradient = Parameters::zeros(arch_);
  Parameters& g = out.gradient;
  const std::size_t D = arch_.dense_inputs();
  for (int k = 0; k < arch_.num_classes; ++k) {
    g.dense_bias[k] = dlogits[k];
    double* row = g.dense_weights.data() + static_cast<std::size_t>(k) * D;
    for (std::size_t j = 0; j < D; ++j) row[j] = dlogits[k] * acts.pooled[j];
  }

  const std::vector<double> dpre = backprop_to_pre(acts, dlogits);
  const int C = arch_.in_channels, H = arch_.height, W = arch_.width;
  const int O = arch_.conv_channels, K = arch_.kernel, pad = K / 2;
  for (int o = 0; o < O; ++o) {
    const double* gp = dpre.data() + static_cast<std::size_t>(o) * H * W;
    double bias_sum = 0.0;
    for (int i = 0; i < H * W; ++i) bias_sum += gp[i];
    g.conv_bias[o] = bias_sum;
    for (int c = 0; c < C; ++c) {
      const double* in = x.data() + static_cast<std::size_t>(c) * H * W;
      double* kern = g.conv_weights.data() + (static_cast<std::size_t>(o) * C + c) * K * K;
      for (int kr = 0; kr < K; ++kr) {
        for (int kc = 0; kc < K; ++kc) {
          const int dr = kr - pad, dc = kc - pad;
          const int r0 = std::max(0, -dr), r1 = std::min(H, H - dr);
          const int c0 = std::max(0, -dc), c1 = std::min(W, W - dc);
          double acc = 0.0;
          for (int r = r0; r < r1; ++r) {
            const double* src = in + static_cast<std::size_t>(r + dr) * W + dc;
            const double* gg = gp + static_cast<std::size_t>(r) * W;
            for (int col = c0; col < c1; ++col) acc += gg[col] * src[col];
          }
          kern[kr * K + kc] = acc;
        }
      }
    }
  }
  return out;
}

ForwardResult ToyCnn::forward(const Image& x) const {
  check_input(*this, x);
  std::vector<double> z = logits(x.data());
  Prediction p = Prediction::from_probs(softmax(z));
  return ForwardResult{std::move(z), std::move(p)};
}

Prediction ToyCnn::classify(const Image& x) const { return forward(x).prediction; }

std::vector<double> ToyCnn::grad_input(const Image& x, int class_index, GradientTarget target) const {
  check_input(*this, x);
  return input_gradient(x.data(), class_index, target);
}

void ToyCnn::apply_update(const Parameters& gradient, double step) { params_.axpy(-step, gradient); }

}  // namespace impactbench::model
