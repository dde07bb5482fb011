#pragma once

// Test models and independent oracles. Nothing here calls into the code
// under test beyond the public types it has to produce.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "impactbench/core/image.hpp"
#include "impactbench/core/mask.hpp"
#include "impactbench/core/prediction.hpp"
#include "impactbench/core/random.hpp"
#include "impactbench/model/classifier.hpp"
#include "impactbench/model/toy_cnn.hpp"

namespace testing_support {

using impactbench::Image;
using impactbench::Prediction;
using impactbench::Shape;

// Two classes; p1 = bias + w.x, p0 = 1 - p1. Gradient of either target is
// the weight map (sign flipped for class 0). The caller keeps p1 in [0,1].
class LinearModel final : public impactbench::model::Classifier {
 public:
  LinearModel(Shape shape, std::vector<double> w, double bias) : shape_(shape), w_(std::move(w)), bias_(bias) {}

  double score(const Image& x) const {
    double s = bias_;
    for (std::size_t i = 0; i < w_.size(); ++i) s += w_[i] * x.data()[i];
    return s;
  }
  Prediction classify(const Image& x) const override {
    const double p1 = score(x);
    return Prediction::from_probs({1.0 - p1, p1});
  }
  Shape input_shape() const override { return shape_; }
  int num_classes() const override { return 2; }
  bool gradient_capable() const override { return true; }
  std::vector<double> grad_input(const Image&, int cls, impactbench::model::GradientTarget) const override {
    std::vector<double> g = w_;
    if (cls == 0) {
      for (double& v : g) v = -v;
    }
    return g;
  }

 private:
  Shape shape_;
  std::vector<double> w_;
  double bias_;
};

// Fixed probability vector regardless of input.
class ConstantModel final : public impactbench::model::Classifier {
 public:
  ConstantModel(Shape shape, std::vector<double> probs) : shape_(shape), probs_(std::move(probs)) {}
  Prediction classify(const Image&) const override { return Prediction::from_probs(probs_); }
  Shape input_shape() const override { return shape_; }
  int num_classes() const override { return static_cast<int>(probs_.size()); }

 private:
  Shape shape_;
  std::vector<double> probs_;
};

// Arbitrary p1 = f(x) clamped to [0,1]; not gradient capable.
class FunctionModel final : public impactbench::model::Classifier {
 public:
  FunctionModel(Shape shape, std::function<double(const Image&)> f) : shape_(shape), f_(std::move(f)) {}
  Prediction classify(const Image& x) const override {
    const double p1 = std::min(1.0, std::max(0.0, f_(x)));
    return Prediction::from_probs({1.0 - p1, p1});
  }
  Shape input_shape() const override { return shape_; }
  int num_classes() const override { return 2; }

 private:
  Shape shape_;
  std::function<double(const Image&)> f_;
};

inline Image random_image(Shape shape, impactbench::Rng& rng, double lo = 0.0, double hi = 1.0) {
  std::vector<double> data(shape.size());
  for (double& v : data) v = rng.uniform(lo, hi);
  return Image::create(shape, std::move(data));
}

// Straight-line forward pass of the toy CNN, written from the architecture
// description: same-padded conv, activation, floor 2x2 average pool, dense.
struct NaiveForward {
  std::vector<double> pre;  // conv outputs before activation
  std::vector<double> logits;
};

inline NaiveForward naive_forward(const impactbench::model::Architecture& a,
                                  const impactbench::model::Parameters& p, const std::vector<double>& x) {
  const int C = a.in_channels, H = a.height, W = a.width, O = a.conv_channels, K = a.kernel;
  NaiveForward out;
  out.pre.assign(static_cast<std::size_t>(O) * H * W, 0.0);
  for (int o = 0; o < O; ++o) {
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        double s = p.conv_bias[o];
        for (int ch = 0; ch < C; ++ch) {
          for (int kr = 0; kr < K; ++kr) {
            for (int kc = 0; kc < K; ++kc) {
              const int rr = r + kr - K / 2, cc = c + kc - K / 2;
              if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
              s += p.conv_weights[((o * C + ch) * K + kr) * K + kc] * x[(ch * H + rr) * W + cc];
            }
          }
        }
        out.pre[(o * H + r) * W + c] = s;
      }
    }
  }
  const int PH = H / 2, PW = W / 2;
  std::vector<double> pooled;
  for (int o = 0; o < O; ++o) {
    for (int r = 0; r < PH; ++r) {
      for (int c = 0; c < PW; ++c) {
        double s = 0.0;
        for (int dr = 0; dr < 2; ++dr) {
          for (int dc = 0; dc < 2; ++dc) {
            double v = out.pre[(o * H + 2 * r + dr) * W + 2 * c + dc];
            if (a.activation == impactbench::model::Activation::kRelu && v < 0.0) v = 0.0;
            s += v;
          }
        }
        pooled.push_back(s / 4.0);
      }
    }
  }
  for (int k = 0; k < a.num_classes; ++k) {
    double s = p.dense_bias[k];
    for (std::size_t j = 0; j < pooled.size(); ++j) s += p.dense_weights[k * pooled.size() + j] * pooled[j];
    out.logits.push_back(s);
  }
  return out;
}

inline std::vector<double> naive_softmax(const std::vector<double>& logits) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  std::vector<double> e;
  double total = 0.0;
  for (double v : logits) {
    e.push_back(std::exp(v - m));
    total += e.back();
  }
  for (double& v : e) v /= total;
  return e;
}

// Smallest |pre-activation| among conv units that reach the pooled output.
inline double kink_margin(const impactbench::model::Architecture& a, const NaiveForward& f) {
  double m = 1e300;
  for (int o = 0; o < a.conv_channels; ++o) {
    for (int r = 0; r < 2 * (a.height / 2); ++r) {
      for (int c = 0; c < 2 * (a.width / 2); ++c) m = std::min(m, std::abs(f.pre[(o * a.height + r) * a.width + c]));
    }
  }
  return m;
}

// Dense Gaussian elimination with partial pivoting; A is n x n row-major.
inline std::vector<double> gauss_solve(std::vector<double> A, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(A[r * n + col]) > std::abs(A[pivot * n + col])) pivot = r;
    }
    if (std::abs(A[pivot * n + col]) < 1e-300) throw std::runtime_error("singular");
    for (std::size_t c = 0; c < n; ++c) std::swap(A[col * n + c], A[pivot * n + c]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = A[r * n + col] / A[col * n + col];
      for (std::size_t c = col; c < n; ++c) A[r * n + c] -= f * A[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= A[i * n + c] * x[c];
    x[i] = s / A[i * n + i];
  }
  return x;
}

// Per-pixel double loop over plain boolean grids.
struct NaiveIou {
  std::size_t intersection = 0;
  std::size_t union_ = 0;
};

inline NaiveIou naive_iou(const std::vector<bool>& a, const std::vector<bool>& c, int h, int w) {
  NaiveIou out;
  for (int r = 0; r < h; ++r) {
    for (int col = 0; col < w; ++col) {
      const bool x = a[r * w + col], y = c[r * w + col];
      if (x && y) ++out.intersection;
      if (x || y) ++out.union_;
    }
  }
  return out;
}

inline impactbench::BinaryMask mask_from_bools(const std::vector<bool>& bits, int h, int w) {
  impactbench::BinaryMask m(h, w);
  for (int i = 0; i < h * w; ++i) {
    if (bits[i]) m.set(static_cast<std::size_t>(i));
  }
  return m;
}

inline std::vector<bool> random_bools(impactbench::Rng& rng, int n, double density) {
  std::vector<bool> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[i] = rng.uniform() < density;
  return out;
}

}  // namespace testing_support
