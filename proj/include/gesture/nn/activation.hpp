#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "gesture/core.hpp"
#include "gesture/rng.hpp"

namespace gesture::nn {

enum class Activation { identity, relu, leaky_relu, tanh, sigmoid, softmax };
enum class Loss { binary_cross_entropy, categorical_cross_entropy };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
  }
  return "?";
}

inline Activation activation_from_string(std::string_view s) {
  for (auto a : {Activation::identity, Activation::relu, Activation::leaky_relu, Activation::tanh,
                 Activation::sigmoid, Activation::softmax})
    if (to_string(a) == s) return a;
  fail(ErrorCategory::format, "unknown activation '" + std::string(s) + "'");
}

inline std::string_view to_string(Loss l) {
  return l == Loss::binary_cross_entropy ? "binary_cross_entropy" : "categorical_cross_entropy";
}

inline Loss loss_from_string(std::string_view s) {
  if (s == "binary_cross_entropy") return Loss::binary_cross_entropy;
  if (s == "categorical_cross_entropy") return Loss::categorical_cross_entropy;
  fail(ErrorCategory::format, "unknown loss '" + std::string(s) + "'");
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

/// Column-wise softmax of a pre-activation matrix.
inline Matrix softmax_columns(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double m = z.col(c).maxCoeff();
    out.col(c) = (z.col(c).array() - m).exp();
    out.col(c) /= out.col(c).sum();
  }
  return out;
}

/// Elementwise activation; softmax is column-wise.
inline Matrix activate(Activation a, const Matrix& z, double slope) {
  switch (a) {
    case Activation::identity: return z;
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::leaky_relu:
      return z.unaryExpr([slope](double v) { return v > 0 ? v : slope * v; });
    case Activation::tanh: return z.array().tanh().matrix();
    case Activation::sigmoid: return z.unaryExpr([](double v) { return sigmoid(v); });
    case Activation::softmax: return softmax_columns(z);
  }
  return z;
}

/// dA/dZ expressed through (z, a) for the elementwise activations.
inline Matrix activation_derivative(Activation a, const Matrix& z, const Matrix& act,
                                    double slope) {
  switch (a) {
    case Activation::identity: return Matrix::Ones(z.rows(), z.cols());
    case Activation::relu: return z.unaryExpr([](double v) { return v > 0 ? 1.0 : 0.0; });
    case Activation::leaky_relu:
      return z.unaryExpr([slope](double v) { return v > 0 ? 1.0 : slope; });
    case Activation::tanh: return (1.0 - act.array().square()).matrix();
    case Activation::sigmoid: return (act.array() * (1.0 - act.array())).matrix();
    case Activation::softmax: break;
  }
  fail(ErrorCategory::usage, "softmax is only supported as an output activation");
}

/// Named slice of a flat parameter vector holding a column-major matrix.
struct ParamBlock {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
};

using ParamLayout = std::vector<ParamBlock>;

inline Eigen::Index layout_size(const ParamLayout& layout) {
  return layout.empty() ? 0 : layout.back().offset + layout.back().size();
}

inline Eigen::Map<const Matrix> view(const Vector& params, const ParamBlock& b) {
  return {params.data() + b.offset, b.rows, b.cols};
}

inline Eigen::Map<Matrix> view(Vector& params, const ParamBlock& b) {
  return {params.data() + b.offset, b.rows, b.cols};
}

/// Uniform +-sqrt(6 / (fan_in + fan_out)).
inline void init_uniform(Eigen::Map<Matrix> w, Eigen::Index fan_in, Eigen::Index fan_out,
                         Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Eigen::Index c = 0; c < w.cols(); ++c)
    for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-limit, limit);
}

/// Rescales `g` in place so its Euclidean norm is at most `bound`.
inline double clip_global_norm(Vector& g, double bound) {
  const double norm = g.norm();
  if (bound > 0.0 && norm > bound) g *= bound / norm;
  return norm;
}

}  // namespace gesture::nn
