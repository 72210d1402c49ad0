#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gesture/core.hpp"
#include "gesture/nn/activation.hpp"
#include "gesture/rng.hpp"

namespace gesture::nn {

struct DenseLayerSpec {
  int units = 0;
  Activation activation = Activation::identity;

  bool operator==(const DenseLayerSpec&) const = default;
};

struct MlpSpec {
  int input = 0;
  std::vector<DenseLayerSpec> layers;  // hidden layers then the output layer
  Loss loss = Loss::categorical_cross_entropy;
  double leaky_slope = 0.01;

  bool operator==(const MlpSpec&) const = default;

  int output() const { return layers.empty() ? 0 : layers.back().units; }

  void validate() const {
    if (input < 1) fail(ErrorCategory::config, "MLP input width must be positive");
    if (layers.size() < 2) fail(ErrorCategory::config, "MLP needs at least one hidden layer");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].units < 1) fail(ErrorCategory::config, "MLP layer sizes must be positive");
      if (i + 1 < layers.size() && layers[i].activation == Activation::softmax)
        fail(ErrorCategory::config, "softmax is only allowed on the output layer");
    }
    const Activation out = layers.back().activation;
    if (loss == Loss::binary_cross_entropy && out != Activation::sigmoid)
      fail(ErrorCategory::config, "binary cross-entropy requires a sigmoid output");
    if (loss == Loss::categorical_cross_entropy && out != Activation::softmax)
      fail(ErrorCategory::config, "categorical cross-entropy requires a softmax output");
  }

  /// W then b for every layer, W stored column-major (units x fan_in).
  ParamLayout layout() const {
    ParamLayout l;
    Eigen::Index offset = 0;
    int fan_in = input;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string tag = "dense" + std::to_string(i);
      l.push_back({tag + ".W", offset, layers[i].units, fan_in});
      offset += l.back().size();
      l.push_back({tag + ".b", offset, layers[i].units, 1});
      offset += l.back().size();
      fan_in = layers[i].units;
    }
    return l;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    int fan_in = input;
    for (const auto& layer : layers) {
      n += static_cast<Eigen::Index>(fan_in + 1) * layer.units;
      fan_in = layer.units;
    }
    return n;
  }
};

class Mlp {
 public:
  Mlp() = default;

  explicit Mlp(MlpSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    layout_ = spec_.layout();
    params_ = Vector::Zero(spec_.parameter_count());
  }

  const MlpSpec& spec() const { return spec_; }
  const ParamLayout& layout() const { return layout_; }
  const Vector& parameters() const { return params_; }
  Vector& parameters() { return params_; }

  void set_parameters(const Vector& p) {
    if (p.size() != params_.size())
      fail(ErrorCategory::mismatch, "parameter vector has " + std::to_string(p.size()) +
                                        " entries, expected " + std::to_string(params_.size()));
    params_ = p;
  }

  /// Fan-scaled uniform weights, zero biases.
  void initialize(Rng& rng) {
    params_.setZero();
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
      const ParamBlock& w = layout_[2 * i];
      init_uniform(view(params_, w), w.cols, w.rows, rng);
    }
  }

  /// Outputs for a batch given column-wise (input x batch).
  Matrix forward(const Matrix& x) const { return forward(params_, x); }

  Matrix forward(const Vector& params, const Matrix& x) const {
    check_input(x);
    Matrix a = x;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
      Matrix z = view(params, layout_[2 * i]) * a;
      z.colwise() += view(params, layout_[2 * i + 1]).col(0);
      a = activate(spec_.layers[i].activation, z, spec_.leaky_slope);
    }
    return a;
  }

  /// Mean loss over the batch; `grad` receives d(loss)/d(params).
  double gradient(const Matrix& x, const Matrix& targets, Vector& grad) const {
    return gradient(params_, x, targets, grad);
  }

  double gradient(const Vector& params, const Matrix& x, const Matrix& targets,
                  Vector& grad) const {
    check_input(x);
    if (targets.rows() != spec_.output() || targets.cols() != x.cols())
      fail(ErrorCategory::mismatch, "target shape does not match MLP output");
    const std::size_t n_layers = spec_.layers.size();
    const double batch = static_cast<double>(x.cols());

    std::vector<Matrix> zs(n_layers), acts(n_layers + 1);
    acts[0] = x;
    for (std::size_t i = 0; i < n_layers; ++i) {
      zs[i] = view(params, layout_[2 * i]) * acts[i];
      zs[i].colwise() += view(params, layout_[2 * i + 1]).col(0);
      acts[i + 1] = activate(spec_.layers[i].activation, zs[i], spec_.leaky_slope);
    }

    const Matrix& z_out = zs.back();
    const Matrix& out = acts.back();
    Matrix delta(out.rows(), out.cols());
    double total = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      double sample_loss = 0.0;
      if (spec_.loss == Loss::binary_cross_entropy) {
        for (Eigen::Index r = 0; r < z_out.rows(); ++r)
          sample_loss += softplus(z_out(r, c)) - targets(r, c) * z_out(r, c);
        delta.col(c) = out.col(c) - targets.col(c);
      } else {
        const double m = z_out.col(c).maxCoeff();
        const double lse = m + std::log((z_out.col(c).array() - m).exp().sum());
        sample_loss = (targets.col(c).array() * (lse - z_out.col(c).array())).sum();
        delta.col(c) = out.col(c) * targets.col(c).sum() - targets.col(c);
      }
      if (!std::isfinite(sample_loss))
        fail(ErrorCategory::numeric, "non-finite loss at batch index " + std::to_string(c));
      total += sample_loss;
    }
    delta /= batch;

    grad.resize(params.size());
    for (std::size_t i = n_layers; i-- > 0;) {
      view(grad, layout_[2 * i]).noalias() = delta * acts[i].transpose();
      view(grad, layout_[2 * i + 1]).col(0) = delta.rowwise().sum();
      if (i > 0) {
        Matrix back = view(params, layout_[2 * i]).transpose() * delta;
        delta = back.cwiseProduct(
            activation_derivative(spec_.layers[i - 1].activation, zs[i - 1], acts[i],
                                  spec_.leaky_slope));
      }
    }
    return total / batch;
  }

 private:
  void check_input(const Matrix& x) const {
    if (x.rows() != spec_.input)
      fail(ErrorCategory::mismatch, "input width " + std::to_string(x.rows()) +
                                        " does not match network input " +
                                        std::to_string(spec_.input));
  }

  MlpSpec spec_;
  ParamLayout layout_;
  Vector params_;
};

}  // namespace gesture::nn
