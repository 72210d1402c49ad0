#pragma once

#include <vector>

#include "gesture/nn/bilstm.hpp"
#include "gesture/nn/mlp.hpp"
#include "support.hpp"

namespace testing_support {

using gesture::nn::Activation;
using gesture::nn::Loss;

/// Random 5-10-3 network with the given hidden activation and loss; returns
/// the relative error between the analytic and central-difference gradients.
inline double mlp_gradient_error(std::uint64_t seed, Activation hidden, Loss loss) {
  using namespace gesture::nn;
  const Activation out = loss == Loss::binary_cross_entropy ? Activation::sigmoid : Activation::softmax;
  Mlp net(MlpSpec{5, {{10, hidden}, {3, out}}, loss});
  gesture::Rng rng(seed);
  net.initialize(rng);
  for (Eigen::Index i = 0; i < net.parameters().size(); ++i) net.parameters()[i] += 0.3 * rng.normal();
  const int batch = 7;
  Matrix x(5, batch), targets = Matrix::Zero(3, batch);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (int c = 0; c < batch; ++c) {
    if (loss == Loss::binary_cross_entropy)
      for (int r = 0; r < 3; ++r) targets(r, c) = rng.uniform() < 0.5 ? 1.0 : 0.0;
    else
      targets(rng.between(0, 2), c) = 1.0;
  }
  Vector analytic;
  net.gradient(x, targets, analytic);
  Vector scratch;
  const Vector numeric = numeric_gradient(
      [&](const Vector& w) { return net.gradient(w, x, targets, scratch); }, net.parameters());
  return relative_error(analytic, numeric);
}

/// biLSTM stack on random sequences. Dropout masks are redrawn from the same
/// seed for every evaluation so the function being differentiated is fixed.
inline double bilstm_gradient_error(std::uint64_t seed, const gesture::nn::LstmStackSpec& spec,
                                    int steps, int batch) {
  using namespace gesture::nn;
  BiLstm net(spec);
  gesture::Rng rng(seed);
  net.initialize(rng);
  for (Eigen::Index i = 0; i < net.parameters().size(); ++i) net.parameters()[i] += 0.2 * rng.normal();
  std::vector<Matrix> seqs(batch, Matrix(spec.input, steps));
  std::vector<const Matrix*> ptrs;
  for (auto& s : seqs) {
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.normal();
    ptrs.push_back(&s);
  }
  const SequenceBatch x = SequenceBatch::pack(ptrs);
  std::vector<int> targets(static_cast<std::size_t>(steps) * batch);
  for (int& t : targets) t = rng.between(0, spec.output - 1);
  const std::uint64_t mask_seed = seed * 31 + 5;
  Vector analytic;
  gesture::Rng mask_rng(mask_seed);
  net.gradient(x, targets, analytic, &mask_rng);
  Vector scratch;
  const Vector numeric = numeric_gradient(
      [&](const Vector& w) {
        gesture::Rng r(mask_seed);
        return net.gradient(w, x, targets, scratch, &r);
      },
      net.parameters());
  return relative_error(analytic, numeric);
}

/// Single 4-unit layer over length-6 sequences.
inline gesture::nn::LstmStackSpec small_bilstm_spec() {
  return {3, {{4, Activation::identity, 0.0}}};
}

/// Two layers exercising the leaky-ReLU and tanh post activations and dropout.
inline gesture::nn::LstmStackSpec stacked_bilstm_spec() {
  return {3, {{3, Activation::leaky_relu, 0.4}, {2, Activation::tanh, 0.0}}};
}

inline const std::vector<Activation>& hidden_activations() {
  static const std::vector<Activation> all{Activation::identity, Activation::relu,
                                           Activation::leaky_relu, Activation::tanh,
                                           Activation::sigmoid};
  return all;
}

}  // namespace testing_support
