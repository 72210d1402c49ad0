#pragma once

#include "gesture/nn/mlp.hpp"
#include "gesture/nn/optim.hpp"
#include "support.hpp"

namespace testing_support {

struct QuadraticRun {
  int dimension = 0;
  int iterations = 0;
  double gradient_norm = 0.0;
  double distance_to_optimum = 0.0;
};

/// f(w) = 0.5 (w - w*)'A(w - w*) with A = Q diag(1..10) Q' for a random
/// orthogonal Q. Written around w* so loss differences stay resolvable in
/// binary64 near the optimum.
inline QuadraticRun scg_on_random_quadratic(std::uint64_t seed, int dim) {
  gesture::Rng rng(seed);
  Matrix m(dim, dim);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  const Matrix q = Eigen::HouseholderQR<Matrix>(m).householderQ();
  Vector eig(dim);
  for (int i = 0; i < dim; ++i) eig[i] = 1.0 + 9.0 * i / std::max(1, dim - 1);
  const Matrix a = q * eig.asDiagonal() * q.transpose();
  Vector optimum(dim), w(dim);
  for (int i = 0; i < dim; ++i) optimum[i] = rng.normal();
  for (int i = 0; i < dim; ++i) w[i] = rng.normal();

  gesture::nn::ScgOptions opt;
  opt.gradient_tolerance = 1e-8;
  opt.max_iterations = dim + 5;
  const auto trace = gesture::nn::minimize_scg(
      [&](const Vector& x, Vector& g) {
        const Vector d = x - optimum;
        g = a * d;
        return 0.5 * d.dot(g);
      },
      w, opt);
  return {dim, trace.iterations, (a * (w - optimum)).norm(), (w - optimum).norm()};
}

/// 2-4-1 sigmoid network with binary cross-entropy on the four XOR points.
inline gesture::nn::OptimizationTrace scg_on_xor(std::uint64_t seed, int max_iterations) {
  using namespace gesture::nn;
  Mlp net(MlpSpec{2, {{4, Activation::sigmoid}, {1, Activation::sigmoid}}, Loss::binary_cross_entropy});
  gesture::Rng rng(seed);
  net.initialize(rng);
  Matrix x(2, 4), y(1, 4);
  x << 0, 0, 1, 1, 0, 1, 0, 1;
  y << 0, 1, 1, 0;
  ScgOptions opt;
  opt.max_iterations = max_iterations;
  Vector w = net.parameters();
  return minimize_scg([&](const Vector& p, Vector& g) { return net.gradient(p, x, y, g); }, w, opt);
}

}  // namespace testing_support
