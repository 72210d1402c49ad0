#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gesture/core.hpp"
#include "gesture/rng.hpp"

namespace gesture::nn {

struct OptimizationTrace {
  /// SCG: loss after every accepted step (first entry is the initial loss).
  /// SGDM: sample-weighted mean batch loss per epoch.
  std::vector<double> loss;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
};

/// Returns the loss at `w` and writes the gradient into `grad`.
using Objective = std::function<double(const Vector& w, Vector& grad)>;

struct ScgOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  double sigma = 1e-5;
  double lambda = 1e-7;
};

/// Moller's scaled conjugate gradient: conjugate search directions, a
/// finite-difference curvature estimate along each direction and a scalar
/// Levenberg-Marquardt style regulator instead of a line search.
inline OptimizationTrace minimize_scg(const Objective& objective, Vector& w,
                                      const ScgOptions& opt = {}) {
  const Eigen::Index n = w.size();
  OptimizationTrace trace;
  Vector grad(n), grad_probe(n), grad_new(n), w_new(n);

  auto evaluate = [&](const Vector& at, Vector& g) {
    const double f = objective(at, g);
    if (!std::isfinite(f) || !g.allFinite())
      fail(ErrorCategory::numeric,
           "non-finite loss during SCG at iteration " + std::to_string(trace.iterations));
    return f;
  };

  double f = evaluate(w, grad);
  trace.loss.push_back(f);
  Vector r = -grad;
  Vector p = r;
  double lambda = opt.lambda;
  double lambda_bar = 0.0;
  bool success = true;
  double delta = 0.0;
  int since_restart = 0;

  if (r.norm() < opt.gradient_tolerance) {
    trace.converged = true;
    trace.stop_reason = "gradient tolerance";
    return trace;
  }

  while (trace.iterations < opt.max_iterations) {
    ++trace.iterations;
    const double p_sq = p.squaredNorm();
    if (success) {
      const double sigma_k = opt.sigma / std::sqrt(p_sq);
      evaluate(w + sigma_k * p, grad_probe);
      delta = p.dot(grad_probe - grad) / sigma_k;
    }
    delta += (lambda - lambda_bar) * p_sq;
    if (delta <= 0.0) {
      lambda_bar = 2.0 * (lambda - delta / p_sq);
      delta = -delta + lambda * p_sq;
      lambda = lambda_bar;
    }
    const double mu = p.dot(r);
    const double alpha = mu / delta;
    w_new = w + alpha * p;
    const double f_new = evaluate(w_new, grad_new);
    const double comparison = 2.0 * delta * (f - f_new) / (mu * mu);

    if (comparison >= 0.0) {
      w.swap(w_new);
      f = f_new;
      grad.swap(grad_new);
      const Vector r_new = -grad;
      lambda_bar = 0.0;
      success = true;
      trace.loss.push_back(f);
      if (++since_restart >= n) {
        p = r_new;
        since_restart = 0;
      } else {
        const double beta = (r_new.squaredNorm() - r_new.dot(r)) / mu;
        p = r_new + beta * p;
      }
      r = r_new;
      if (comparison >= 0.75) lambda *= 0.25;
      if (r.norm() < opt.gradient_tolerance) {
        trace.converged = true;
        trace.stop_reason = "gradient tolerance";
        return trace;
      }
    } else {
      lambda_bar = lambda;
      success = false;
    }
    if (comparison < 0.25) lambda += delta * (1.0 - comparison) / p_sq;
    if (!std::isfinite(lambda) || lambda > 1e100) {
      trace.stop_reason = "regulator overflow";
      return trace;
    }
  }
  trace.stop_reason = "max iterations";
  return trace;
}

struct SgdmOptions {
  double learning_rate = 0.01;
  double drop_factor = 0.85;
  int drop_period = 10;
  int max_epochs = 150;
  int batch_size = 128;
  double momentum = 0.9;
  std::uint64_t seed = 7;
  double divergence_limit = 1e6;

  void validate() const {
    if (!(learning_rate > 0.0)) fail(ErrorCategory::config, "learning rate must be > 0");
    if (!(drop_factor > 0.0 && drop_factor <= 1.0))
      fail(ErrorCategory::config, "drop factor must be in (0, 1]");
    if (drop_period < 1 || max_epochs < 1 || batch_size < 1)
      fail(ErrorCategory::config, "drop period, epochs and batch size must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0))
      fail(ErrorCategory::config, "momentum must be in [0, 1)");
  }
};

/// Step-decay schedule with 0-based epochs.
inline double scheduled_rate(const SgdmOptions& opt, int epoch) {
  return opt.learning_rate * std::pow(opt.drop_factor, epoch / opt.drop_period);
}

/// Loss and gradient of one mini-batch of sample indices; `rng` drives any
/// stochastic layers (dropout).
using BatchObjective =
    std::function<double(std::span<const std::size_t> batch, const Vector& w, Vector& grad, Rng& rng)>;

/// Classic momentum: v <- mu*v - eta*grad, w <- w + v. Batch order is
/// reshuffled every epoch; the last partial batch is kept.
inline OptimizationTrace minimize_sgdm(const BatchObjective& objective, std::size_t n_samples,
                                       Vector& w, const SgdmOptions& opt,
                                       const std::function<void(int, double)>& on_epoch = {}) {
  opt.validate();
  if (n_samples == 0) fail(ErrorCategory::usage, "SGDM needs at least one sample");
  OptimizationTrace trace;
  Rng rng(opt.seed);
  Vector velocity = Vector::Zero(w.size());
  Vector grad(w.size());
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
    const double rate = scheduled_rate(opt, epoch);
    rng.shuffle(std::span<std::size_t>(order));
    double weighted = 0.0;
    for (std::size_t start = 0; start < n_samples; start += opt.batch_size) {
      const std::size_t count = std::min<std::size_t>(opt.batch_size, n_samples - start);
      const std::span<const std::size_t> batch(order.data() + start, count);
      const double loss = objective(batch, w, grad, rng);
      if (!std::isfinite(loss) || loss > opt.divergence_limit)
        fail(ErrorCategory::numeric, "SGDM diverged at epoch " + std::to_string(epoch) +
                                         " (loss " + std::to_string(loss) + ")");
      velocity = opt.momentum * velocity - rate * grad;
      w += velocity;
      weighted += loss * static_cast<double>(count);
    }
    trace.loss.push_back(weighted / static_cast<double>(n_samples));
    trace.iterations = epoch + 1;
    if (on_epoch) on_epoch(epoch, trace.loss.back());
  }
  trace.stop_reason = "max epochs";
  return trace;
}

}  // namespace gesture::nn
