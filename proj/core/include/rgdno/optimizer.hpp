#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rgdno/tensor.hpp"

namespace rgdno {

struct OptimizerConfig {
  double learning_rate = 0.05;
  int steps = 100;
  double warmup_fraction = 0.05;  // fraction of steps spent ramping up
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool normalize_gradient = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct OptimizeResult {
  Tensor best;       // best-loss iterate (may be the initial point)
  double best_loss = 0.0;
  int best_step = 0;  // update steps applied at the best iterate, 0 = initial
  std::vector<double> loss_curve;  // initial loss, then one entry per step
};

// Scalar loss of the leaf tensor; rebuilt (define-by-run) every call.
using Objective = std::function<Tensor(const Tensor&)>;

// g / ||g||_2; gradients below 1e-12 collapse to a zero step.
std::vector<double> normalized_gradient(const std::vector<double>& g);

// lr * min(t/warmup_steps, 1) * 0.5 * (1 + cos(pi * t / steps)).
double lr_at(const OptimizerConfig& cfg, int step);

// Adam on the (unit-normalized) gradient of f at z. Throws RuntimeFailure
// with the step index and last finite loss if the objective goes NaN.
OptimizeResult optimize_noise(const Tensor& z_init, const Objective& f,
                              const OptimizerConfig& cfg);

}  // namespace rgdno
