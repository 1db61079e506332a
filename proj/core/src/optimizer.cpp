#include "rgdno/optimizer.hpp"

#include <cmath>
#include <string>

#include "rgdno/errors.hpp"

namespace rgdno {

void OptimizerConfig::validate() const {
  if (learning_rate <= 0.0) throw ValidationError("optimizer: lr must be > 0");
  if (steps < 0) throw ValidationError("optimizer: steps must be >= 0");
  if (warmup_fraction < 0.0 || warmup_fraction >= 1.0) {
    throw ValidationError("optimizer: warmup fraction must be in [0,1)");
  }
}

std::vector<double> normalized_gradient(const std::vector<double>& g) {
  double norm_sq = 0.0;
  for (double v : g) norm_sq += v * v;
  const double norm = std::sqrt(norm_sq);
  std::vector<double> out(g.size(), 0.0);
  if (norm < 1e-12) return out;
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] / norm;
  return out;
}

double lr_at(const OptimizerConfig& cfg, int step) {
  if (cfg.steps <= 0) return 0.0;
  double warm = 1.0;
  const int warmup_steps =
      static_cast<int>(std::floor(cfg.warmup_fraction * cfg.steps + 0.5));
  if (warmup_steps > 0) {
    warm = std::min(1.0, static_cast<double>(step) / warmup_steps);
  }
  const double cosine =
      0.5 * (1.0 + std::cos(M_PI * static_cast<double>(step) / cfg.steps));
  return cfg.learning_rate * warm * cosine;
}

OptimizeResult optimize_noise(const Tensor& z_init, const Objective& f,
                              const OptimizerConfig& cfg) {
  cfg.validate();
  OptimizeResult result;
  if (cfg.steps == 0) {
    result.best = z_init.clone();
    NoGradGuard guard;
    auto loss = f(result.best);
    result.best_loss = loss.item();
    result.loss_curve.push_back(result.best_loss);
    return result;
  }

  Tensor z = z_init.clone();
  z.set_requires_grad(true);
  const std::size_t n = static_cast<std::size_t>(z.numel());
  std::vector<double> m(n, 0.0), v(n, 0.0);
  std::vector<double> best = z.values();
  double best_loss = 0.0;
  int best_step = 0;
  double last_finite = 0.0;
  bool have_best = false;

  for (int step = 0; step < cfg.steps; ++step) {
    auto loss = f(z);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw RuntimeFailure("optimize_noise: objective became non-finite at step " +
                           std::to_string(step) + ", last finite loss " +
                           std::to_string(last_finite));
    }
    last_finite = value;
    result.loss_curve.push_back(value);
    if (!have_best || value < best_loss) {
      best_loss = value;
      best = z.values();
      best_step = step;  // z carries `step` updates at this point
      have_best = true;
    }

    backward(loss);
    auto gt = z.grad();
    std::vector<double> g =
        cfg.normalize_gradient ? normalized_gradient(gt.values()) : gt.values();

    const double lr = lr_at(cfg, step);
    const double c1 = 1.0 - std::pow(cfg.beta1, step + 1);
    const double c2 = 1.0 - std::pow(cfg.beta2, step + 1);
    double* zd = z.data();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      zd[i] -= lr * mh / (std::sqrt(vh) + cfg.epsilon);
    }
  }

  // Final iterate competes for best too.
  {
    NoGradGuard guard;
    auto loss = f(z);
    const double value = loss.item();
    if (std::isfinite(value)) {
      result.loss_curve.push_back(value);
      if (!have_best || value < best_loss) {
        best_loss = value;
        best = z.values();
        best_step = cfg.steps;
      }
    }
  }

  result.best = Tensor::from(z.shape(), std::move(best));
  result.best_loss = best_loss;
  result.best_step = best_step;
  return result;
}

}  // namespace rgdno
