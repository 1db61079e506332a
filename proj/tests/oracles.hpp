#pragma once

// Test-side oracles. These stay independent of the implementation paths they
// check: finite differences drive the autodiff checks, and the brute-force
// counters below never touch the tensor graph.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "rgdno/tensor.hpp"

namespace oracle {

// Central finite difference d(loss)/d(x[i]) for a scalar-valued function of
// the leaf tensor x. Mutates x in place and restores it.
inline std::vector<double> finite_difference(
    rgdno::Tensor& x, const std::function<double()>& eval_loss,
    double h = 1e-5) {
  std::vector<double> g(static_cast<std::size_t>(x.numel()));
  double* v = x.data();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double keep = v[i];
    v[i] = keep + h;
    const double fp = eval_loss();
    v[i] = keep - h;
    const double fm = eval_loss();
    v[i] = keep;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Spot-check a subset of coordinates; returns worst relative error, with
// elements below abs_floor compared absolutely.
inline double gradient_error(const std::vector<double>& autodiff,
                             const std::vector<double>& fd,
                             const std::vector<std::size_t>& idx,
                             double abs_floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i : idx) {
    const double a = autodiff[i];
    const double b = fd[i];
    const double scale = std::max(std::abs(a), std::abs(b));
    const double err =
        scale < abs_floor ? std::abs(a - b) : std::abs(a - b) / scale;
    worst = std::max(worst, err);
  }
  return worst;
}

// Discrete peak count: strict local maxima above the threshold. Matches the
// construction of the soft counter but on plain doubles.
inline int count_peaks_above(const std::vector<double>& v, double threshold) {
  int count = 0;
  for (std::size_t t = 1; t + 1 < v.size(); ++t) {
    if (v[t] > v[t - 1] && v[t] > v[t + 1] && v[t] > threshold) ++count;
  }
  return count;
}

// Discrete minima count: strict local minima below the threshold.
inline int count_minima_below(const std::vector<double>& v, double threshold) {
  int count = 0;
  for (std::size_t t = 1; t + 1 < v.size(); ++t) {
    if (v[t] < v[t - 1] && v[t] < v[t + 1] && v[t] < threshold) ++count;
  }
  return count;
}

}  // namespace oracle
