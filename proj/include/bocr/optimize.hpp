#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "bocr/error.hpp"

namespace bocr {

struct Optimum {
  std::vector<double> params;
  double value = 0;
  int iterations = 0;
  bool converged = false;
};

struct NelderMeadOptions {
  double tol = 1e-8;     // stop once max(f) - min(f) over the simplex drops below this
  int max_iter = 2000;
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
};

// Derivative-free Nelder-Mead simplex minimization. The initial simplex is
// x0 plus one vertex per coordinate, offset by max(0.05*|x0_i|, 0.00025).
template <class Objective>
Optimum minimize(Objective&& objective, std::vector<double> x0, const NelderMeadOptions& opt = {}) {
  if (!(opt.tol > 0)) throw ParameterError("minimize: tol must be positive");
  if (x0.empty()) throw ParameterError("minimize: empty parameter vector");
  const std::size_t n = x0.size();
  const double f0 = objective(x0);
  if (!std::isfinite(f0)) throw ParameterError("minimize: objective is not finite at x0");

  std::vector<std::vector<double>> simplex(n + 1, x0);
  std::vector<double> fv(n + 1, f0);
  for (std::size_t i = 0; i < n; ++i) {
    simplex[i + 1][i] += std::max(0.05 * std::abs(x0[i]), 0.00025);
    fv[i + 1] = objective(simplex[i + 1]);
  }
  const auto eval = [&](const std::vector<double>& x) {
    const double v = objective(x);
    return std::isfinite(v) ? v : HUGE_VAL;
  };
  for (auto& v : fv) v = std::isfinite(v) ? v : HUGE_VAL;

  std::vector<std::size_t> order(n + 1);
  const auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> s(n + 1);
    std::vector<double> f(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      s[i] = std::move(simplex[order[i]]);
      f[i] = fv[order[i]];
    }
    simplex = std::move(s);
    fv = std::move(f);
  };
  const auto along = [&](const std::vector<double>& centroid, double t) {
    // centroid + t * (centroid - worst)
    std::vector<double> x(n);
    for (std::size_t j = 0; j < n; ++j) x[j] = centroid[j] + t * (centroid[j] - simplex[n][j]);
    return x;
  };

  Optimum result;
  sort_simplex();
  int iter = 0;
  for (; iter < opt.max_iter; ++iter) {
    if (fv[n] - fv[0] < opt.tol) {
      result.converged = true;
      break;
    }
    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);

    auto xr = along(centroid, opt.reflection);
    const double fr = eval(xr);
    if (fr < fv[0]) {
      auto xe = along(centroid, opt.reflection * opt.expansion);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[n] = std::move(xe);
        fv[n] = fe;
      } else {
        simplex[n] = std::move(xr);
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      simplex[n] = std::move(xr);
      fv[n] = fr;
    } else {
      // Outside contraction when the reflection beats the worst, inside otherwise.
      const bool outside = fr < fv[n];
      auto xc = along(centroid, outside ? opt.reflection * opt.contraction : -opt.contraction);
      const double fc = eval(xc);
      if (fc < (outside ? fr : fv[n])) {
        simplex[n] = std::move(xc);
        fv[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t j = 0; j < n; ++j) simplex[i][j] = simplex[0][j] + opt.shrink * (simplex[i][j] - simplex[0][j]);
          fv[i] = eval(simplex[i]);
        }
      }
    }
    sort_simplex();
  }
  if (!result.converged && fv[n] - fv[0] < opt.tol) result.converged = true;
  result.params = simplex[0];
  result.value = fv[0];
  result.iterations = iter;
  return result;
}

}  // namespace bocr
