#pragma once

#include <Eigen/Dense>

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace solvlab {

/// n points spaced geometrically on [lo, hi], endpoints included.
inline std::vector<double> geometric_grid(double lo, double hi, std::size_t n) {
  assert(lo > 0.0 && hi >= lo && n >= 1);
  std::vector<double> grid(n);
  if (n == 1) {
    grid[0] = lo;
    return grid;
  }
  const double log_lo = std::log(lo);
  const double step = (std::log(hi) - log_lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = std::exp(log_lo + step * static_cast<double>(i));
  }
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS
};

/// Ordinary least squares y = intercept + slope * x.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size() && x.size() >= 2);
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit fit;
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

struct PowerLogFit {
  double exponent = 0.0;      // coefficient of ln s
  double log_exponent = 0.0;  // coefficient of ln ln s
  double intercept = 0.0;
  double residual = 0.0;  // RMS in log space
};

/// Fits ln h(s) = c + exponent * ln s + log_exponent * ln ln s over s > e.
inline PowerLogFit fit_power_log(std::span<const double> s,
                                 std::span<const double> log_h) {
  assert(s.size() == log_h.size() && s.size() >= 3);
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ls = std::log(s[static_cast<std::size_t>(i)]);
    design(i, 0) = 1.0;
    design(i, 1) = ls;
    design(i, 2) = std::log(ls);
    rhs(i) = log_h[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector3d coef = design.colPivHouseholderQr().solve(rhs);
  const Eigen::VectorXd resid = design * coef - rhs;
  PowerLogFit fit;
  fit.intercept = coef(0);
  fit.exponent = coef(1);
  fit.log_exponent = coef(2);
  fit.residual = std::sqrt(resid.squaredNorm() / static_cast<double>(n));
  return fit;
}

}  // namespace solvlab
