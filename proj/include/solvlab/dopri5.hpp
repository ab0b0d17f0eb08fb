#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <utility>

namespace solvlab {

template <std::size_t D>
using Vec = std::array<double, D>;

template <std::size_t D>
struct Dopri5Result {
  Vec<D> y;      // fifth-order solution
  Vec<D> error;  // difference to the embedded fourth-order solution
  Vec<D> dy;     // derivative at the new point (first stage of the next step)
  bool finite = true;
};

/// One Dormand-Prince 5(4) step from (t, y) with first stage k1 = rhs(t, y).
template <std::size_t D, class Rhs>
Dopri5Result<D> dopri5_step(const Rhs& rhs, double t, const Vec<D>& y, const Vec<D>& k1, double h) {
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  auto combine = [&](auto&&... terms) {
    Vec<D> out = y;
    for (std::size_t i = 0; i < D; ++i) {
      double acc = 0.0;
      ((acc += terms.first * terms.second[i]), ...);
      out[i] += h * acc;
    }
    return out;
  };
  using P = std::pair<double, const Vec<D>&>;

  const Vec<D> k2 = rhs(t + c2 * h, combine(P{a21, k1}));
  const Vec<D> k3 = rhs(t + c3 * h, combine(P{a31, k1}, P{a32, k2}));
  const Vec<D> k4 = rhs(t + c4 * h, combine(P{a41, k1}, P{a42, k2}, P{a43, k3}));
  const Vec<D> k5 = rhs(t + c5 * h, combine(P{a51, k1}, P{a52, k2}, P{a53, k3}, P{a54, k4}));
  const Vec<D> k6 =
      rhs(t + h, combine(P{a61, k1}, P{a62, k2}, P{a63, k3}, P{a64, k4}, P{a65, k5}));

  Dopri5Result<D> result;
  result.y = combine(P{b1, k1}, P{b3, k3}, P{b4, k4}, P{b5, k5}, P{b6, k6});
  result.dy = rhs(t + h, result.y);
  for (std::size_t i = 0; i < D; ++i) {
    result.error[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                           e7 * result.dy[i]);
    if (!std::isfinite(result.y[i]) || !std::isfinite(result.dy[i]) ||
        !std::isfinite(result.error[i])) {
      result.finite = false;
    }
  }
  return result;
}

/// RMS of error / (atol + rtol * max(|y0|, |y1|)).
template <std::size_t D>
double error_norm(const Vec<D>& error, const Vec<D>& y0, const Vec<D>& y1, double rtol,
                  double atol) {
  double sum = 0.0;
  for (std::size_t i = 0; i < D; ++i) {
    const double scale = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double ratio = error[i] / scale;
    sum += ratio * ratio;
  }
  return std::sqrt(sum / static_cast<double>(D));
}

/// Step-size factor from an error norm, clamped to [0.2, 5].
inline double step_factor(double err) {
  if (err == 0.0) return 5.0;
  return std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
}

}  // namespace solvlab
