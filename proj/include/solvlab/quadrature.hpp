#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <vector>

#include "solvlab/errors.hpp"

namespace solvlab {

struct QuadratureTolerance {
  double absolute = 1e-10;
  double relative = 1e-12;
  unsigned max_depth = 18;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

namespace detail {

// Intervals a few ulps wide: Gauss-Kronrod error estimates degenerate there.
inline bool ulp_interval(double a, double b) {
  return std::abs(b - a) <= 64.0 * std::numeric_limits<double>::epsilon() *
                                std::max(std::abs(a), std::abs(b));
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (7/15) on [a, b]. The result is accepted when
/// error <= max(absolute, relative * |value|); otherwise QuadratureError.
template <class Fn>
QuadratureResult integrate(Fn&& fn, double a, double b,
                           const QuadratureTolerance& tol = {}) {
  if (a == b) return {};
  if (detail::ulp_interval(a, b)) return {fn(0.5 * (a + b)) * (b - a), 0.0};
  // Boost only knows the relative criterion, so it keeps splitting panels
  // whose absolute contribution is already negligible. Deepen in stages and
  // stop at the first depth meeting the combined target.
  double error = 0.0;
  double l1 = 0.0;
  double value = 0.0;
  double target = 0.0;
  for (unsigned depth = 0;; depth = std::min(depth + 4, tol.max_depth)) {
    value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        fn, a, b, depth, tol.relative, &error, &l1);
    if (!std::isfinite(value)) return {value, error};
    target = std::max(tol.absolute, tol.relative * std::abs(value));
    if (error <= target || depth == tol.max_depth) break;
  }
  if (error > target) {
    throw QuadratureError("adaptive quadrature did not converge", error,
                          target);
  }
  return {value, error};
}

/// Non-throwing variant for heuristic callers; reports what was achieved.
template <class Fn>
QuadratureResult integrate_best_effort(Fn&& fn, double a, double b,
                                       unsigned max_depth = 10,
                                       double relative = 1e-10) {
  if (a == b) return {};
  if (detail::ulp_interval(a, b)) return {fn(0.5 * (a + b)) * (b - a), 0.0};
  double error = 0.0;
  double l1 = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
          fn, a, b, max_depth, relative, &error, &l1);
  return {value, error};
}

/// t -> \int_0^t h(s) ds for a nonnegative integrand on [0, inf).
///
/// Cumulative values are cached at the dyadic nodes 2^k, so one evaluation
/// costs a single adaptive panel on [2^k, t]. The cache is shared between
/// copies and guarded by a mutex.
class CumulativeIntegral {
 public:
  explicit CumulativeIntegral(std::function<double(double)> integrand,
                              QuadratureTolerance tol = {})
      : state_(std::make_shared<State>(std::move(integrand), tol)) {}

  double operator()(double t) const {
    if (t <= 0.0) return 0.0;
    if (std::isinf(t)) return std::numeric_limits<double>::infinity();
    int exponent = 0;
    std::frexp(t, &exponent);
    const int k = exponent - 1;  // 2^k <= t < 2^(k+1)
    if (k < kMinExponent) {
      return integrate_best_effort(state_->integrand, 0.0, t).value;
    }
    const double node = std::ldexp(1.0, k);
    const double base = cumulative_at(k);
    if (!std::isfinite(base)) return base;
    return base + integrate(state_->integrand, node, t, panel_tolerance(base)).value;
  }

 private:
  static constexpr int kMinExponent = -64;

  struct State {
    State(std::function<double(double)> h, QuadratureTolerance t)
        : integrand(std::move(h)), tol(t) {}
    std::function<double(double)> integrand;
    QuadratureTolerance tol;
    std::mutex mutex;
    std::vector<double> cumulative;  // index i <-> node 2^(kMinExponent + i)
  };

  // A panel only needs to be accurate relative to the running total it is
  // added to; short panels far from the origin otherwise hit the roundoff
  // floor of the Kronrod error estimate.
  QuadratureTolerance panel_tolerance(double base) const {
    auto tol = state_->tol;
    tol.absolute = std::max(tol.absolute, tol.relative * std::abs(base));
    return tol;
  }

  double cumulative_at(int k) const {
    std::lock_guard<std::mutex> lock(state_->mutex);
    auto& cum = state_->cumulative;
    if (cum.empty()) {
      // Below 2^-64 the endpoint behaviour s^p, p < 1, stalls the error
      // estimate; the panel is negligible next to any later node.
      cum.push_back(
          integrate_best_effort(state_->integrand, 0.0, std::ldexp(1.0, kMinExponent))
              .value);
    }
    const auto wanted = static_cast<std::size_t>(k - kMinExponent);
    while (cum.size() <= wanted) {
      const int lo = kMinExponent + static_cast<int>(cum.size()) - 1;
      const double prev = cum.back();
      if (!std::isfinite(prev)) {
        cum.push_back(prev);
        continue;
      }
      const double piece = integrate(state_->integrand, std::ldexp(1.0, lo),
                                     std::ldexp(1.0, lo + 1), panel_tolerance(prev))
                               .value;
      cum.push_back(prev + piece);
    }
    return cum[wanted];
  }

  std::shared_ptr<State> state_;
};

}  // namespace solvlab
