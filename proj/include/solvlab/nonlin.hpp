#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "solvlab/errors.hpp"
#include "solvlab/quadrature.hpp"
#include "solvlab/tail_fit.hpp"

namespace solvlab {

/// s -> s^p * (log(e + s))^alpha.
struct PowerLog {
  double p = 1.0;
  double alpha = 0.0;
};

enum class Exactness { Symbolic, Fitted };

/// Asymptotic growth s^lead * (log s)^log_exponent. Exact for PowerLog,
/// fitted on the tail [1e3, 1e9] for custom callables.
struct GrowthDescriptor {
  double lead_exponent = 0.0;
  double log_exponent = 0.0;
  Exactness exactness = Exactness::Symbolic;
  double residual = 0.0;
};

namespace detail {

// log(log(e + exp(log_s))) without overflowing exp(log_s).
inline double log_log_e_plus(double log_s) {
  const double inner = log_s > 1.0
                           ? log_s + std::log1p(std::numbers::e * std::exp(-log_s))
                           : std::log(std::numbers::e + std::exp(log_s));
  return std::log(inner);
}

// p*(e+s)*log(e+s) + alpha*s > 0 on [0, inf); the derivative of the
// PowerLog form carries exactly this sign.
inline bool power_log_increasing(double p, double alpha) {
  if (alpha >= 0.0 || 2.0 * p + alpha >= 0.0) return true;
  // The bracket is convex in s with minimum where log(e+s) = -alpha/p - 1.
  const double at_min = -alpha * std::numbers::e - p * std::exp(-alpha / p - 1.0);
  return at_min > 0.0;
}

}  // namespace detail

/// An admissible nonlinearity h: continuous, h(0) = 0, strictly increasing.
///
/// Either the PowerLog grammar (checked symbolically) or a user callable
/// screened on 256 geometric sample points spanning [1e-6, 1e9]. Copies
/// share the immutable implementation.
class Nonlinearity {
 public:
  static Nonlinearity power_log(double p, double alpha = 0.0) {
    if (!std::isfinite(p) || !std::isfinite(alpha)) {
      throw SpecRejected("powerlog parameters must be finite");
    }
    if (p <= 0.0) {
      throw SpecRejected("powerlog requires p > 0 (p = " + format(p) +
                         " gives h(0) != 0 or a non-increasing map)");
    }
    if (!detail::power_log_increasing(p, alpha)) {
      throw SpecRejected("powerlog(p=" + format(p) + ", alpha=" +
                         format(alpha) + ") is not increasing on [0, inf)");
    }
    auto impl = std::make_shared<Impl>();
    impl->form = PowerLog{p, alpha};
    impl->growth = {p, alpha, Exactness::Symbolic, 0.0};
    return Nonlinearity(std::move(impl));
  }

  static Nonlinearity custom(std::function<double(double)> fn,
                             std::string label = "custom") {
    if (!fn) throw SpecRejected("custom nonlinearity has no callable");
    screen(fn, label);
    auto impl = std::make_shared<Impl>();
    impl->growth = fit_growth(fn);
    impl->form = Custom{std::move(fn), std::move(label)};
    return Nonlinearity(std::move(impl));
  }

  double operator()(double s) const {
    if (!(s >= 0.0)) throw DomainError("nonlinearity evaluated at s = " + format(s));
    if (s == 0.0) return 0.0;
    if (const auto* pl = std::get_if<PowerLog>(&impl_->form)) {
      const double base = std::pow(s, pl->p);
      if (pl->alpha == 0.0) return base;
      return base * std::pow(std::log(std::numbers::e + s), pl->alpha);
    }
    return std::get<Custom>(impl_->form).fn(s);
  }

  /// log h(s); -inf at s = 0.
  double log_at(double s) const {
    if (!(s >= 0.0)) throw DomainError("nonlinearity evaluated at s = " + format(s));
    if (s == 0.0) return -std::numeric_limits<double>::infinity();
    return log_at_log(std::log(s));
  }

  /// log h(exp(log_s)), exact in log space for PowerLog.
  double log_at_log(double log_s) const {
    if (const auto* pl = std::get_if<PowerLog>(&impl_->form)) {
      double value = pl->p * log_s;
      if (pl->alpha != 0.0) value += pl->alpha * detail::log_log_e_plus(log_s);
      return value;
    }
    return std::log(std::get<Custom>(impl_->form).fn(std::exp(log_s)));
  }

  bool is_power_log() const { return std::holds_alternative<PowerLog>(impl_->form); }
  const PowerLog* power_log_form() const { return std::get_if<PowerLog>(&impl_->form); }
  bool is_pure_power() const {
    const auto* pl = power_log_form();
    return pl != nullptr && pl->alpha == 0.0;
  }
  const GrowthDescriptor& growth() const { return impl_->growth; }

  std::string describe() const {
    if (const auto* pl = power_log_form()) {
      return "powerlog(p=" + format(pl->p) + ", alpha=" + format(pl->alpha) + ")";
    }
    return std::get<Custom>(impl_->form).label;
  }

 private:
  struct Custom {
    std::function<double(double)> fn;
    std::string label;
  };
  struct Impl {
    std::variant<PowerLog, Custom> form;
    GrowthDescriptor growth;
  };

  explicit Nonlinearity(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

  static std::string format(double x) {
    std::ostringstream out;
    out << x;
    return out.str();
  }

  static void screen(const std::function<double(double)>& fn, const std::string& label) {
    if (fn(0.0) != 0.0) throw SpecRejected(label + ": h(0) must be exactly 0");
    const auto grid = geometric_grid(1e-6, 1e9, 256);
    double previous = 0.0;
    for (const double s : grid) {
      const double value = fn(s);
      if (std::isnan(value) || value < 0.0) {
        throw SpecRejected(label + ": invalid value at s = " + format(s));
      }
      // Saturation to +inf at the top of the grid is tolerated (overflow).
      if (std::isinf(value) && std::isinf(previous)) continue;
      if (!(value > previous)) {
        throw SpecRejected(label + ": not strictly increasing near s = " + format(s));
      }
      previous = value;
    }
  }

  static GrowthDescriptor fit_growth(const std::function<double(double)>& fn) {
    std::vector<double> s_values;
    std::vector<double> log_values;
    for (const double s : geometric_grid(1e3, 1e9, 64)) {
      const double value = fn(s);
      if (!std::isfinite(value) || value <= 0.0) continue;
      s_values.push_back(s);
      log_values.push_back(std::log(value));
    }
    GrowthDescriptor growth;
    growth.exactness = Exactness::Fitted;
    if (s_values.size() < 8) {
      growth.lead_exponent = std::numeric_limits<double>::infinity();
      growth.residual = std::numeric_limits<double>::infinity();
      return growth;
    }
    const auto fit = fit_power_log(s_values, log_values);
    growth.lead_exponent = fit.exponent;
    growth.log_exponent = fit.log_exponent;
    growth.residual = fit.residual;
    return growth;
  }

  std::shared_ptr<const Impl> impl_;
};

/// F(t) = \int_0^t h(s) ds. Closed form for pure powers, cached adaptive
/// quadrature otherwise.
class Primitive {
 public:
  explicit Primitive(Nonlinearity h) : h_(std::move(h)) {
    if (!h_.is_pure_power()) {
      cumulative_.emplace([h = h_](double s) { return h(s); });
    }
  }

  double operator()(double t) const {
    if (!(t >= 0.0)) throw DomainError("primitive evaluated at t < 0");
    if (t == 0.0) return 0.0;
    if (cumulative_) return (*cumulative_)(t);
    const double p = h_.power_log_form()->p;
    return std::pow(t, p + 1.0) / (p + 1.0);
  }

  /// log F(t), without overflow for the closed form.
  double log_at(double t) const {
    if (t == 0.0) return -std::numeric_limits<double>::infinity();
    if (!cumulative_) {
      const double p = h_.power_log_form()->p;
      return (p + 1.0) * std::log(t) - std::log(p + 1.0);
    }
    return std::log((*this)(t));
  }

  bool closed_form() const { return !cumulative_.has_value(); }
  const Nonlinearity& integrand() const { return h_; }

 private:
  Nonlinearity h_;
  std::optional<CumulativeIntegral> cumulative_;
};

/// Gamma(s) = \int_0^{2s} g(t) dt + 2 N s^2. An absent g contributes 0.
class GammaMap {
 public:
  GammaMap(std::optional<Nonlinearity> g, int dimension) : dimension_(dimension) {
    if (dimension < 2) throw DomainError("dimension N must be >= 2");
    if (g) g_primitive_.emplace(std::move(*g));
  }

  double operator()(double s) const {
    if (!(s >= 0.0)) throw DomainError("gamma evaluated at s < 0");
    const double quadratic = 2.0 * dimension_ * s * s;
    if (!g_primitive_) return quadratic;
    return (*g_primitive_)(2.0 * s) + quadratic;
  }

  int dimension() const { return dimension_; }
  bool has_gradient_term() const { return g_primitive_.has_value(); }

 private:
  std::optional<Primitive> g_primitive_;
  int dimension_;
};

struct InverseTolerance {
  double absolute = 1e-10;
  double relative = 1e-12;
};

/// Solves map(x) = y for a strictly increasing map with map(0) = 0.
///
/// Geometric bracket growth from [0, 1] followed by bisection. Bisection
/// runs until |map(x) - y| <= relative * y or the bracket collapses to
/// adjacent doubles; the contract max(absolute, relative * y) is therefore
/// met whenever the map is resolvable in double precision.
template <class Map>
double invert(const Map& map, double y, const InverseTolerance& tol = {}) {
  if (!(y >= 0.0)) throw DomainError("invert: target must be >= 0");
  if (std::isinf(y)) throw BracketError("invert: infinite target");
  if (y == 0.0) return 0.0;

  auto eval = [&](double x) {
    const double value = map(x);
    if (std::isnan(value)) throw BracketError("invert: map returned NaN");
    return value;
  };

  double lo = 0.0;
  double hi = 1.0;
  if (eval(hi) < y) {
    for (;;) {
      lo = hi;
      hi *= 2.0;
      if (!std::isfinite(hi)) {
        throw BracketError("invert: map stays below target " + std::to_string(y));
      }
      if (eval(hi) >= y) break;
    }
  } else {
    double x = 0.5;
    while (x > 0.0) {
      if (eval(x) <= y) {
        lo = x;
        break;
      }
      hi = x;
      x *= 0.5;
    }
  }

  const double target = tol.relative * y;
  double best = hi;
  double best_residual = std::abs(eval(hi) - y);
  if (lo > 0.0) {
    const double r = std::abs(eval(lo) - y);
    if (r < best_residual) {
      best = lo;
      best_residual = r;
    }
  }
  while (best_residual > target) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    const double value = eval(mid);
    const double residual = std::abs(value - y);
    if (residual < best_residual) {
      best = mid;
      best_residual = residual;
    }
    if (value < y) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return best;
}

}  // namespace solvlab
