#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "solvlab/criteria.hpp"
#include "solvlab/errors.hpp"
#include "solvlab/nonlin.hpp"
#include "solvlab/quadrature.hpp"
#include "solvlab/tail_fit.hpp"

namespace solvlab {

namespace detail {

// Node table for T(x) = \int_x^inf ds / Gamma^{-1}(F(s)), half-octave panels.
struct TailTable {
  std::vector<double> x;  // ascending
  std::vector<double> T;  // descending
  double tail_at_top = 0.0;
  bool capped = false;    // table stopped at an overflow, not at a negligible tail
};

}  // namespace detail

/// phi(t) with \int_{phi(t)}^inf ds / Gamma^{-1}(F(s)) = t and the radial
/// supersolution u(r) = phi(R^2 - r^2) built from it.
class SupersolutionProfile {
 public:
  /// phi, phi' = -Gamma^{-1}(F(phi)) and phi'' = f(phi)|phi'| / Gamma'(|phi'|),
  /// all multiplied by scale().
  double phi(double t) const { return scale_ * phi0(t); }
  double dphi(double t) const { return scale_ * dphi0(phi0(t)); }
  double ddphi(double t) const {
    const double p = phi0(t);
    return scale_ * ddphi0(p, dphi0(p));
  }

  struct Point {
    double t, phi, dphi, ddphi;
  };
  Point at(double t) const {
    const double p = phi0(t);
    const double d = dphi0(p);
    return {t, scale_ * p, scale_ * d, scale_ * ddphi0(p, d)};
  }

  double u_bar(double r) const { return phi(R_ * R_ - r * r); }
  /// \int_x^inf ds / Gamma^{-1}(F(s)).
  double tail(double x) const;
  /// Leading-order tail for an s^-lead (log s)^-log integrand; +inf where
  /// that asymptotic form does not apply yet.
  double tail_estimate(double X) const {
    const double L = std::log(X);
    const double denominator = tail_lead_ - 1.0 + tail_log_ / L;
    if (!(L > 1.0) || !(denominator > 0.0)) return std::numeric_limits<double>::infinity();
    return X * integrand(X) / denominator;
  }
  /// 1 / Gamma^{-1}(F(s)).
  double integrand(double s) const { return 1.0 / invert(gamma_, F_(s), kExactInverse); }

  double R() const { return R_; }
  double epsilon() const { return epsilon_; }
  double u0_bar() const { return phi(R_ * R_); }
  double scale() const { return scale_; }
  int dimension() const { return N_; }
  const Nonlinearity& f() const { return f_; }
  const std::optional<Nonlinearity>& g() const { return g_; }
  const Primitive& F() const { return F_; }
  const GammaMap& gamma() const { return gamma_; }
  const CriterionVerdict& criterion() const { return criterion_; }
  bool tail_capped() const { return table_->capped; }
  /// Smallest t whose phi(t) lies inside the quadrature table.
  double smallest_tabulated_t() const { return table_->T.back(); }

  /// Same profile with phi multiplied by factor (derivatives follow).
  SupersolutionProfile scaled(double factor) const {
    SupersolutionProfile out = *this;
    out.scale_ *= factor;
    return out;
  }

 private:
  SupersolutionProfile(Nonlinearity f, std::optional<Nonlinearity> g, int N)
      : f_(std::move(f)), g_(std::move(g)), N_(N), F_(f_), gamma_(g_, N) {}

  friend SupersolutionProfile build_profile(const Nonlinearity&, const std::optional<Nonlinearity>&,
                                            int);

  double phi0(double t) const;
  double phi_beyond_table(double t) const;
  double dphi0(double p) const { return -invert(gamma_, F_(p), kExactInverse); }
  // Bisect to bracket collapse; quadrature panels would otherwise see the
  // inverse's stopping noise.
  static constexpr InverseTolerance kExactInverse{0.0, 0.0};
  double ddphi0(double p, double d) const {
    const double s = std::abs(d);
    const double gprime = (g_ ? 2.0 * (*g_)(2.0 * s) : 0.0) + 4.0 * N_ * s;
    return f_(p) * s / gprime;
  }

  Nonlinearity f_;
  std::optional<Nonlinearity> g_;
  int N_;
  Primitive F_;
  GammaMap gamma_;
  CriterionVerdict criterion_;
  double tail_lead_ = 2.0;
  double tail_log_ = 0.0;
  std::shared_ptr<const detail::TailTable> table_;
  double epsilon_ = 0.0;
  double R_ = 0.0;
  double scale_ = 1.0;
};

namespace detail {

inline double panel(const SupersolutionProfile& p, double a, double b, double absolute = 0.0) {
  QuadratureTolerance tol;
  tol.absolute = absolute;
  tol.relative = 1e-11;
  tol.max_depth = 12;
  return integrate([&](double s) { return p.integrand(s); }, a, b, tol).value;
}

}  // namespace detail

inline double SupersolutionProfile::tail(double x) const {
  const auto& tab = *table_;
  if (!(x > 0.0)) throw DomainError("tail integral needs x > 0");
  if (x >= tab.x.back()) return tail_estimate(x);
  if (x < tab.x.front()) {
    return tab.T.front() + detail::panel(*this, x, tab.x.front());
  }
  auto it = std::upper_bound(tab.x.begin(), tab.x.end(), x);
  const auto j = static_cast<std::size_t>(it - tab.x.begin());
  return tab.T[j] + detail::panel(*this, x, tab.x[j]);
}

inline double SupersolutionProfile::phi_beyond_table(double t) const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto& tab = *table_;
  if (tab.capped) return inf;
  // Invert the asymptotic tail in log x.
  double lo = std::log(tab.x.back());
  double hi = std::log(1e300);
  try {
    if (tail_estimate(std::exp(hi)) > t) return inf;
    while (hi - lo > 1e-15 * std::abs(hi)) {
      const double mid = 0.5 * (lo + hi);
      if (tail_estimate(std::exp(mid)) > t) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
  } catch (const BracketError&) {
    return inf;
  }
  return std::exp(0.5 * (lo + hi));
}

inline double SupersolutionProfile::phi0(double t) const {
  const auto& tab = *table_;
  if (!(t > 0.0)) throw DomainError("phi needs t > 0");
  if (t > tab.T.front()) {
    throw DomainError("phi(t) undefined: t exceeds \\int_0^inf of the integrand on the table");
  }
  if (t < tab.T.back()) return phi_beyond_table(t);
  // T is descending along ascending x.
  auto it = std::lower_bound(tab.T.begin(), tab.T.end(), t, std::greater<>());
  auto j = static_cast<std::size_t>(it - tab.T.begin());
  if (j == 0) return tab.x.front();
  double lo = tab.x[j - 1], hi = tab.x[j];
  const double node = hi;
  const double T_node = tab.T[j];
  // Safeguarded Newton on T(x) = t with T' = -integrand.
  double x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 100; ++iter) {
    const double Tx = T_node + detail::panel(*this, x, node, 1e-14 * t);
    const double residual = Tx - t;
    if (std::abs(residual) <= 1e-15 * t) return x;
    if (residual > 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    double next = x + residual / integrand(x);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * x) return next;
    x = next;
  }
  return x;
}

/// Builds phi and the radius R = min(1/2, sqrt(eps)) (1 - 1e-3), where
/// phi <= |phi'| / 2 on (0, eps). Requires \int^inf ds / Gamma^{-1}(F(s)) < inf.
inline SupersolutionProfile build_profile(const Nonlinearity& f, const std::optional<Nonlinearity>& g,
                                          int N) {
  SupersolutionProfile profile(f, g, N);
  profile.criterion_ = classify_integral(IntegralKind::GammaInvF, f, g, N);
  if (profile.criterion_.status != Status::Converges) {
    throw PreconditionError("supersolution needs \\int^inf ds/Gamma^{-1}(F(s)) < inf; criterion is " + std::string(
                            to_string(profile.criterion_.status)));
  }
  if (profile.criterion_.reduced) {
    profile.tail_lead_ = profile.criterion_.reduced->lead;
    profile.tail_log_ = profile.criterion_.reduced->log;
  } else {
    profile.tail_lead_ = -profile.criterion_.asymptotic_slope;
    profile.tail_log_ = 0.0;
  }

  const double step = std::sqrt(2.0);
  auto table = std::make_shared<detail::TailTable>();
  // Upward from 1 until the tail is negligible or the integrand overflows.
  std::vector<double> up{1.0};
  std::vector<double> pieces;
  const auto tail_estimate = [&](double X) { return profile.tail_estimate(X); };
  double top_tail = tail_estimate(1.0);
  for (double X = 1.0; top_tail > 1e-24;) {
    if (X > 1e280) {
      table->capped = true;
      break;
    }
    const double next = X * step;
    double piece = 0.0, estimate = 0.0;
    try {
      piece = detail::panel(profile, X, next);
      estimate = tail_estimate(next);
    } catch (const BracketError&) {
      // F or Gamma left the double range.
      table->capped = true;
      break;
    }
    up.push_back(next);
    pieces.push_back(piece);
    top_tail = estimate;
    X = next;
  }
  std::vector<double> T_up(up.size());
  T_up.back() = top_tail;
  for (std::size_t i = up.size() - 1; i-- > 0;) T_up[i] = T_up[i + 1] + pieces[i];

  // Downward until T covers t = 1/4 (R <= 1/2 never needs more).
  std::vector<double> down_x, down_T;
  double x = 1.0, T = T_up.front();
  while (T < 0.25 && x > 1e-250) {
    const double lower = x / step;
    T += detail::panel(profile, lower, x);
    x = lower;
    down_x.push_back(x);
    down_T.push_back(T);
  }
  for (std::size_t i = down_x.size(); i-- > 0;) {
    table->x.push_back(down_x[i]);
    table->T.push_back(down_T[i]);
  }
  table->x.insert(table->x.end(), up.begin(), up.end());
  table->T.insert(table->T.end(), T_up.begin(), T_up.end());
  table->tail_at_top = top_tail;
  profile.table_ = table;

  // eps: end of the initial stretch where phi <= |phi'| / 2.
  const double t_hi = std::min(0.25, table->T.front());
  const auto grid = geometric_grid(1e-12 * t_hi, t_hi, 400);
  double eps = t_hi;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double p = profile.phi0(grid[i]);
    if (std::isinf(p)) continue;  // past the double range the ratio condition holds
    if (!(p <= 0.5 * std::abs(profile.dphi0(p)))) {
      if (i == 0) throw PreconditionError("phi <= |phi'|/2 fails on the whole search grid");
      eps = grid[i - 1];
      break;
    }
  }
  profile.epsilon_ = eps;
  profile.R_ = std::min(0.5, std::sqrt(eps)) * (1.0 - 1e-3);
  return profile;
}

enum class SupersolCheck { Sufficient, Original, Convexity, Gradient };

inline std::string to_string(SupersolCheck c) {
  switch (c) {
    case SupersolCheck::Sufficient: return "a_sufficient";
    case SupersolCheck::Original: return "b_original";
    case SupersolCheck::Convexity: return "c1_convexity_bound";
    case SupersolCheck::Gradient: return "c2_gradient_bound";
  }
  return "?";
}

struct SupersolutionReport {
  std::size_t grid_size = 0;
  double R = 0.0;
  double epsilon = 0.0;
  double u0_bar = 0.0;
  double scale = 1.0;
  std::vector<double> radii;
  /// Max relative violation (lhs - rhs) / rhs per check; <= tolerance passes.
  std::array<double, 4> max_violation{};
  std::array<bool, 4> passed{};
  double tolerance = 1e-8;
  std::size_t unresolved = 0;    // radii where phi(R^2 - r^2) exceeds the double range
  double identity_error = 0.0;  // max |Gamma(|phi'|) - F(phi)| / F(phi)
  bool monotone = true;         // phi' < 0 and phi'' > 0 on the grid
  double phi_at_tmin = 0.0;     // phi(1e-8 R^2)
  bool explodes = false;        // phi_at_tmin > 1e6
  bool ratio_grows = false;     // |phi'|/phi larger at t_min than at R^2
  bool all_passed = false;
};

/// The four supersolution inequalities on radii R (i + 1/2) / n: (a) the
/// sufficient form phi'' + 2N|phi'| + g(|phi'|) <= f(phi), (b) the radial
/// inequality 4 r^2 phi'' - 2N phi' + g(2r|phi'|) <= f(phi), and the
/// component bounds (c1) phi'' <= f(phi)/(4N), (c2) g(|phi'|) + 2N|phi'| <= f(phi)/2.
inline SupersolutionReport verify_supersolution(const SupersolutionProfile& profile,
                                                std::size_t grid_size) {
  SupersolutionReport rep;
  rep.grid_size = grid_size;
  rep.R = profile.R();
  rep.epsilon = profile.epsilon();
  rep.u0_bar = profile.u0_bar();
  rep.scale = profile.scale();
  rep.max_violation.fill(-std::numeric_limits<double>::infinity());
  const int N = profile.dimension();
  const auto& f = profile.f();
  const auto& g = profile.g();
  const auto gv = [&](double s) { return g ? (*g)(s) : 0.0; };
  const double R = profile.R();
  for (std::size_t i = 0; i < grid_size; ++i) {
    const double r = R * (static_cast<double>(i) + 0.5) / static_cast<double>(grid_size);
    rep.radii.push_back(r);
    if (std::isinf(profile.phi(R * R - r * r))) {
      ++rep.unresolved;
      continue;
    }
    const auto pt = profile.at(R * R - r * r);
    const double s = std::abs(pt.dphi);
    const double fphi = f(pt.phi);
    const auto violation = [&](SupersolCheck c, double lhs, double rhs) {
      auto& slot = rep.max_violation[static_cast<std::size_t>(c)];
      slot = std::max(slot, (lhs - rhs) / std::abs(rhs));
    };
    violation(SupersolCheck::Sufficient, pt.ddphi + 2.0 * N * s + gv(s), fphi);
    violation(SupersolCheck::Original, 4.0 * r * r * pt.ddphi - 2.0 * N * pt.dphi + gv(2.0 * r * s), fphi);
    violation(SupersolCheck::Convexity, pt.ddphi, fphi / (4.0 * N));
    violation(SupersolCheck::Gradient, gv(s) + 2.0 * N * s, 0.5 * fphi);
    if (!(pt.dphi < 0.0 && pt.ddphi > 0.0)) rep.monotone = false;
    const double Fphi = profile.F()(pt.phi);
    rep.identity_error =
        std::max(rep.identity_error, std::abs(profile.gamma()(s) - Fphi) / Fphi);
  }
  bool all = rep.monotone;
  for (std::size_t c = 0; c < 4; ++c) {
    rep.passed[c] = rep.unresolved < grid_size && rep.max_violation[c] <= rep.tolerance;
    all = all && rep.passed[c];
  }
  const double t_min = 1e-8 * R * R;
  rep.phi_at_tmin = profile.phi(t_min);
  rep.explodes = rep.phi_at_tmin > 1e6;
  // Where phi(t_min) leaves the double range the ratio is taken at the
  // smallest resolvable t instead.
  const double t_ratio =
      std::isfinite(rep.phi_at_tmin) ? t_min : std::max(t_min, 1.001 * profile.smallest_tabulated_t());
  const auto low = profile.at(t_ratio);
  const auto high = profile.at(R * R);
  rep.ratio_grows = std::abs(low.dphi) / low.phi > std::abs(high.dphi) / high.phi;
  rep.all_passed = all && rep.identity_error <= 1e-6;
  return rep;
}

}  // namespace solvlab
