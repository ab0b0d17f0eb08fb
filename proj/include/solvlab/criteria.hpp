#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "solvlab/errors.hpp"
#include "solvlab/nonlin.hpp"
#include "solvlab/quadrature.hpp"
#include "solvlab/tail_fit.hpp"

namespace solvlab {

/// The improper integrals over [c, inf) that drive every verdict.
///
///   KO         ds / sqrt(F(s))
///   gKO        ds / g(s)
///   GammaInvF  ds / Gamma^{-1}(F(s))
///   gInvF      ds / g^{-1}(f(s))
///   UGrowth    s ds / g(s)       (diverges iff value blow-up accompanies
///                                  gradient blow-up)
enum class IntegralKind { KO, gKO, GammaInvF, gInvF, UGrowth };
enum class Status { Diverges, Converges, Inconclusive };
enum class Method { SymbolicExponentRule, NumericTail };

inline std::string_view to_string(IntegralKind kind) {
  switch (kind) {
    case IntegralKind::KO: return "KO";
    case IntegralKind::gKO: return "gKO";
    case IntegralKind::GammaInvF: return "GammaInvF";
    case IntegralKind::gInvF: return "gInvF";
    case IntegralKind::UGrowth: return "UGrowth";
  }
  return "?";
}

inline std::string_view to_string(Status status) {
  switch (status) {
    case Status::Diverges: return "Diverges";
    case Status::Converges: return "Converges";
    case Status::Inconclusive: return "Inconclusive";
  }
  return "?";
}

inline std::string_view to_string(Method method) {
  return method == Method::SymbolicExponentRule ? "symbolic-exponent-rule"
                                                : "numeric-tail";
}

/// Integrand ~ 1 / (s^lead * (log s)^log) as s -> inf.
struct ReducedExponents {
  double lead = 0.0;
  double log = 0.0;
};

struct CriterionVerdict {
  IntegralKind kind = IntegralKind::KO;
  Status status = Status::Inconclusive;
  Method method = Method::SymbolicExponentRule;
  std::optional<ReducedExponents> reduced;
  std::string rule;
  double lower_limit = 1.0;
  // Numeric-tail evidence.
  std::vector<double> partial_sums;
  double tail_slope = std::numeric_limits<double>::quiet_NaN();
  double asymptotic_slope = std::numeric_limits<double>::quiet_NaN();
  double asymptotic_slope_late = std::numeric_limits<double>::quiet_NaN();
  std::string diagnostic;
};

struct CriterionOptions {
  bool force_numeric = false;
  double lower_limit = 1.0;
  double slope_margin = 0.05;
  int last_octave = 40;
};

/// Exponent comparisons treat values within this distance as equal.
inline constexpr double kExponentTie = 1e-9;

/// Convergence of \int^inf ds / (s^lead (log s)^log).
inline Status exponent_rule(const ReducedExponents& e) {
  if (e.lead > 1.0 + kExponentTie) return Status::Converges;
  if (e.lead < 1.0 - kExponentTie) return Status::Diverges;
  return e.log > 1.0 + kExponentTie ? Status::Converges : Status::Diverges;
}

namespace detail {

inline const PowerLog& require_power_log(const std::optional<Nonlinearity>& h) {
  return *h->power_log_form();
}

inline ReducedExponents reduce(IntegralKind kind, const std::optional<Nonlinearity>& f,
                               const std::optional<Nonlinearity>& g) {
  switch (kind) {
    case IntegralKind::KO: {
      const auto& pf = require_power_log(f);
      return {(pf.p + 1.0) / 2.0, pf.alpha / 2.0};
    }
    case IntegralKind::gKO: {
      const auto& pg = require_power_log(g);
      return {pg.p, pg.alpha};
    }
    case IntegralKind::UGrowth: {
      const auto& pg = require_power_log(g);
      return {pg.p - 1.0, pg.alpha};
    }
    case IntegralKind::gInvF: {
      const auto& pf = require_power_log(f);
      const auto& pg = require_power_log(g);
      return {pf.p / pg.p, (pf.alpha - pg.alpha) / pg.p};
    }
    case IntegralKind::GammaInvF: {
      const auto& pf = require_power_log(f);
      // Gamma ~ s^gamma_lead (log s)^gamma_log: the larger of the
      // integrated gradient term s^(q+1) and the quadratic 2N s^2.
      double gamma_lead = 2.0;
      double gamma_log = 0.0;
      if (g) {
        const auto& pg = require_power_log(g);
        const double lead = pg.p + 1.0;
        if (lead > 2.0 + kExponentTie) {
          gamma_lead = lead;
          gamma_log = pg.alpha;
        } else if (lead >= 2.0 - kExponentTie) {
          gamma_log = std::max(pg.alpha, 0.0);
        }
      }
      return {(pf.p + 1.0) / gamma_lead, (pf.alpha - gamma_log) / gamma_lead};
    }
  }
  return {};
}

inline std::function<double(double)> integrand(IntegralKind kind,
                                               const std::optional<Nonlinearity>& f,
                                               const std::optional<Nonlinearity>& g,
                                               int dimension) {
  switch (kind) {
    case IntegralKind::KO: {
      Primitive primitive(*f);
      return [primitive](double s) { return 1.0 / std::sqrt(primitive(s)); };
    }
    case IntegralKind::gKO:
      return [g = *g](double s) { return 1.0 / g(s); };
    case IntegralKind::UGrowth:
      return [g = *g](double s) { return s / g(s); };
    case IntegralKind::gInvF:
      return [f = *f, g = *g](double s) { return 1.0 / invert(g, f(s)); };
    case IntegralKind::GammaInvF: {
      Primitive primitive(*f);
      GammaMap gamma(g, dimension);
      return [primitive, gamma](double s) {
        return 1.0 / invert(gamma, primitive(s));
      };
    }
  }
  return {};
}

inline bool uses_f(IntegralKind kind) {
  return kind == IntegralKind::KO || kind == IntegralKind::GammaInvF ||
         kind == IntegralKind::gInvF;
}

inline bool requires_g(IntegralKind kind) {
  return kind == IntegralKind::gKO || kind == IntegralKind::gInvF ||
         kind == IntegralKind::UGrowth;
}

// Local log-log slope of the integrand recovered from consecutive dyadic
// sums, regressed against 1/ln s and extrapolated to s = inf. For
// s^-a (log s)^-b the local slope is exactly -a - b / ln s, so the
// intercept isolates the power and the log correction cannot tip it.
inline double extrapolated_slope(const std::vector<double>& sums, double lower,
                                 std::size_t first, std::size_t last) {
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t k = first; k + 1 < sums.size() && k <= last; ++k) {
    const double s = lower * std::ldexp(1.0, static_cast<int>(k) + 1);
    if (s < 100.0) continue;
    x.push_back(1.0 / std::log(s));
    y.push_back(std::log2(sums[k + 1] / sums[k]) - 1.0);
  }
  if (x.size() < 4) return std::numeric_limits<double>::quiet_NaN();
  return fit_line(x, y).intercept;
}

}  // namespace detail

/// Decides whether the kind's improper integral diverges.
///
/// PowerLog inputs are reduced to exponents and decided exactly. Otherwise
/// (or with force_numeric) the integral is split into dyadic pieces
/// [c 2^k, c 2^(k+1)], k = 0..40, and the tail slope is compared with -1
/// using the margin delta; near the boundary the verdict is Inconclusive.
inline CriterionVerdict classify_integral(IntegralKind kind,
                                          const std::optional<Nonlinearity>& f,
                                          const std::optional<Nonlinearity>& g,
                                          int dimension,
                                          const CriterionOptions& options = {}) {
  if (detail::uses_f(kind) && !f) {
    throw PreconditionError(std::string(to_string(kind)) + " requires f");
  }
  if (detail::requires_g(kind) && !g) {
    throw PreconditionError(std::string(to_string(kind)) + " requires g");
  }
  if (kind == IntegralKind::GammaInvF && dimension < 2) {
    throw PreconditionError("GammaInvF requires N >= 2");
  }
  if (!(options.lower_limit > 0.0)) {
    throw PreconditionError("lower limit must be positive");
  }

  CriterionVerdict verdict;
  verdict.kind = kind;
  verdict.lower_limit = options.lower_limit;

  const bool f_symbolic = !detail::uses_f(kind) || f->is_power_log();
  const bool g_symbolic = !g || kind == IntegralKind::KO || g->is_power_log();
  if (!options.force_numeric && f_symbolic && g_symbolic) {
    const auto reduced = detail::reduce(kind, f, g);
    verdict.method = Method::SymbolicExponentRule;
    verdict.reduced = reduced;
    verdict.status = exponent_rule(reduced);
    std::ostringstream rule;
    rule << "integrand ~ s^-" << reduced.lead << " (log s)^-" << reduced.log << ": ";
    if (std::abs(reduced.lead - 1.0) > kExponentTie) {
      rule << (reduced.lead > 1.0 ? "lead > 1" : "lead < 1");
    } else {
      rule << "lead = 1, " << (reduced.log > 1.0 + kExponentTie ? "log > 1" : "log <= 1");
    }
    verdict.rule = rule.str();
    return verdict;
  }

  verdict.method = Method::NumericTail;
  verdict.rule = "dyadic tail slope vs -1 with margin " + std::to_string(options.slope_margin);
  const auto h = detail::integrand(kind, f, g, dimension);
  const double c = options.lower_limit;
  const auto octaves = static_cast<std::size_t>(options.last_octave) + 1;
  try {
    for (std::size_t k = 0; k < octaves; ++k) {
      const double a = c * std::ldexp(1.0, static_cast<int>(k));
      verdict.partial_sums.push_back(integrate_best_effort(h, a, 2.0 * a).value);
    }
  } catch (const Error& e) {
    verdict.status = Status::Inconclusive;
    verdict.diagnostic = e.what();
    return verdict;
  }

  const auto& sums = verdict.partial_sums;
  const std::size_t half = octaves / 2;
  for (std::size_t k = 0; k < octaves; ++k) {
    if (!std::isfinite(sums[k]) || sums[k] < 0.0) {
      verdict.status = Status::Inconclusive;
      verdict.diagnostic = "non-finite partial sum at octave " + std::to_string(k);
      return verdict;
    }
  }
  if (std::any_of(sums.begin() + static_cast<std::ptrdiff_t>(half), sums.end(),
                  [](double v) { return v == 0.0; })) {
    verdict.status = Status::Converges;
    verdict.diagnostic = "integrand underflows on the tail (super-polynomial decay)";
    return verdict;
  }

  std::vector<double> log_s;
  std::vector<double> log_sum;
  for (std::size_t k = half; k < octaves; ++k) {
    log_s.push_back(std::log(c * std::ldexp(1.0, static_cast<int>(k))));
    log_sum.push_back(std::log(sums[k]));
  }
  verdict.tail_slope = fit_line(log_s, log_sum).slope - 1.0;
  verdict.asymptotic_slope = detail::extrapolated_slope(sums, c, octaves / 4, octaves - 2);
  verdict.asymptotic_slope_late =
      detail::extrapolated_slope(sums, c, (5 * octaves) / 8, octaves - 2);

  const double delta = options.slope_margin;
  const double a1 = verdict.asymptotic_slope;
  const double a2 = verdict.asymptotic_slope_late;
  if (a1 <= -1.0 - delta && a2 <= -1.0 - delta) {
    verdict.status = Status::Converges;
  } else if (a1 >= -1.0 + delta && a2 >= -1.0 + delta) {
    verdict.status = Status::Diverges;
  } else {
    verdict.status = Status::Inconclusive;
    verdict.diagnostic = "tail slope within the margin of -1 or unstable";
  }
  return verdict;
}

// ---------------------------------------------------------------------------
// Interaction of f and g: tail behaviour of g(A sqrt(F(s))) / (A^2 f(s)).

enum class InteractionBranch { LimsupBelow, LiminfAbove, Fails, Inconclusive };

inline std::string_view to_string(InteractionBranch branch) {
  switch (branch) {
    case InteractionBranch::LimsupBelow: return "LimsupBelow";
    case InteractionBranch::LiminfAbove: return "LiminfAbove";
    case InteractionBranch::Fails: return "Fails";
    case InteractionBranch::Inconclusive: return "Inconclusive";
  }
  return "?";
}

struct InteractionProbe {
  double A = 0.0;
  double tail_sup = 0.0;
  double tail_inf = 0.0;
  double tail_last = 0.0;
  bool stabilized = false;
  InteractionBranch branch = InteractionBranch::Inconclusive;
};

struct InteractionVerdict {
  InteractionBranch branch = InteractionBranch::Inconclusive;
  Method method = Method::NumericTail;
  bool advisory = true;
  double A0 = 0.0;
  double eps0 = 0.0;
  std::vector<InteractionProbe> probes;
  std::optional<ReducedExponents> ratio_growth;  // ratio ~ s^lead (log s)^log
  std::string diagnostic;

  bool satisfied() const {
    return branch == InteractionBranch::LimsupBelow ||
           branch == InteractionBranch::LiminfAbove;
  }
};

namespace detail {

inline InteractionProbe probe_ratio(const Nonlinearity& f, const Primitive& F,
                                    const Nonlinearity& g, double A, double eps0) {
  const auto grid = geometric_grid(1e3, 1e9, 64);
  const double log_a = std::log(A);
  std::vector<double> ratio;
  ratio.reserve(grid.size());
  for (const double s : grid) {
    const double log_arg = log_a + 0.5 * F.log_at(s);
    const double log_ratio = g.log_at_log(log_arg) - 2.0 * log_a - f.log_at(s);
    ratio.push_back(std::exp(log_ratio));
  }
  InteractionProbe probe;
  probe.A = A;
  const auto tail_begin = ratio.begin() + static_cast<std::ptrdiff_t>(ratio.size() / 2);
  probe.tail_sup = *std::max_element(tail_begin, ratio.end());
  probe.tail_inf = *std::min_element(tail_begin, ratio.end());
  probe.tail_last = ratio.back();
  bool up = true;
  bool down = true;
  for (auto it = tail_begin + 1; it != ratio.end(); ++it) {
    const double slack = 1e-12 * std::abs(*(it - 1));
    if (*it < *(it - 1) - slack) up = false;
    if (*it > *(it - 1) + slack) down = false;
  }
  probe.stabilized = std::all_of(ratio.begin(), ratio.end(),
                                 [](double v) { return std::isfinite(v); }) &&
                     (up || down);
  if (!probe.stabilized) {
    probe.branch = InteractionBranch::Inconclusive;
  } else if (probe.tail_sup < 0.5 - eps0) {
    probe.branch = InteractionBranch::LimsupBelow;
  } else if (probe.tail_inf > 0.5 + eps0) {
    probe.branch = InteractionBranch::LiminfAbove;
  } else {
    probe.branch = InteractionBranch::Fails;
  }
  return probe;
}

}  // namespace detail

/// Probes A on 12 geometric points of [A0, 1e3 A0] and s on 64 geometric
/// points of [1e3, 1e9], in log space. For PowerLog pairs the ratio's
/// s-exponent is known in closed form and decides the branch for every A;
/// for custom callables the grid verdict is advisory.
inline InteractionVerdict check_interaction(const Nonlinearity& f, const Nonlinearity& g,
                                            double A0, double eps0) {
  if (!(A0 > 0.0) || !(eps0 > 0.0)) {
    throw PreconditionError("interaction check requires A0 > 0 and eps0 > 0");
  }
  InteractionVerdict verdict;
  verdict.A0 = A0;
  verdict.eps0 = eps0;
  const Primitive F(f);
  for (const double A : geometric_grid(A0, 1e3 * A0, 12)) {
    verdict.probes.push_back(detail::probe_ratio(f, F, g, A, eps0));
  }

  const auto* pf = f.power_log_form();
  const auto* pg = g.power_log_form();
  if (pf != nullptr && pg != nullptr) {
    verdict.method = Method::SymbolicExponentRule;
    verdict.advisory = false;
    const double p = pf->p, alpha = pf->alpha, q = pg->p, beta = pg->alpha;
    const ReducedExponents growth{q * (p + 1.0) / 2.0 - p, q * alpha / 2.0 + beta - alpha};
    verdict.ratio_growth = growth;
    const bool lead_zero = std::abs(growth.lead) <= kExponentTie;
    if (growth.lead > kExponentTie || (lead_zero && growth.log > kExponentTie)) {
      verdict.branch = InteractionBranch::LiminfAbove;
      verdict.diagnostic = "ratio -> inf for every fixed A";
    } else if (growth.lead < -kExponentTie || (lead_zero && growth.log < -kExponentTie)) {
      verdict.branch = InteractionBranch::LimsupBelow;
      verdict.diagnostic = "ratio -> 0 for every fixed A";
    } else {
      // ratio -> K(A) = K(1) A^(q-2): monotone in A, so the whole ray
      // A >= A0 is decided by K(A0) and the direction of A^(q-2).
      const double k0 = verdict.probes.front().tail_last;
      verdict.diagnostic = "ratio -> K(A) proportional to A^(q-2); K(A0) = " + std::to_string(k0);
      if (q < 2.0 - kExponentTie) {
        verdict.branch = k0 < 0.5 - eps0 ? InteractionBranch::LimsupBelow
                                         : InteractionBranch::Fails;
      } else if (q > 2.0 + kExponentTie) {
        verdict.branch = k0 > 0.5 + eps0 ? InteractionBranch::LiminfAbove
                                         : InteractionBranch::Fails;
      } else if (k0 < 0.5 - eps0) {
        verdict.branch = InteractionBranch::LimsupBelow;
      } else if (k0 > 0.5 + eps0) {
        verdict.branch = InteractionBranch::LiminfAbove;
      } else {
        verdict.branch = InteractionBranch::Fails;
      }
    }
    return verdict;
  }

  verdict.method = Method::NumericTail;
  verdict.advisory = true;
  bool any_fail = false, any_inconclusive = false, all_below = true, all_above = true;
  for (const auto& probe : verdict.probes) {
    any_fail |= probe.branch == InteractionBranch::Fails;
    any_inconclusive |= probe.branch == InteractionBranch::Inconclusive;
    all_below &= probe.branch == InteractionBranch::LimsupBelow;
    all_above &= probe.branch == InteractionBranch::LiminfAbove;
  }
  if (any_fail) {
    verdict.branch = InteractionBranch::Fails;
  } else if (any_inconclusive) {
    verdict.branch = InteractionBranch::Inconclusive;
  } else if (all_below) {
    verdict.branch = InteractionBranch::LimsupBelow;
  } else if (all_above) {
    verdict.branch = InteractionBranch::LiminfAbove;
  } else {
    verdict.branch = InteractionBranch::Inconclusive;
    verdict.diagnostic = "probed A values split between branches";
  }
  return verdict;
}

// ---------------------------------------------------------------------------
// Supplementary growth conditions and superlinearity of g.

enum class TriState { True, False, Inconclusive };

inline std::string_view to_string(TriState t) {
  switch (t) {
    case TriState::True: return "true";
    case TriState::False: return "false";
    case TriState::Inconclusive: return "inconclusive";
  }
  return "?";
}

namespace detail {

// Tail trend of a positive function on [1e3, 1e9]: unbounded (True),
// bounded (False) or undecided.
inline TriState grows_without_bound(const std::function<double(double)>& log_fn,
                                    double margin = 0.05) {
  std::vector<double> s_values;
  std::vector<double> log_values;
  for (const double s : geometric_grid(1e3, 1e9, 64)) {
    const double v = log_fn(s);
    if (!std::isfinite(v)) continue;
    s_values.push_back(s);
    log_values.push_back(v);
  }
  if (s_values.size() < 8) return TriState::Inconclusive;
  const auto fit = fit_power_log(s_values, log_values);
  if (fit.exponent > margin) return TriState::True;
  if (fit.exponent < -margin) return TriState::False;
  if (fit.log_exponent > 0.75) return TriState::True;
  if (fit.log_exponent < 0.25) return TriState::False;
  return TriState::Inconclusive;
}

}  // namespace detail

enum class Supplementary { GSublinear, FDominatedByG, Neither };

inline std::string_view to_string(Supplementary s) {
  switch (s) {
    case Supplementary::GSublinear: return "GSublinear";
    case Supplementary::FDominatedByG: return "FDominatedByG";
    case Supplementary::Neither: return "Neither";
  }
  return "?";
}

struct SupplementaryVerdict {
  Supplementary result = Supplementary::Neither;
  Method method = Method::SymbolicExponentRule;
  TriState g_sublinear = TriState::Inconclusive;
  TriState f_dominated = TriState::Inconclusive;
};

/// limsup g(s)/s < inf, else limsup f(a s)/g(s) < inf for a in {1/4, 1, 4, 16}.
inline SupplementaryVerdict check_supplementary(const Nonlinearity& f, const Nonlinearity& g) {
  SupplementaryVerdict verdict;
  const auto* pf = f.power_log_form();
  const auto* pg = g.power_log_form();
  if (pf != nullptr && pg != nullptr) {
    verdict.method = Method::SymbolicExponentRule;
    const auto leq = [](double a, double b) { return a <= b + kExponentTie; };
    const auto lt = [](double a, double b) { return a < b - kExponentTie; };
    const bool sub = lt(pg->p, 1.0) || (leq(pg->p, 1.0) && leq(pg->alpha, 0.0));
    const bool dom = lt(pf->p, pg->p) || (leq(pf->p, pg->p) && leq(pf->alpha, pg->alpha));
    verdict.g_sublinear = sub ? TriState::True : TriState::False;
    verdict.f_dominated = dom ? TriState::True : TriState::False;
  } else {
    verdict.method = Method::NumericTail;
    // A bounded ratio is the condition; grows_without_bound answers the negation.
    const auto bounded = [](TriState unbounded) {
      switch (unbounded) {
        case TriState::True: return TriState::False;
        case TriState::False: return TriState::True;
        default: return TriState::Inconclusive;
      }
    };
    verdict.g_sublinear = bounded(detail::grows_without_bound(
        [&g](double s) { return g.log_at(s) - std::log(s); }));
    TriState dominated = TriState::True;
    for (const double a : {0.25, 1.0, 4.0, 16.0}) {
      const auto t = bounded(detail::grows_without_bound(
          [&f, &g, a](double s) { return f.log_at(a * s) - g.log_at(s); }));
      if (t == TriState::False) {
        dominated = TriState::False;
      } else if (t == TriState::Inconclusive && dominated == TriState::True) {
        dominated = TriState::Inconclusive;
      }
    }
    verdict.f_dominated = dominated;
  }
  if (verdict.g_sublinear == TriState::True) {
    verdict.result = Supplementary::GSublinear;
  } else if (verdict.f_dominated == TriState::True) {
    verdict.result = Supplementary::FDominatedByG;
  } else {
    verdict.result = Supplementary::Neither;
  }
  return verdict;
}

struct SuperlinearityVerdict {
  TriState result = TriState::Inconclusive;
  Method method = Method::SymbolicExponentRule;
  CriterionVerdict gko;
  bool consistent = true;
  std::string diagnostic;
};

/// g(m)/m -> inf? Cross-checked against gKO: a convergent \int ds/g forces
/// superlinearity (the converse fails, e.g. g = s (log s)^(1/2)).
inline SuperlinearityVerdict superlinearity_test(const Nonlinearity& g) {
  SuperlinearityVerdict verdict;
  if (const auto* pg = g.power_log_form()) {
    verdict.method = Method::SymbolicExponentRule;
    const bool super = pg->p > 1.0 + kExponentTie ||
                       (std::abs(pg->p - 1.0) <= kExponentTie && pg->alpha > kExponentTie);
    verdict.result = super ? TriState::True : TriState::False;
  } else {
    verdict.method = Method::NumericTail;
    verdict.result = detail::grows_without_bound(
        [&g](double s) { return g.log_at(s) - std::log(s); });
  }
  verdict.gko = classify_integral(IntegralKind::gKO, std::nullopt, g, 2);
  if (verdict.gko.status == Status::Converges && verdict.result == TriState::False) {
    verdict.consistent = false;
    verdict.diagnostic = "gKO converges but g(m)/m stays bounded";
  }
  return verdict;
}

}  // namespace solvlab
