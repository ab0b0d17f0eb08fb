#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "solvlab/criteria.hpp"
#include "solvlab/dopri5.hpp"
#include "solvlab/errors.hpp"
#include "solvlab/problem.hpp"
#include "solvlab/tail_fit.hpp"

namespace solvlab {

enum class Outcome { Global, BlowUp, Inconclusive };
enum class BlowUpMode { ValueAndGradient, GradientOnly, NotBlowUp };

inline std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Global: return "Global";
    case Outcome::BlowUp: return "BlowUp";
    case Outcome::Inconclusive: return "Inconclusive";
  }
  return "?";
}

inline std::string to_string(BlowUpMode m) {
  switch (m) {
    case BlowUpMode::ValueAndGradient: return "ValueAndGradient";
    case BlowUpMode::GradientOnly: return "GradientOnly";
    case BlowUpMode::NotBlowUp: return "NotBlowUp";
  }
  return "?";
}

struct TolerancedPolicy {
  double rtol = 1e-9;
  double atol = 1e-12;
  double r_start = 1e-6;
  double blowup_threshold = 1e10;
  double step_collapse = 1e-14;     // relative to r
  double gradient_only_ceiling = 1e6;
  double switch_up = 1e3;           // u'' max(r,1) / u' above which w = ln u' drives
  double switch_down = 10.0;
  double tail_probe_span = 20.0;    // extra span in w after blow-up
  double tail_decay_margin = 0.05;
  std::size_t output_points = 1024;
  std::size_t max_steps = 400000;

  void validate() const {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw PreconditionError("policy tolerances must be positive");
    if (!(r_start > 0.0)) throw PreconditionError("r_start must be positive");
    if (output_points < 2) throw PreconditionError("output grid needs at least 2 points");
  }

  TolerancedPolicy scaled(double factor) const {
    if (!(factor > 0.0)) throw PreconditionError("tolerance scale must be positive");
    TolerancedPolicy out = *this;
    out.rtol *= factor;
    out.atol *= factor;
    return out;
  }
};

/// Accepted integrator node; ddu is the equation's u'' at the node.
struct TrajectoryNode {
  double r = 0.0;
  double u = 0.0;
  double du = 0.0;
  double ddu = 0.0;
};

/// Output-grid row with the A and W diagnostics.
struct TrajectorySample {
  double r = 0.0;
  double u = 0.0;
  double du = 0.0;
  double A = 0.0;
  double W = 0.0;
};

struct Trajectory {
  CauchyProblem problem;
  double r_max = 0.0;
  std::vector<TrajectoryNode> nodes;
  std::vector<TrajectorySample> samples;
  Outcome outcome = Outcome::Inconclusive;
  double R_estimate = std::numeric_limits<double>::quiet_NaN();
  double R_error = std::numeric_limits<double>::quiet_NaN();
  BlowUpMode mode = BlowUpMode::NotBlowUp;
  double tail_decay = std::numeric_limits<double>::quiet_NaN();
  double u_at_gradient_crossing = std::numeric_limits<double>::quiet_NaN();
  double error_estimate = 0.0;  // summed embedded error of u
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t log_gradient_steps = 0;
  std::string diagnostic;

  const TrajectoryNode& last() const { return nodes.back(); }
};

namespace detail {

struct RadialRhs {
  const CauchyProblem& problem;
  double lambda;
  int N;

  // u'' = M(H(u, |u'|) - (N-1) m(u') / r); the Laplacian is lambda = 1.
  double accel(double r, double u, double v) const {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    if (!(u >= 0.0) || !std::isfinite(u) || !std::isfinite(v)) return nan;
    const double H = problem.H(u, std::abs(v));
    const double mv = v >= 0.0 ? v : lambda * v;
    const double arg = H - (N - 1) * mv / r;
    return arg >= 0.0 ? arg : arg / lambda;
  }
};

template <class T>
T hermite_lerp(const TrajectoryNode& a, const TrajectoryNode& b, double r) {
  const double h = b.r - a.r;
  if (!(h > 0.0)) return T{r, b.u, b.du};
  const double t = (r - a.r) / h;
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
  const double q0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
  const double q1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
  const double q2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
  const double q3 = 0.5 * t3 - t4 + 0.5 * t5;
  const double q4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
  const double q5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
  const double u = a.u * q0 + h * a.du * q1 + h * h * a.ddu * q2 + h * h * b.ddu * q3 +
                   h * b.du * q4 + b.u * q5;
  const double c00 = 2.0 * t3 - 3.0 * t2 + 1.0, c10 = t3 - 2.0 * t2 + t;
  const double c01 = -2.0 * t3 + 3.0 * t2, c11 = t3 - t2;
  const double du = a.du * c00 + h * a.ddu * c10 + b.du * c01 + h * b.ddu * c11;
  return T{r, u, du};
}

}  // namespace detail

/// (r, u, u') at radius r by Hermite interpolation between accepted nodes:
/// quintic in u (uses u, u', u''), cubic in u'.
inline TrajectorySample interpolate(const Trajectory& traj, double r) {
  const auto& nodes = traj.nodes;
  if (nodes.empty()) throw PreconditionError("empty trajectory");
  if (r <= nodes.front().r) return {nodes.front().r, nodes.front().u, nodes.front().du, 0, 0};
  if (r >= nodes.back().r) return {nodes.back().r, nodes.back().u, nodes.back().du, 0, 0};
  auto it = std::upper_bound(nodes.begin(), nodes.end(), r,
                             [](double x, const TrajectoryNode& n) { return x < n.r; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  return detail::hermite_lerp<TrajectorySample>(a, b, r);
}

/// Fills A(r) = r^(N-1) u' / sqrt(F(u)) and the sign-aware
/// W(r) = 1 +- g(u')/f(u) - u'^2 / (2 F(u)); NaN where F(u) = 0 or f is absent.
inline void fill_diagnostics(const CauchyProblem& problem, std::vector<TrajectorySample>& rows) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  const auto& spec = problem.spec;
  std::optional<Primitive> F;
  if (spec.f) F.emplace(*spec.f);
  const double sign = spec.sign == Sign::Plus ? 1.0 : -1.0;
  for (auto& row : rows) {
    if (!F || !std::isfinite(row.u)) {
      row.A = row.W = nan;
      continue;
    }
    const double Fu = (*F)(row.u);
    if (!(Fu > 0.0)) {
      row.A = row.W = nan;
      continue;
    }
    row.A = std::pow(row.r, spec.N - 1) * row.du / std::sqrt(Fu);
    const double fu = (*spec.f)(row.u);
    const double gv = spec.g ? (*spec.g)(std::abs(row.du)) : 0.0;
    row.W = 1.0 + sign * gv / fu - row.du * row.du / (2.0 * Fu);
  }
}

namespace detail {

// Continues a blown-up trajectory in the log-gradient variable and returns
// kappa = -d ln(du/dw) / dw over the probe. kappa > 0 means u converges.
inline double tail_decay(const RadialRhs& rhs, double r, double u, double v,
                         const TolerancedPolicy& policy) {
  using V2 = Vec<2>;
  std::vector<double> ws, logs;
  double w = std::log(v);
  const double w_end = w + policy.tail_probe_span;
  auto f = [&](double wt, const V2& y) -> V2 {
    const double vt = std::exp(wt);
    const double a = rhs.accel(y[0], y[1], vt);
    if (!(a > 0.0)) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
    return {vt / a, vt * vt / a};
  };
  V2 y{r, u};
  V2 k = f(w, y);
  double h = 0.05;
  std::size_t guard = 0;
  while (w < w_end && guard++ < 20000) {
    if (!std::isfinite(k[0]) || !std::isfinite(k[1]) || !(k[1] > 0.0)) break;
    if (ws.empty() || ws.back() != w) {
      ws.push_back(w);
      logs.push_back(std::log(k[1]));
    }
    h = std::min(h, w_end - w);
    const auto step = dopri5_step<2>(f, w, y, k, h);
    if (!step.finite) {
      h *= 0.2;
      if (h < 1e-10) break;
      continue;
    }
    const double err = error_norm<2>(step.error, y, step.y, policy.rtol, policy.atol);
    if (err > 1.0) {
      h *= step_factor(err);
      if (h < 1e-10) break;
      continue;
    }
    w += h;
    y = step.y;
    k = step.dy;
    h *= step_factor(err);
  }
  if (ws.size() < 4) return std::numeric_limits<double>::quiet_NaN();
  // Late half of the probe.
  const std::size_t start = ws.size() / 2;
  const auto fit = fit_line(std::span(ws).subspan(start), std::span(logs).subspan(start));
  return -fit.slope;
}

}  // namespace detail

/// Shoots the radial Cauchy problem from r_start with the second-order
/// Taylor seed and an adaptive Dormand-Prince pair.
///
/// While u'' max(r,1)/u' is large the independent variable becomes
/// w = ln u', so gradient blow-up stays resolvable in double precision.
/// BlowUp needs a threshold crossing of u or u' together with a collapse of
/// the accepted radial step below step_collapse * r.
inline Trajectory integrate(const CauchyProblem& problem, double r_max,
                            const TolerancedPolicy& policy = {}) {
  problem.validate();
  policy.validate();
  if (!(r_max > policy.r_start)) throw PreconditionError("r_max must exceed r_start");

  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  using V2 = Vec<2>;
  const detail::RadialRhs rhs{problem, operator_lambda(problem.spec.op), problem.spec.N};

  Trajectory traj;
  traj.problem = problem;
  traj.r_max = r_max;

  const double c = problem.H(problem.u0, 0.0) / (2.0 * problem.spec.N);
  double r = policy.r_start;
  double u = problem.u0 + c * r * r;
  double v = 2.0 * c * r;
  double a = rhs.accel(r, u, v);
  traj.nodes.push_back({0.0, problem.u0, 0.0, 2.0 * c});
  traj.nodes.push_back({r, u, v, a});
  if (c == 0.0) traj.diagnostic = "H(u0, 0) = 0: the constant solution is returned";

  const auto radial = [&](double rt, const V2& y) -> V2 { return {y[1], rhs.accel(rt, y[0], y[1])}; };
  const auto logarithmic = [&](double wt, const V2& y) -> V2 {
    const double vt = std::exp(wt);
    const double at = rhs.accel(y[0], y[1], vt);
    if (!(at > 0.0)) return {nan, nan};
    return {vt / at, vt * vt / at};
  };

  bool log_mode = false;
  bool finishing = false;  // last radial approach to r_max; no switching
  bool saw_nonfinite = false;
  double h_r = std::min(1e-3, 0.5 * r_max);
  double h_w = 0.05;
  const auto crossed = [&] { return u > policy.blowup_threshold || v > policy.blowup_threshold; };

  const auto conclude_collapse = [&](const std::string& why) {
    if (crossed()) {
      traj.outcome = Outcome::BlowUp;
      traj.R_estimate = r;
      const auto& n = traj.nodes;
      traj.R_error = n[n.size() - 1].r - n[n.size() - 2].r;
      return;
    }
    if (saw_nonfinite) {
      throw IntegrationError("non-finite evaluation during " + why, r, u, v);
    }
    traj.outcome = Outcome::Inconclusive;
    traj.diagnostic = "step collapse below threshold during " + why;
  };

  bool done = false;
  while (!done) {
    if (traj.accepted >= policy.max_steps) {
      traj.outcome = Outcome::Inconclusive;
      traj.diagnostic = "step budget exhausted at r = " + std::to_string(r);
      break;
    }
    const double r_old = r;
    if (!log_mode) {
      const double remaining = r_max - r;
      const bool last = h_r >= remaining;
      const double h = last ? remaining : h_r;
      const V2 y{u, v};
      const auto step = dopri5_step<2>(radial, r, y, V2{v, a}, h);
      double err = step.finite ? error_norm<2>(step.error, y, step.y, policy.rtol, policy.atol)
                               : std::numeric_limits<double>::infinity();
      if (!step.finite) saw_nonfinite = true;
      if (!(err <= 1.0)) {
        ++traj.rejected;
        h_r = h * (step.finite ? step_factor(err) : 0.2);
        if (h_r < policy.step_collapse * r) {
          conclude_collapse("radial stepping");
          done = true;
        }
        continue;
      }
      r = last ? r_max : r + h;
      u = step.y[0];
      v = step.y[1];
      a = step.dy[1];
      traj.error_estimate += std::abs(step.error[0]);
      h_r = h * step_factor(err);
      if (last) {
        traj.nodes.push_back({r, u, v, a});
        ++traj.accepted;
        traj.outcome = Outcome::Global;
        break;
      }
    } else {
      const double w = std::log(v);
      const V2 y{r, u};
      const auto k1 = logarithmic(w, y);
      const auto step = dopri5_step<2>(logarithmic, w, y, k1, h_w);
      double err = step.finite ? error_norm<2>(step.error, y, step.y, policy.rtol, policy.atol)
                               : std::numeric_limits<double>::infinity();
      if (!step.finite) saw_nonfinite = true;
      if (!(err <= 1.0) || step.y[0] < r) {
        ++traj.rejected;
        h_w *= step.finite ? step_factor(err) : 0.2;
        if (h_w < 1e-12) {
          conclude_collapse("log-gradient stepping");
          done = true;
        }
        continue;
      }
      if (step.y[0] > r_max) {
        // Hand the approach to r_max back to radial stepping.
        log_mode = false;
        finishing = true;
        h_r = r_max - r;
        continue;
      }
      traj.error_estimate += std::abs(step.error[1]);
      r = step.y[0];
      u = step.y[1];
      v = std::exp(w + h_w);
      a = rhs.accel(r, u, v);
      h_w *= step_factor(err);
      ++traj.log_gradient_steps;
    }
    ++traj.accepted;
    traj.nodes.push_back({r, u, v, a});
    if (v > policy.blowup_threshold && std::isnan(traj.u_at_gradient_crossing)) {
      traj.u_at_gradient_crossing = u;
    }
    if (crossed() && r - r_old < policy.step_collapse * r) {
      traj.outcome = Outcome::BlowUp;
      traj.R_estimate = r;
      traj.R_error = r - r_old;
      break;
    }
    if (!std::isfinite(a)) {
      if (crossed()) {
        traj.outcome = Outcome::BlowUp;
        traj.R_estimate = r;
        traj.R_error = r - r_old;
        break;
      }
      throw IntegrationError("non-finite u'' at accepted node", r, u, v);
    }
    const double ratio = a * std::max(r, 1.0) / v;
    if (!log_mode && !finishing && v >= 1.0 && ratio > policy.switch_up) {
      log_mode = true;
      h_w = 0.05;
    } else if (log_mode && ratio < policy.switch_down) {
      log_mode = false;
      h_r = std::min(0.1 * v / a, r_max - r);
    }
  }

  if (traj.outcome == Outcome::BlowUp) {
    const auto& end = traj.nodes.back();
    traj.tail_decay = detail::tail_decay(rhs, end.r, end.u, end.du, policy);
    const bool bounded_u = end.u < policy.gradient_only_ceiling;
    if (std::isfinite(traj.tail_decay)) {
      traj.mode = traj.tail_decay > policy.tail_decay_margin && bounded_u
                      ? BlowUpMode::GradientOnly
                      : BlowUpMode::ValueAndGradient;
    } else {
      traj.mode = bounded_u && end.du > policy.blowup_threshold ? BlowUpMode::GradientOnly
                                                                 : BlowUpMode::ValueAndGradient;
    }
  }

  const double r_end = traj.outcome == Outcome::Global ? r_max : traj.nodes.back().r;
  traj.samples.reserve(policy.output_points);
  for (std::size_t i = 0; i < policy.output_points; ++i) {
    const double ri = r_end * static_cast<double>(i) / static_cast<double>(policy.output_points - 1);
    traj.samples.push_back(interpolate(traj, i + 1 == policy.output_points ? r_end : ri));
  }
  fill_diagnostics(problem, traj.samples);
  return traj;
}

struct BlowUpModeReport {
  BlowUpMode observed = BlowUpMode::NotBlowUp;
  std::optional<BlowUpMode> predicted;
  std::optional<CriterionVerdict> ugrowth;
  bool agrees = true;
  std::string diagnostic;
};

/// Observed blow-up mode, cross-checked against \int^inf s/g(s) ds: for the
/// plus sign u stays bounded exactly when that integral converges; for the
/// minus sign (and without a gradient term) u always blows up.
inline BlowUpModeReport blowup_mode(const Trajectory& traj, const std::optional<Nonlinearity>& g) {
  BlowUpModeReport report;
  if (traj.outcome != Outcome::BlowUp) {
    report.diagnostic = "trajectory did not blow up";
    return report;
  }
  report.observed = traj.mode;
  if (!g || traj.problem.spec.sign == Sign::Minus) {
    report.predicted = BlowUpMode::ValueAndGradient;
  } else {
    report.ugrowth = classify_integral(IntegralKind::UGrowth, std::nullopt, g, traj.problem.spec.N);
    if (report.ugrowth->status == Status::Converges) report.predicted = BlowUpMode::GradientOnly;
    if (report.ugrowth->status == Status::Diverges) report.predicted = BlowUpMode::ValueAndGradient;
  }
  if (report.predicted) {
    report.agrees = *report.predicted == report.observed;
    if (!report.agrees) {
      report.diagnostic = "observed " + to_string(report.observed) + " but the growth criterion predicts " +
                          to_string(*report.predicted);
    }
  } else {
    report.diagnostic = "growth criterion inconclusive; no prediction";
  }
  return report;
}

enum class Consensus { AllGlobal, AllBlowUp, Mixed };

inline std::string to_string(Consensus c) {
  switch (c) {
    case Consensus::AllGlobal: return "AllGlobal";
    case Consensus::AllBlowUp: return "AllBlowUp";
    case Consensus::Mixed: return "Mixed";
  }
  return "?";
}

struct SampledOutcomes {
  std::vector<double> u0;
  std::vector<Trajectory> runs;
  Consensus consensus = Consensus::Mixed;
};

/// Shoots every u0 in parallel; results keep the order of u0_set.
inline SampledOutcomes sample_initial_values(const CauchyProblem& problem,
                                             const std::vector<double>& u0_set, double r_max,
                                             const TolerancedPolicy& policy = {}) {
  if (u0_set.empty()) throw PreconditionError("u0 set is empty");
  std::vector<std::future<Trajectory>> futures;
  futures.reserve(u0_set.size());
  for (const double u0 : u0_set) {
    CauchyProblem instance = problem;
    instance.u0 = u0;
    futures.push_back(std::async(std::launch::async, [instance, r_max, policy] {
      return integrate(instance, r_max, policy);
    }));
  }
  SampledOutcomes out;
  out.u0 = u0_set;
  for (auto& f : futures) out.runs.push_back(f.get());
  const auto all = [&](Outcome o) {
    return std::all_of(out.runs.begin(), out.runs.end(), [o](const Trajectory& t) { return t.outcome == o; });
  };
  out.consensus = all(Outcome::Global) ? Consensus::AllGlobal
                  : all(Outcome::BlowUp) ? Consensus::AllBlowUp
                                         : Consensus::Mixed;
  return out;
}

struct InvariantReport {
  double min_du = std::numeric_limits<double>::infinity();
  double convexity_violation = 0.0;  // max of -u'' beyond slack
  double bound_violation = 0.0;      // max of u - u0 - r u' beyond slack
  double minus_balance_violation = 0.0;  // max of g(u') - f(u) beyond slack
  double minus_energy_violation = 0.0;   // max of u' - sqrt(2 F(u)) beyond slack
  bool ok = true;
};

/// Runtime form of the monotonicity/convexity properties of radial
/// solutions, checked at every accepted node with r > 0.
inline InvariantReport check_invariants(const Trajectory& traj, double slack = 1e-8) {
  InvariantReport report;
  const auto& problem = traj.problem;
  const bool minus = problem.spec.sign == Sign::Minus && problem.spec.f && problem.spec.g &&
                     !std::holds_alternative<GeneralH>(problem.spec.op);
  std::optional<Primitive> F;
  if (minus) F.emplace(*problem.spec.f);
  for (const auto& n : traj.nodes) {
    if (n.r == 0.0) continue;
    report.min_du = std::min(report.min_du, n.du);
    report.convexity_violation =
        std::max(report.convexity_violation, -n.ddu - slack * (1.0 + std::abs(n.ddu)));
    report.bound_violation =
        std::max(report.bound_violation, n.u - problem.u0 - n.r * n.du - slack * std::max(1.0, n.u));
    if (minus) {
      const double fu = (*problem.spec.f)(n.u);
      const double gv = (*problem.spec.g)(n.du);
      report.minus_balance_violation =
          std::max(report.minus_balance_violation, gv - fu - slack * std::max(1.0, fu));
      const double cap = std::sqrt(2.0 * (*F)(n.u));
      report.minus_energy_violation =
          std::max(report.minus_energy_violation, n.du - cap - slack * std::max(1.0, cap));
    }
  }
  report.ok = report.min_du > 0.0 && report.convexity_violation <= 0.0 &&
              report.bound_violation <= 0.0 && report.minus_balance_violation <= 0.0 &&
              report.minus_energy_violation <= 0.0;
  return report;
}

}  // namespace solvlab
