#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "solvlab/criteria.hpp"
#include "solvlab/errors.hpp"
#include "solvlab/problem.hpp"
#include "solvlab/shoot.hpp"
#include "solvlab/supersol.hpp"
#include "solvlab/tail_fit.hpp"

namespace solvlab {

enum class Verdict { Existence, Nonexistence, Undetermined };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Existence: return "Existence";
    case Verdict::Nonexistence: return "Nonexistence";
    case Verdict::Undetermined: return "Undetermined";
  }
  return "?";
}

/// One (sign, f, g) triple the verdict logic runs on. Absent g is the
/// pure absorption equation, absent f the pure gradient equation.
struct Side {
  Sign sign = Sign::Plus;
  std::optional<Nonlinearity> f;
  std::optional<Nonlinearity> g;

  double operator()(double u, double p) const {
    const double fu = f ? (*f)(u) : 0.0;
    const double gp = g ? (*g)(p) : 0.0;
    return sign == Sign::Plus ? fu + gp : fu - gp;
  }

  std::string describe() const {
    std::string out = f ? f->describe() : std::string("0");
    out += sign == Sign::Plus ? " + " : " - ";
    out += g ? g->describe() : std::string("0");
    return out;
  }
};

/// A clause of the verdict logic whose hypotheses were verified.
struct FiredClause {
  std::string id;  // <equation>.<conclusion>.<hypothesis>
  Verdict conclusion = Verdict::Undetermined;
  std::vector<IntegralKind> criteria;  // verdicts live in Classification::criteria
  std::string route;
};

struct RunSummary {
  double u0 = 0.0;
  Outcome outcome = Outcome::Inconclusive;
  double r_end = 0.0;
  double R_estimate = std::numeric_limits<double>::quiet_NaN();
  BlowUpMode mode = BlowUpMode::NotBlowUp;
  std::string diagnostic;
};

struct CrossCheck {
  std::string method;    // "shooting" or "supersolution"
  std::string expected;  // consensus name, "verified", or "none"
  std::vector<RunSummary> runs;
  std::optional<Consensus> consensus;
  std::optional<SupersolutionReport> supersolution;
  std::optional<bool> agree;  // empty when nothing is expected
  std::string note;
};

struct Classification {
  Verdict verdict = Verdict::Undetermined;
  std::string equation;  // "plus", "minus", "absorption", "gradient", "general"
  std::vector<FiredClause> fired;
  std::vector<CriterionVerdict> criteria;
  std::optional<InteractionVerdict> interaction;
  std::optional<SupplementaryVerdict> supplementary;
  std::vector<std::string> unresolved;  // why the verdict is Undetermined
  std::optional<Side> deciding_side;    // triple whose hypotheses fired
  std::optional<CrossCheck> cross_check;

  const CriterionVerdict* criterion(IntegralKind kind) const {
    for (const auto& c : criteria) {
      if (c.kind == kind) return &c;
    }
    return nullptr;
  }
};

struct ClassifyOptions {
  double A0 = 4.0;
  double eps0 = 0.1;
  CriterionOptions criterion;
};

namespace detail {

inline std::string describe_status(const CriterionVerdict& v) {
  return std::string(to_string(v.kind)) + " " + std::string(to_string(v.status));
}

class ClauseBook {
 public:
  ClauseBook(Classification& out, const Side& side, int N, const ClassifyOptions& options)
      : out_(out), side_(side), N_(N), options_(options) {}

  // By value: later evaluations grow out_.criteria.
  CriterionVerdict criterion(IntegralKind kind) {
    if (const auto* known = out_.criterion(kind)) return *known;
    const bool with_f = kind != IntegralKind::gKO && kind != IntegralKind::UGrowth;
    out_.criteria.push_back(classify_integral(kind, with_f ? side_.f : std::nullopt, side_.g, N_,
                                              options_.criterion));
    return out_.criteria.back();
  }

  void fire(std::string id, Verdict conclusion, std::vector<IntegralKind> kinds,
            std::string route = {}) {
    out_.fired.push_back({std::move(id), conclusion, std::move(kinds), std::move(route)});
  }

  void unresolved(std::string reason) { out_.unresolved.push_back(std::move(reason)); }

  void inconclusive(std::initializer_list<IntegralKind> kinds) {
    for (const auto kind : kinds) {
      const auto& c = criterion(kind);
      if (c.status == Status::Inconclusive) {
        unresolved(describe_status(c) + (c.diagnostic.empty() ? "" : ": " + c.diagnostic));
      }
    }
  }

  Classification& out() { return out_; }
  const Side& side() const { return side_; }
  const ClassifyOptions& options() const { return options_; }

 private:
  Classification& out_;
  const Side& side_;
  int N_;
  const ClassifyOptions& options_;
};

inline void plus_nonexistence(ClauseBook& book, const std::string& eq) {
  for (const auto kind : {IntegralKind::KO, IntegralKind::gKO}) {
    if (book.criterion(kind).status == Status::Converges) {
      book.fire(eq + ".nonexistence." + (kind == IntegralKind::KO ? "ko" : "gko") + "-converges",
                Verdict::Nonexistence, {kind});
    }
  }
}

inline void plus_existence(ClauseBook& book, const std::string& eq) {
  const auto& ko = book.criterion(IntegralKind::KO);
  const auto& gko = book.criterion(IntegralKind::gKO);
  if (ko.status != Status::Diverges || gko.status != Status::Diverges) {
    if (ko.status != Status::Converges && gko.status != Status::Converges) {
      book.inconclusive({IntegralKind::KO, IntegralKind::gKO});
    }
    return;
  }
  const auto& f = *book.side().f;
  const auto& g = *book.side().g;
  auto& out = book.out();
  out.interaction = check_interaction(f, g, book.options().A0, book.options().eps0);
  out.supplementary = check_supplementary(f, g);
  const auto branch = out.interaction->branch;
  const auto kinds = std::vector<IntegralKind>{IntegralKind::KO, IntegralKind::gKO};
  bool routed = false;
  if (branch == InteractionBranch::LimsupBelow || branch == InteractionBranch::LiminfAbove) {
    book.fire(eq + ".existence.interaction", Verdict::Existence, kinds,
              "interaction " + std::string(to_string(branch)));
    routed = true;
  }
  if (out.supplementary->result != Supplementary::Neither) {
    book.fire(eq + ".existence.supplementary", Verdict::Existence, kinds,
              std::string(to_string(out.supplementary->result)));
    routed = true;
  }
  if (!routed) {
    book.unresolved("KO and gKO diverge but the interaction condition is " +
                    std::string(to_string(branch)) + " and no supplementary condition holds");
  }
}

inline void minus_nonexistence(ClauseBook& book, const std::string& eq) {
  if (book.criterion(IntegralKind::GammaInvF).status == Status::Converges) {
    book.fire(eq + ".nonexistence.gammainvf-converges", Verdict::Nonexistence,
              {IntegralKind::GammaInvF});
  }
}

inline void minus_existence(ClauseBook& book, const std::string& eq) {
  for (const auto kind : {IntegralKind::KO, IntegralKind::gInvF}) {
    if (book.criterion(kind).status == Status::Diverges) {
      book.fire(eq + ".existence." + (kind == IntegralKind::KO ? "ko" : "ginvf") + "-diverges",
                Verdict::Existence, {kind});
    }
  }
}

inline void minus_gap(ClauseBook& book) {
  const auto& gamma = book.criterion(IntegralKind::GammaInvF);
  const auto& ko = book.criterion(IntegralKind::KO);
  const auto& ginv = book.criterion(IntegralKind::gInvF);
  book.inconclusive({IntegralKind::GammaInvF, IntegralKind::KO, IntegralKind::gInvF});
  if (gamma.status == Status::Diverges && ko.status == Status::Converges &&
      ginv.status == Status::Converges) {
    book.unresolved(
        "GammaInvF diverges while KO and gInvF converge: neither the existence nor the "
        "nonexistence hypotheses hold");
  }
}

inline void settle(Classification& out) {
  const auto has = [&](Verdict v) {
    return std::any_of(out.fired.begin(), out.fired.end(),
                       [v](const FiredClause& c) { return c.conclusion == v; });
  };
  const bool exist = has(Verdict::Existence);
  const bool none = has(Verdict::Nonexistence);
  if (exist && none) {
    std::string ids;
    for (const auto& c : out.fired) ids += (ids.empty() ? "" : ", ") + c.id;
    throw ConsistencyError("both existence and nonexistence derived (" + ids + ")");
  }
  out.verdict = exist ? Verdict::Existence : none ? Verdict::Nonexistence : Verdict::Undetermined;
  if (out.verdict != Verdict::Undetermined) {
    out.unresolved.clear();
  } else if (out.unresolved.empty()) {
    out.unresolved.push_back("no clause fired");
  }
}

inline void require_side(const Side& side) {
  if (!side.f && !side.g) throw PreconditionError("at least one of f, g is required");
  if (side.sign == Sign::Minus && !side.f) {
    throw PreconditionError("the minus equation needs f: H(u, 0) = 0 otherwise");
  }
}

// Runs the verdict logic of one side. The sandwich reads nonexistence off
// the lower bound and existence off the upper bound, so either half can be
// switched off.
inline void evaluate(ClauseBook& book, const std::string& eq, bool nonexistence, bool existence) {
  const auto& side = book.side();
  if (!side.f || !side.g) {
    // Pure equation: Delta u = f(u) needs \int ds/sqrt(F) = inf,
    // Delta u = g(|grad u|) needs \int ds/g = inf.
    const auto kind = side.g ? IntegralKind::gKO : IntegralKind::KO;
    const std::string name = side.g ? "gko" : "ko";
    const auto& c = book.criterion(kind);
    if (c.status == Status::Converges && nonexistence) {
      book.fire(eq + ".nonexistence." + name + "-converges", Verdict::Nonexistence, {kind});
    } else if (c.status == Status::Diverges && existence) {
      book.fire(eq + ".existence." + name + "-diverges", Verdict::Existence, {kind});
    } else if (c.status == Status::Inconclusive) {
      book.inconclusive({kind});
    }
    return;
  }
  if (side.sign == Sign::Plus) {
    if (nonexistence) plus_nonexistence(book, eq);
    if (existence) {
      plus_existence(book, eq);
    } else if (book.out().fired.empty()) {
      book.inconclusive({IntegralKind::KO, IntegralKind::gKO});
    }
  } else {
    if (nonexistence) minus_nonexistence(book, eq);
    if (existence) minus_existence(book, eq);
    if (book.out().fired.empty()) minus_gap(book);
  }
}

inline std::string equation_name(const Side& side) {
  if (!side.g) return "absorption";
  if (!side.f) return "gradient";
  return side.sign == Sign::Plus ? "plus" : "minus";
}

inline Classification classify_side(const Side& side, int N, const ClassifyOptions& options) {
  require_side(side);
  if (N < 2) throw PreconditionError("N must be >= 2");
  Classification out;
  out.equation = equation_name(side);
  ClauseBook book(out, side, N, options);
  evaluate(book, out.equation, true, true);
  settle(out);
  if (out.verdict != Verdict::Undetermined) out.deciding_side = side;
  return out;
}

}  // namespace detail

/// Delta u = f(u) + g(|grad u|). Nonexistence if KO or gKO converges;
/// existence if both diverge and the interaction condition or one of the
/// supplementary conditions holds. Without g (or f) the pure equation's
/// single criterion decides.
inline Classification classify_plus(const std::optional<Nonlinearity>& f,
                                    const std::optional<Nonlinearity>& g, int N,
                                    const ClassifyOptions& options = {}) {
  return detail::classify_side(Side{Sign::Plus, f, g}, N, options);
}

/// Delta u = f(u) - g(|grad u|). Nonexistence if GammaInvF converges;
/// existence if KO or gInvF diverges.
inline Classification classify_minus(const std::optional<Nonlinearity>& f,
                                     const std::optional<Nonlinearity>& g, int N,
                                     const ClassifyOptions& options = {}) {
  return detail::classify_side(Side{Sign::Minus, f, g}, N, options);
}

inline Classification classify(const ProblemSpec& spec, const ClassifyOptions& options = {});

// ---------------------------------------------------------------------------
// Pucci operator with a general right-hand side H(u, |grad u|).

/// lower(u, p) <= H(u, p) <= upper(u, p); either bound may be absent.
struct GeneralSandwich {
  std::optional<Side> lower;
  std::optional<Side> upper;
  std::function<double(double, double)> H;
  std::string label = "H";
};

namespace detail {

inline bool leq_with_slack(double a, double b) {
  return a <= b + 1e-12 * (std::abs(a) + std::abs(b));
}

}  // namespace detail

/// Checks the sandwich on a geometric sample grid (u, p in [1e-3, 1e3],
/// plus p = 0) and H(u, 0) > 0; throws PreconditionError on violation.
inline void validate(const GeneralSandwich& s) {
  if (!s.H) throw PreconditionError(s.label + ": H has no callable");
  if (!s.lower && !s.upper) throw PreconditionError(s.label + ": sandwich needs a lower or upper bound");
  if (s.lower) detail::require_side(*s.lower);
  if (s.upper) detail::require_side(*s.upper);
  auto grid = geometric_grid(1e-3, 1e3, 16);
  auto p_grid = grid;
  p_grid.insert(p_grid.begin(), 0.0);
  for (const double u : grid) {
    if (!(s.H(u, 0.0) > 0.0)) {
      throw PreconditionError(s.label + ": H(u, 0) > 0 fails at u = " + std::to_string(u));
    }
    for (const double p : p_grid) {
      const double h = s.H(u, p);
      if (s.lower && !detail::leq_with_slack((*s.lower)(u, p), h)) {
        throw PreconditionError(s.label + ": lower bound exceeds H at (u, p) = (" + std::to_string(u) +
                                ", " + std::to_string(p) + ")");
      }
      if (s.upper && !detail::leq_with_slack(h, (*s.upper)(u, p))) {
        throw PreconditionError(s.label + ": H exceeds upper bound at (u, p) = (" + std::to_string(u) +
                                ", " + std::to_string(p) + ")");
      }
    }
  }
  if (s.lower && s.upper && s.lower->sign == s.upper->sign) {
    const auto below = [&](const std::optional<Nonlinearity>& a, const std::optional<Nonlinearity>& b,
                           const char* name) {
      if (!a) return;
      for (const double t : grid) {
        if (!b || !detail::leq_with_slack((*a)(t), (*b)(t))) {
          throw PreconditionError(s.label + ": " + name + "1 <= " + name + "2 fails at " + std::to_string(t));
        }
      }
    };
    below(s.lower->f, s.upper->f, "f");
    below(s.lower->g, s.upper->g, "g");
  }
}

/// Pucci operator M+(D^2 u) = H(u, |grad u|) with lambda in (0, 1].
/// Nonexistence when the lower bound satisfies the nonexistence hypotheses
/// of its sign; existence when the upper bound satisfies the existence
/// hypotheses of its sign.
inline Classification classify_general(const GeneralSandwich& sandwich, int N, double lambda,
                                       const ClassifyOptions& options = {}) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw PreconditionError("lambda must lie in (0, 1]");
  if (N < 2) throw PreconditionError("N must be >= 2");
  validate(sandwich);

  Classification out;
  out.equation = "general";
  Classification lower;
  Classification upper;
  if (sandwich.lower) {
    detail::ClauseBook book(lower, *sandwich.lower, N, options);
    detail::evaluate(book, "general.lower." + detail::equation_name(*sandwich.lower), true, false);
  }
  if (sandwich.upper) {
    detail::ClauseBook book(upper, *sandwich.upper, N, options);
    detail::evaluate(book, "general.upper." + detail::equation_name(*sandwich.upper), false, true);
  }
  for (auto* part : {&lower, &upper}) {
    for (auto& c : part->fired) out.fired.push_back(std::move(c));
    for (auto& c : part->criteria) out.criteria.push_back(std::move(c));
    for (auto& r : part->unresolved) out.unresolved.push_back(std::move(r));
  }
  out.interaction = std::move(upper.interaction);
  out.supplementary = std::move(upper.supplementary);
  detail::settle(out);
  if (out.verdict == Verdict::Nonexistence) out.deciding_side = sandwich.lower;
  if (out.verdict == Verdict::Existence) out.deciding_side = sandwich.upper;
  return out;
}

/// Dispatches on the operator: the Laplacian and Pucci cases with
/// H = f(u) +- g(p) use the tight sandwich; GeneralH needs classify_general.
inline Classification classify(const ProblemSpec& spec, const ClassifyOptions& options) {
  if (std::holds_alternative<GeneralH>(spec.op)) {
    throw PreconditionError("a general H needs explicit bounds; use classify_general");
  }
  const Side side{spec.sign, spec.f, spec.g};
  if (std::holds_alternative<Laplacian>(spec.op)) return detail::classify_side(side, spec.N, options);
  GeneralSandwich tight{side, side, side, describe(spec.op)};
  return classify_general(tight, spec.N, operator_lambda(spec.op), options);
}

// ---------------------------------------------------------------------------
// Cross-validation by shooting or by the explosive supersolution.

struct CrossValidateOptions {
  std::vector<double> u0_set{0.5, 1.0, 2.0, 10.0};
  double r_max = 20.0;
  TolerancedPolicy policy{};
  std::size_t supersolution_grid = 512;
};

namespace detail {

inline RunSummary summarize(const Trajectory& t) {
  RunSummary s;
  s.u0 = t.problem.u0;
  s.outcome = t.outcome;
  s.r_end = t.last().r;
  s.R_estimate = t.R_estimate;
  s.mode = t.mode;
  s.diagnostic = t.diagnostic;
  return s;
}

inline void shoot_into(CrossCheck& check, const CauchyProblem& problem, const CrossValidateOptions& o) {
  const auto sampled = sample_initial_values(problem, o.u0_set, o.r_max, o.policy);
  check.method = "shooting";
  check.consensus = sampled.consensus;
  for (const auto& run : sampled.runs) check.runs.push_back(summarize(run));
}

}  // namespace detail

/// Existence expects every shot to stay global; plus-type nonexistence
/// expects every shot to blow up. Minus-type nonexistence is an obstruction
/// by comparison, not by Cauchy blow-up, so it is checked by building and
/// verifying the explosive supersolution. Undetermined verdicts get the
/// shooting outcomes as exploratory evidence only.
inline Classification cross_validate(Classification classification, const CauchyProblem& problem,
                                     const CrossValidateOptions& options = {}) {
  problem.validate();
  CrossCheck check;
  const auto& side = classification.deciding_side;
  const bool gradient_only = side && !side->f;
  const bool minus_obstruction = classification.verdict == Verdict::Nonexistence && side &&
                                 side->sign == Sign::Minus && side->g;

  if (minus_obstruction) {
    check.method = "supersolution";
    check.expected = "verified";
    try {
      const auto profile = build_profile(*side->f, side->g, problem.spec.N);
      check.supersolution = verify_supersolution(profile, options.supersolution_grid);
      check.agree = check.supersolution->all_passed;
      check.note = "shooting the minus equation can stay global here; the obstruction is comparison "
                   "with an explosive supersolution";
    } catch (const PreconditionError& e) {
      check.agree = false;
      check.note = e.what();
    }
  } else if (gradient_only) {
    check.method = "shooting";
    check.expected = "none";
    check.note = "u'(0) = 0 and g(0) = 0 make the Cauchy solution the constant u0; the radial "
                 "shot carries no information about the pure gradient equation";
  } else {
    detail::shoot_into(check, problem, options);
    if (classification.verdict == Verdict::Existence) {
      check.expected = to_string(Consensus::AllGlobal);
    } else if (classification.verdict == Verdict::Nonexistence) {
      check.expected = to_string(Consensus::AllBlowUp);
    } else {
      check.expected = "none";
      check.note = "verdict undetermined; shooting outcomes are exploratory evidence only";
    }
    if (check.expected != "none") check.agree = to_string(*check.consensus) == check.expected;
  }
  classification.cross_check = std::move(check);
  return classification;
}

}  // namespace solvlab
