#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "solvlab/errors.hpp"
#include "solvlab/nonlin.hpp"

namespace solvlab {

enum class Sign { Plus, Minus };

inline std::string to_string(Sign s) { return s == Sign::Plus ? "plus" : "minus"; }

struct Laplacian {};

/// Maximal Pucci operator with ellipticity constants lambda and 1.
struct Pucci {
  double lambda = 1.0;
};

/// M+(D^2 u) = H(u, |Du|) with a user right-hand side.
struct GeneralH {
  std::function<double(double, double)> H;
  double lambda = 1.0;
  std::string label = "H";
};

using Operator = std::variant<Laplacian, Pucci, GeneralH>;

inline double operator_lambda(const Operator& op) {
  if (const auto* p = std::get_if<Pucci>(&op)) return p->lambda;
  if (const auto* h = std::get_if<GeneralH>(&op)) return h->lambda;
  return 1.0;
}

inline std::string describe(const Operator& op) {
  if (std::holds_alternative<Laplacian>(op)) return "laplacian";
  if (const auto* p = std::get_if<Pucci>(&op)) return "pucci(lambda=" + std::to_string(p->lambda) + ")";
  return "general(" + std::get<GeneralH>(op).label + ")";
}

/// The equation Delta u = f(u) +- g(|Du|) (or its Pucci / general-H form)
/// without an initial value. An absent g is the pure Keller-Osserman
/// equation, an absent f the pure gradient equation.
struct ProblemSpec {
  Sign sign = Sign::Plus;
  std::optional<Nonlinearity> f;
  std::optional<Nonlinearity> g;
  int N = 3;
  Operator op = Laplacian{};
};

/// Radial Cauchy problem u(0) = u0 > 0, u'(0) = 0.
struct CauchyProblem {
  ProblemSpec spec;
  double u0 = 1.0;

  void validate() const {
    if (!(u0 > 0.0) || !std::isfinite(u0)) throw PreconditionError("u0 must be positive and finite");
    if (spec.N < 2) throw PreconditionError("dimension N must be >= 2");
    const double lambda = operator_lambda(spec.op);
    if (!(lambda > 0.0 && lambda <= 1.0)) throw PreconditionError("lambda must lie in (0, 1]");
    if (const auto* h = std::get_if<GeneralH>(&spec.op)) {
      if (!h->H) throw PreconditionError("general operator has no H");
      if (!(h->H(u0, 0.0) > 0.0)) throw PreconditionError("H(u0, 0) must be positive");
    } else if (!spec.f && !spec.g) {
      throw PreconditionError("at least one of f, g is required");
    }
  }

  /// Right-hand side H(u, p) of the equation.
  double H(double u, double p) const {
    if (const auto* h = std::get_if<GeneralH>(&spec.op)) return h->H(u, p);
    double value = spec.f ? (*spec.f)(u) : 0.0;
    if (spec.g) value += spec.sign == Sign::Plus ? (*spec.g)(p) : -(*spec.g)(p);
    return value;
  }
};

}  // namespace solvlab
