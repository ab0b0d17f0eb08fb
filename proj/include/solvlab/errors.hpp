#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace solvlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Argument outside the evaluation domain (e.g. s < 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A nonlinearity failed the admissibility screen at construction.
class SpecRejected : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double achieved, double requested)
      : Error(what + " (achieved error " + format(achieved) + ", requested " +
              format(requested) + ")"),
        achieved_(achieved),
        requested_(requested) {}

  double achieved() const noexcept { return achieved_; }
  double requested() const noexcept { return requested_; }

 private:
  static std::string format(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
  }
  double achieved_;
  double requested_;
};

/// Monotone inversion could not bracket the target value.
class BracketError : public Error {
 public:
  using Error::Error;
};

/// Non-finite evaluation while integrating; carries the last good state.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double r, double u, double du)
      : Error(what + " at r=" + std::to_string(r) + " (u=" +
              std::to_string(u) + ", u'=" + std::to_string(du) + ")"),
        r_(r),
        u_(u),
        du_(du) {}

  double r() const noexcept { return r_; }
  double u() const noexcept { return u_; }
  double du() const noexcept { return du_; }

 private:
  double r_;
  double u_;
  double du_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Clause evaluation derived both existence and nonexistence.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace solvlab
