#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <thread>
#include <vector>

#include "solvlab/nonlin.hpp"

using namespace solvlab;
using Catch::Approx;

namespace {

// Composite Simpson on a uniform grid; independent of the Gauss-Kronrod path.
template <class Fn>
double simpson(Fn&& fn, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double sum = fn(a) + fn(b);
  for (int i = 1; i < panels; ++i) sum += fn(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("eval of the PowerLog grammar", "[nonlin]") {
  const auto identity = Nonlinearity::power_log(1.0, 0.0);
  CHECK(identity(3.0) == 3.0);

  const auto h = Nonlinearity::power_log(2.0, 1.0);
  CHECK(h(0.0) == 0.0);
  CHECK(h(2.0) == Approx(4.0 * std::log(std::numbers::e + 2.0)).epsilon(1e-15));
  CHECK(h.growth().exactness == Exactness::Symbolic);
  CHECK(h.growth().lead_exponent == 2.0);
  CHECK(h.growth().log_exponent == 1.0);
}

TEST_CASE("construction rejects inadmissible specs", "[nonlin]") {
  CHECK_THROWS_AS(Nonlinearity::power_log(0.0, 0.0), SpecRejected);
  CHECK_THROWS_AS(Nonlinearity::power_log(-1.0, 0.0), SpecRejected);
  // s^0.1 (log(e+s))^-5 turns over: the bracket p(e+s)log(e+s) + alpha s
  // goes negative.
  CHECK_THROWS_AS(Nonlinearity::power_log(0.1, -5.0), SpecRejected);
  // Negative alpha that keeps monotonicity is accepted.
  CHECK_NOTHROW(Nonlinearity::power_log(1.0, -1.5));

  CHECK_THROWS_AS(Nonlinearity::custom([](double s) { return s + 1.0; }), SpecRejected);
  CHECK_THROWS_AS(Nonlinearity::custom([](double s) { return std::sin(s); }), SpecRejected);
  CHECK_THROWS_AS(Nonlinearity::custom([](double s) { return s < 10.0 ? s : 10.0; }),
                  SpecRejected);
}

TEST_CASE("eval rejects negative arguments", "[nonlin]") {
  const auto h = Nonlinearity::power_log(1.0);
  CHECK_THROWS_AS(h(-1e-3), DomainError);
}

TEST_CASE("PowerLog monotonicity screen agrees with brute force", "[nonlin]") {
  // For a handful of (p, alpha) pairs, sample h on a dense grid and compare
  // with the closed-form accept/reject decision.
  const std::vector<std::pair<double, double>> cases{
      {0.1, -0.1}, {0.1, -0.25}, {0.5, -1.0}, {0.5, -1.5}, {0.2, -3.0}, {1.0, -3.0}};
  for (const auto& [p, alpha] : cases) {
    bool increasing = true;
    double prev = 0.0;
    for (const double s : geometric_grid(1e-6, 1e12, 20000)) {
      const double v = std::pow(s, p) * std::pow(std::log(std::numbers::e + s), alpha);
      if (!(v > prev)) increasing = false;
      prev = v;
    }
    bool accepted = true;
    try {
      (void)Nonlinearity::power_log(p, alpha);
    } catch (const SpecRejected&) {
      accepted = false;
    }
    INFO("p=" << p << " alpha=" << alpha);
    CHECK(accepted == increasing);
  }
}

TEST_CASE("custom specs carry a fitted growth descriptor", "[nonlin]") {
  const auto h = Nonlinearity::custom([](double s) { return s * s * std::log1p(s); }, "s^2 log");
  CHECK(h.growth().exactness == Exactness::Fitted);
  CHECK(h.growth().lead_exponent == Approx(2.0).margin(0.02));
  CHECK(h.growth().log_exponent == Approx(1.0).margin(0.1));
  CHECK(h.describe() == "s^2 log");
}

TEST_CASE("primitive", "[nonlin]") {
  CHECK(Primitive(Nonlinearity::power_log(1.0))(2.0) == Approx(2.0).epsilon(1e-15));
  CHECK(Primitive(Nonlinearity::power_log(3.0))(4.0) == Approx(64.0).epsilon(1e-15));
  CHECK(Primitive(Nonlinearity::power_log(3.0)).closed_form());

  const auto f = Nonlinearity::power_log(1.0, 1.0);
  const Primitive F(f);
  CHECK_FALSE(F.closed_form());
  CHECK(F(0.0) == 0.0);
  // mpmath quad at 30 digits.
  constexpr double kReference = 0.60841766662971804534;
  const double oracle = simpson([&](double s) { return f(s); }, 0.0, 1.0, 200000);
  CHECK(rel_err(oracle, kReference) < 1e-13);
  CHECK(rel_err(F(1.0), oracle) < 1e-12);
}

TEST_CASE("primitive matches its integrand under finite differences", "[nonlin]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pdist(0.2, 3.0), adist(-0.5, 2.5);
  for (int trial = 0; trial < 40; ++trial) {
    const auto f = Nonlinearity::power_log(pdist(rng), adist(rng));
    const Primitive F(f);
    for (const double t : geometric_grid(0.1, 1e4, 9)) {
      const double h = 1e-4 * t;
      const double derivative = (F(t + h) - F(t - h)) / (2.0 * h);
      INFO(f.describe() << " t=" << t);
      CHECK(rel_err(derivative, f(t)) < 1e-6);
    }
  }
}

TEST_CASE("primitive bounds: F(t) <= t f(t) and convexity", "[nonlin]") {
  const auto f = Nonlinearity::power_log(0.5, 1.5);
  const Primitive F(f);
  double prev_slope = 0.0;
  const auto grid = geometric_grid(1e-3, 1e6, 60);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double t = grid[i];
    CHECK(F(t) <= t * f(t));
    const double slope = (F(grid[i + 1]) - F(t)) / (grid[i + 1] - t);
    CHECK(slope >= prev_slope);
    prev_slope = slope;
  }
}

TEST_CASE("gamma", "[nonlin]") {
  CHECK(GammaMap(Nonlinearity::power_log(1.0), 3)(1.0) == Approx(8.0).epsilon(1e-15));
  CHECK(GammaMap(Nonlinearity::power_log(2.0), 2)(1.0) == Approx(20.0 / 3.0).epsilon(1e-15));
  CHECK(GammaMap(Nonlinearity::power_log(2.0, 0.7), 4)(0.0) == 0.0);
  CHECK(GammaMap(std::nullopt, 3)(2.0) == Approx(24.0));
  CHECK_THROWS_AS(GammaMap(Nonlinearity::power_log(1.0), 1), DomainError);
}

TEST_CASE("gamma lower bound t g(t) + 2 N t^2", "[nonlin]") {
  for (const auto& g : {Nonlinearity::power_log(1.0, 1.0), Nonlinearity::power_log(0.3),
                        Nonlinearity::power_log(2.5, -0.5)}) {
    const GammaMap gamma(g, 3);
    for (const double t : geometric_grid(1e-4, 1e5, 40)) {
      CHECK(gamma(t) >= t * g(t) + 6.0 * t * t);
    }
  }
}

TEST_CASE("invert", "[nonlin]") {
  CHECK(invert([](double s) { return 8.0 * s * s; }, 8.0) == Approx(1.0).epsilon(1e-14));
  const auto cube = Nonlinearity::power_log(3.0);
  CHECK(invert(cube, 27.0) == Approx(3.0).epsilon(1e-14));
  CHECK(invert(cube, 0.0) == 0.0);

  const auto g = Nonlinearity::power_log(1.0, 1.0);
  const GammaMap gamma(g, 2);
  constexpr double kGamma5 = 210.04262645598543990;  // mpmath
  CHECK(rel_err(gamma(5.0), kGamma5) < 1e-12);
  CHECK(invert(gamma, gamma(5.0)) == Approx(5.0).epsilon(1e-8));
}

TEST_CASE("invert reports a bounded map instead of looping", "[nonlin]") {
  const auto bounded = [](double s) { return 1.0 - std::exp(-s); };
  CHECK_THROWS_AS(invert(bounded, 2.0), BracketError);
  CHECK_THROWS_AS(invert(bounded, -1.0), DomainError);
}

TEST_CASE("monotonicity and inverse round-trip over random specs", "[nonlin][property]") {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> pdist(0.1, 4.0), adist(-1.0, 3.0);
  std::uniform_real_distribution<double> xdist(std::log(1e-4), std::log(1e6));
  const auto grid = geometric_grid(1e-6, 1e9, 200);
  for (int trial = 0; trial < 200; ++trial) {
    const double p = pdist(rng);
    const double alpha = adist(rng);
    std::optional<Nonlinearity> h;
    try {
      h = Nonlinearity::power_log(p, alpha);
    } catch (const SpecRejected&) {
      continue;
    }
    double prev = (*h)(0.0);
    for (const double s : grid) {
      const double v = (*h)(s);
      REQUIRE(v > prev);
      prev = v;
    }
    for (int k = 0; k < 5; ++k) {
      const double x = std::exp(xdist(rng));
      INFO(h->describe() << " x=" << x);
      CHECK(rel_err(invert(*h, (*h)(x)), x) < 1e-8);
    }
  }
}

TEST_CASE("shared caches are safe across threads", "[nonlin]") {
  const auto f = Nonlinearity::power_log(1.5, 0.5);
  const Primitive F(f);
  std::vector<double> results(4);
  std::vector<std::thread> workers;
  for (int i = 0; i < 4; ++i) {
    workers.emplace_back([&, i] { results[static_cast<std::size_t>(i)] = F(1e6 + i); });
  }
  for (auto& w : workers) w.join();
  const Primitive fresh(f);
  for (int i = 0; i < 4; ++i) CHECK(results[static_cast<std::size_t>(i)] == fresh(1e6 + i));
}
