#include <catch_amalgamated.hpp>

#include <boost/math/special_functions/bessel.hpp>

#include <cmath>

#include "solvlab/shoot.hpp"

using namespace solvlab;
using Catch::Approx;

namespace {

Nonlinearity pl(double p, double alpha = 0.0) { return Nonlinearity::power_log(p, alpha); }

CauchyProblem make(Sign sign, std::optional<Nonlinearity> f, std::optional<Nonlinearity> g, int N,
                   double u0 = 1.0, Operator op = Laplacian{}) {
  return CauchyProblem{ProblemSpec{sign, std::move(f), std::move(g), N, std::move(op)}, u0};
}

}  // namespace

TEST_CASE("Delta u = u in dimension 3 is sinh(r)/r", "[shoot]") {
  const auto traj = integrate(make(Sign::Plus, pl(1.0), std::nullopt, 3), 10.0);
  REQUIRE(traj.outcome == Outcome::Global);
  REQUIRE(traj.samples.size() == 1024);
  double worst = 0.0;
  for (const auto& s : traj.samples) {
    const double exact = s.r == 0.0 ? 1.0 : std::sinh(s.r) / s.r;
    worst = std::max(worst, std::abs(s.u - exact) / exact);
  }
  CHECK(worst <= 1e-7);
  CHECK(interpolate(traj, 1.0).u == Approx(1.1752012).margin(1e-7));
  CHECK(traj.samples.back().r == 10.0);
}

TEST_CASE("Delta u = u in dimension 2 is I0(r)", "[shoot]") {
  const auto traj = integrate(make(Sign::Plus, pl(1.0), std::nullopt, 2), 8.0);
  REQUIRE(traj.outcome == Outcome::Global);
  for (const auto& n : traj.nodes) {
    const double exact = boost::math::cyl_bessel_i(0, n.r);
    const double exact_du = boost::math::cyl_bessel_i(1, n.r);
    CHECK(std::abs(n.u - exact) / exact < 1e-8);
    CHECK(std::abs(n.du - exact_du) <= 1e-8 * std::max(1.0, exact_du));
  }
}

TEST_CASE("f = s^3, g = s blows up at a resolved radius", "[shoot]") {
  const auto problem = make(Sign::Plus, pl(3.0), pl(1.0), 2);
  const auto coarse = integrate(problem, 50.0);
  REQUIRE(coarse.outcome == Outcome::BlowUp);
  const auto fine = integrate(problem, 50.0, TolerancedPolicy{}.scaled(0.1));
  REQUIRE(fine.outcome == Outcome::BlowUp);
  CHECK(std::isfinite(coarse.R_estimate));
  CHECK(std::abs(coarse.R_estimate - fine.R_estimate) / fine.R_estimate < 0.02);
  CHECK(coarse.R_error < 1e-14 * coarse.R_estimate);
  CHECK(coarse.mode == BlowUpMode::ValueAndGradient);
  CHECK(coarse.samples.back().r == coarse.R_estimate);
}

TEST_CASE("f = g = s stays global up to r = 20", "[shoot]") {
  const auto traj = integrate(make(Sign::Plus, pl(1.0), pl(1.0), 3), 20.0);
  CHECK(traj.outcome == Outcome::Global);
  CHECK(traj.last().r == 20.0);
  // u grows like exp(golden ratio * r): past the value threshold, still global.
  CHECK(traj.last().u > 1e10);
  CHECK(check_invariants(traj).ok);
}

TEST_CASE("blow-up mode follows the growth of g", "[shoot]") {
  SECTION("g = s^4: only the gradient blows up") {
    const auto traj = integrate(make(Sign::Plus, pl(3.0), pl(4.0), 3), 50.0);
    REQUIRE(traj.outcome == Outcome::BlowUp);
    CHECK(traj.mode == BlowUpMode::GradientOnly);
    CHECK(traj.last().u < 1e6);
    CHECK(traj.tail_decay == Approx(2.0).margin(0.1));
    const auto report = blowup_mode(traj, pl(4.0));
    CHECK(report.agrees);
    CHECK(report.ugrowth->status == Status::Converges);
  }
  SECTION("g = s^2: u diverges, logarithmically") {
    const auto traj = integrate(make(Sign::Plus, pl(3.0), pl(2.0), 3), 50.0);
    REQUIRE(traj.outcome == Outcome::BlowUp);
    CHECK(traj.mode == BlowUpMode::ValueAndGradient);
    const auto report = blowup_mode(traj, pl(2.0));
    CHECK(report.agrees);
    CHECK(report.ugrowth->status == Status::Diverges);
  }
  SECTION("global trajectories report NotBlowUp") {
    const auto traj = integrate(make(Sign::Plus, pl(1.0), pl(1.0), 3), 5.0);
    CHECK(blowup_mode(traj, pl(1.0)).observed == BlowUpMode::NotBlowUp);
  }
}

TEST_CASE("Pucci with lambda = 1 is the Laplacian", "[shoot]") {
  const auto lap = integrate(make(Sign::Plus, pl(1.0), pl(1.0), 3), 10.0);
  const auto pucci = integrate(make(Sign::Plus, pl(1.0), pl(1.0), 3, 1.0, Pucci{1.0}), 10.0);
  REQUIRE(pucci.outcome == Outcome::Global);
  CHECK(std::abs(pucci.last().u - lap.last().u) <= 1e-8 * lap.last().u);

  GeneralH h{[](double u, double p) { return u * u + p; }, 1.0, "u^2+p"};
  const auto general = integrate(make(Sign::Plus, std::nullopt, std::nullopt, 3, 1.0, h), 50.0);
  const auto plain = integrate(make(Sign::Plus, pl(2.0), pl(1.0), 3), 50.0);
  REQUIRE(general.outcome == Outcome::BlowUp);
  CHECK(std::abs(general.R_estimate - plain.R_estimate) <= 1e-8 * plain.R_estimate);
}

TEST_CASE("smaller lambda only speeds up blow-up", "[shoot]") {
  // Along u' > 0 the Pucci right-hand side M(.) divides negative
  // arguments by lambda, so lambda < 1 can only push u'' up.
  const auto lap = integrate(make(Sign::Plus, pl(2.0), pl(1.0), 3), 50.0);
  const auto pucci = integrate(make(Sign::Plus, pl(2.0), pl(1.0), 3, 1.0, Pucci{0.5}), 50.0);
  REQUIRE(pucci.outcome == Outcome::BlowUp);
  CHECK(pucci.R_estimate <= lap.R_estimate * (1.0 + 1e-9));
}

TEST_CASE("sample_initial_values consensus", "[shoot]") {
  const std::vector<double> u0s{0.5, 1.0, 2.0, 10.0};
  CHECK(sample_initial_values(make(Sign::Plus, pl(1.0), pl(1.0), 3), u0s, 20.0).consensus ==
        Consensus::AllGlobal);
  CHECK(sample_initial_values(make(Sign::Plus, pl(2.0), pl(2.0), 3), u0s, 20.0).consensus ==
        Consensus::AllBlowUp);
  const auto minus = sample_initial_values(make(Sign::Minus, pl(2.0), pl(3.0), 3), u0s, 20.0);
  CHECK(minus.consensus == Consensus::AllGlobal);
  REQUIRE(minus.runs.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(minus.runs[i].problem.u0 == u0s[i]);
  CHECK_THROWS_AS(sample_initial_values(make(Sign::Plus, pl(1.0), pl(1.0), 3), {}, 1.0),
                  PreconditionError);
}

TEST_CASE("minus-sign trajectories respect the balance bounds", "[shoot]") {
  for (const double u0 : {0.5, 1.0, 10.0}) {
    const auto traj = integrate(make(Sign::Minus, pl(2.0), pl(3.0), 3, u0), 20.0);
    const auto report = check_invariants(traj);
    INFO("u0=" << u0 << " conv=" << report.convexity_violation
                << " bal=" << report.minus_balance_violation
                << " energy=" << report.minus_energy_violation);
    CHECK(report.ok);
  }
}

TEST_CASE("halving tolerances stays within the error estimate", "[shoot]") {
  for (const auto& problem : {make(Sign::Plus, pl(1.0), pl(1.0), 3), make(Sign::Minus, pl(2.0), pl(3.0), 2),
                              make(Sign::Plus, pl(0.5, 1.0), pl(0.75), 4)}) {
    const auto base = integrate(problem, 10.0);
    const auto half = integrate(problem, 10.0, TolerancedPolicy{}.scaled(0.5));
    INFO("estimate=" << base.error_estimate);
    CHECK(std::abs(half.last().u - base.last().u) < 10.0 * base.error_estimate);
  }
}

TEST_CASE("diagnostics on the output grid", "[shoot]") {
  const auto traj = integrate(make(Sign::Plus, pl(1.0), pl(1.0), 3), 2.0);
  CHECK(traj.samples.front().r == 0.0);
  CHECK(traj.samples.front().A == 0.0);
  // At r = 0: W = 1 + g(0)/f(u0) - 0 = 1.
  CHECK(traj.samples.front().W == 1.0);
  const auto& s = traj.samples[500];
  const double F = s.u * s.u / 2.0;
  CHECK(s.A == Approx(s.r * s.r * s.du / std::sqrt(F)).epsilon(1e-14));
  CHECK(s.W == Approx(1.0 + s.du / s.u - s.du * s.du / (2.0 * F)).epsilon(1e-14));

  const auto ko = integrate(make(Sign::Plus, std::nullopt, pl(1.0), 3), 1.0);
  CHECK(ko.outcome == Outcome::Global);
  CHECK(std::isnan(ko.samples[10].A));
  CHECK(ko.last().u == 1.0);
}

TEST_CASE("preconditions", "[shoot]") {
  CHECK_THROWS_AS(integrate(make(Sign::Plus, pl(1.0), pl(1.0), 3, 0.0), 1.0), PreconditionError);
  CHECK_THROWS_AS(integrate(make(Sign::Plus, pl(1.0), pl(1.0), 3), -1.0), PreconditionError);
  CHECK_THROWS_AS(integrate(make(Sign::Plus, pl(1.0), pl(1.0), 3, 1.0, Pucci{1.5}), 1.0),
                  PreconditionError);
  GeneralH bad{[](double, double) { return 0.0; }, 1.0, "zero"};
  CHECK_THROWS_AS(integrate(make(Sign::Plus, std::nullopt, std::nullopt, 3, 1.0, bad), 1.0),
                  PreconditionError);
  TolerancedPolicy policy;
  policy.rtol = 0.0;
  CHECK_THROWS_AS(integrate(make(Sign::Plus, pl(1.0), pl(1.0), 3), 1.0, policy), PreconditionError);
}
