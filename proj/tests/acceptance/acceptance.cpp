// Acceptance criteria: one PASS/FAIL line each, nonzero exit if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "solvlab/cli.hpp"

using namespace solvlab;

namespace {

Nonlinearity pl(double p, double alpha = 0.0) { return Nonlinearity::power_log(p, alpha); }

std::vector<double> quarter_grid() {
  std::vector<double> out;
  for (int i = 1; i <= 8; ++i) out.push_back(0.25 * i);
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Check {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

Check phase_diagram(Sign sign) {
  Check o;
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = parse_config(sign == Sign::Plus ? R"({"sweep": {"sign": "plus"}})" : R"({"sweep": {"sign": "minus"}})");
  const auto result = execute("sweep", cfg);
  const double elapsed = seconds_since(t0);
  int cells = 0, mismatches = 0, undetermined = 0;
  for (const auto& cell : result.report["cells"]) {
    ++cells;
    const double p = cell["p"], q = cell["q"];
    const bool exist = sign == Sign::Plus ? std::max(p, q) <= 1.0 : p <= std::max(1.0, q);
    undetermined += cell["verdict"] == "Undetermined";
    mismatches += cell["verdict"] != (exist ? "Existence" : "Nonexistence");
  }
  o.require(cells == 64, "cells=" + std::to_string(cells));
  o.require(mismatches == 0, "mismatches=" + std::to_string(mismatches));
  o.require(undetermined == 0, "undetermined=" + std::to_string(undetermined));
  o.require(result.exit_code == kExitDeterminate, "exit=" + std::to_string(result.exit_code));
  o.require(elapsed < 120.0, "runtime " + fmt("%.1fs", elapsed));
  o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(cells) + " cells, " + fmt("%.2fs", elapsed);
  return o;
}

Check shooting_agreement() {
  Check o;
  int checked = 0;
  for (const double p : quarter_grid()) {
    for (const double q : quarter_grid()) {
      if (std::abs(std::max(p, q) - 1.0) < 0.25 - 1e-12) continue;
      ++checked;
      const ProblemSpec spec{Sign::Plus, pl(p), pl(q), 3, Laplacian{}};
      const auto verdict = classify(spec).verdict;
      const auto sampled = sample_initial_values(CauchyProblem{spec, 1.0}, {0.5, 1.0, 2.0, 10.0}, 20.0);
      const auto expected = verdict == Verdict::Existence ? Consensus::AllGlobal : Consensus::AllBlowUp;
      o.require(verdict != Verdict::Undetermined && sampled.consensus == expected,
                "p=" + fmt("%g", p) + " q=" + fmt("%g", q) + " " + to_string(sampled.consensus));
    }
  }
  o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(checked) + " off-boundary cells";
  return o;
}

Check classical_ko() {
  Check o;
  for (const double p : quarter_grid()) {
    const auto v = classify_plus(pl(p), std::nullopt, 3).verdict;
    o.require(v == (p <= 1.0 ? Verdict::Existence : Verdict::Nonexistence), "p=" + fmt("%g", p));
  }
  o.require(classify_plus(pl(1.0, 2.0), std::nullopt, 3).verdict == Verdict::Existence, "s log^2");
  o.require(classify_plus(pl(1.0, 3.0), std::nullopt, 3).verdict == Verdict::Nonexistence, "s log^3");
  return o;
}

Check closed_form_trajectory() {
  Check o;
  const auto traj = integrate(CauchyProblem{ProblemSpec{Sign::Plus, pl(1.0), std::nullopt, 3, Laplacian{}}, 1.0}, 10.0);
  double worst = 0.0;
  for (const auto& s : traj.samples) {
    const double exact = s.r == 0.0 ? 1.0 : std::sinh(s.r) / s.r;
    worst = std::max(worst, std::abs(s.u - exact) / exact);
  }
  for (const auto& n : traj.nodes) {
    const double exact = n.r == 0.0 ? 1.0 : std::sinh(n.r) / n.r;
    worst = std::max(worst, std::abs(n.u - exact) / exact);
  }
  o.require(traj.outcome == solvlab::Outcome::Global, "outcome " + to_string(traj.outcome));
  o.require(worst <= 1e-7, "max rel err " + fmt("%.3g", worst));
  o.detail += (o.detail.empty() ? "" : "; ") + fmt("max rel err %.3g", worst);
  return o;
}

Check supersolution_identity() {
  Check o;
  const auto profile = build_profile(pl(3.0), pl(1.0), 3);
  const auto rep = verify_supersolution(profile, 512);
  const double R = profile.R();
  double worst = 0.0;
  for (std::size_t i = 0; i < 512; ++i) {
    const double r = R * (static_cast<double>(i) + 0.5) / 512.0;
    const double t = R * R - r * r;
    const auto pt = profile.at(t);
    const double both = 256.0 / std::pow(t, 4);
    worst = std::max({worst, std::abs(profile.gamma()(std::abs(pt.dphi)) - both) / both,
                      std::abs(profile.F()(pt.phi) - both) / both});
  }
  o.require(worst <= 1e-6, "identity err " + fmt("%.3g", worst));
  for (std::size_t c = 0; c < 4; ++c) {
    o.require(rep.passed[c], to_string(static_cast<SupersolCheck>(c)) + " " + fmt("%.3g", rep.max_violation[c]));
  }
  o.detail += (o.detail.empty() ? "" : "; ") + fmt("identity err %.3g", worst);
  return o;
}

Check blowup_dichotomy() {
  Check o;
  for (const auto& [q, expected] : {std::pair{2.0, BlowUpMode::ValueAndGradient}, std::pair{4.0, BlowUpMode::GradientOnly}}) {
    const auto traj = integrate(CauchyProblem{ProblemSpec{Sign::Plus, pl(3.0), pl(q), 3, Laplacian{}}, 1.0}, 50.0);
    const auto report = blowup_mode(traj, pl(q));
    o.require(traj.outcome == solvlab::Outcome::BlowUp, "q=" + fmt("%g", q) + " no blow-up");
    o.require(report.observed == expected, "q=" + fmt("%g", q) + " observed " + to_string(report.observed));
    o.require(report.agrees && report.predicted == expected, "q=" + fmt("%g", q) + " UGrowth disagrees");
  }
  return o;
}

Check pucci_reduction() {
  Check o;
  double worst = 0.0;
  for (const auto& [p, q, rmax] : std::vector<std::tuple<double, double, double>>{{1.0, 1.0, 10.0}, {0.5, 0.75, 20.0}, {2.0, 1.0, 0.5}}) {
    const auto lap = integrate(CauchyProblem{ProblemSpec{Sign::Plus, pl(p), pl(q), 3, Laplacian{}}, 1.0}, rmax);
    const auto puc = integrate(CauchyProblem{ProblemSpec{Sign::Plus, pl(p), pl(q), 3, Pucci{1.0}}, 1.0}, rmax);
    worst = std::max(worst, std::abs(puc.last().u - lap.last().u) / lap.last().u);
  }
  o.require(worst <= 1e-8, "lambda=1 rel diff " + fmt("%.3g", worst));
  const Side pair{Sign::Plus, pl(2.0), pl(1.0)};
  const GeneralSandwich sandwich{pair, pair, [](double u, double p) { return u * u + p; }, "u^2+p"};
  const auto c = classify_general(sandwich, 3, 0.5);
  o.require(c.verdict == Verdict::Nonexistence, "lambda=0.5 verdict " + to_string(c.verdict));
  o.detail += (o.detail.empty() ? "" : "; ") + fmt("lambda=1 rel diff %.3g", worst);
  return o;
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Check honest_gap() {
  Check o;
  const char* text = R"({"verb": "classify",
    "problem": {"sign": "minus", "f": {"form": "powerlog", "p": 1, "alpha": 3.5},
                "g": {"form": "powerlog", "p": 1, "alpha": 1.5}, "N": 3, "u0": [1]},
    "r_max": 5})";
  const auto result = execute("classify", parse_config(text));
  o.require(result.report["classification"]["verdict"] == "Undetermined", "verdict not Undetermined");
  o.require(result.exit_code == kExitUndetermined, "in-process exit " + std::to_string(result.exit_code));
  const auto dir = std::filesystem::temp_directory_path() / "solvlab_acceptance_gap";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "gap.json") << text;
  const int code = shell(std::string(SOLVLAB_CLI_PATH) + " classify --config " + (dir / "gap.json").string() +
                         " --out " + dir.string() + " > /dev/null 2>&1");
  o.require(code == 2, "binary exit " + std::to_string(code));
  return o;
}

struct Instance {
  Nonlinearity f, g;
  Sign sign;
  int N;
  double u0;
};

Instance random_instance(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> p_dist(0.25, 3.0), log_dist(-0.5, 3.0), u(0.0, 1.0);
  const auto draw = [&] {
    for (;;) {
      try {
        return pl(p_dist(rng), u(rng) < 0.4 ? 0.0 : log_dist(rng));
      } catch (const SpecRejected&) {
      }
    }
  };
  Instance inst{draw(), draw(), u(rng) < 0.5 ? Sign::Plus : Sign::Minus, 2 + static_cast<int>(rng() % 4),
                std::pow(10.0, -1.0 + 2.0 * u(rng))};
  return inst;
}

Check property_suites() {
  Check o;
  std::mt19937_64 rng(20261016);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int invariant_fail = 0, roundtrip_fail = 0, contradictions = 0, boundary_inconclusive = 0, nondeterministic = 0;
  int integration_errors = 0, errors = 0;
  std::string first_failure;
  const auto note = [&](const std::string& s) {
    if (first_failure.empty()) first_failure = s;
  };
  const auto kinds = std::vector<IntegralKind>{IntegralKind::KO, IntegralKind::gKO, IntegralKind::GammaInvF,
                                               IntegralKind::gInvF, IntegralKind::UGrowth};
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 1000; ++i) {
    const auto inst = random_instance(rng);
    const std::string tag = "#" + std::to_string(i) + " " + inst.f.describe() + " " + to_string(inst.sign) + " " +
                            inst.g.describe() + " N=" + std::to_string(inst.N) + " u0=" + fmt("%g", inst.u0);

    // Trajectory invariants.
    try {
      const auto traj = integrate(CauchyProblem{ProblemSpec{inst.sign, inst.f, inst.g, inst.N, Laplacian{}}, inst.u0}, 5.0);
      const auto inv = check_invariants(traj);
      if (!inv.ok) {
        ++invariant_fail;
        note(tag + " invariants");
      }
    } catch (const IntegrationError& e) {
      ++integration_errors;
      note(tag + " " + e.what());
    } catch (const std::exception& e) {
      ++errors;
      note(tag + " shoot: " + e.what());
    }

    try {
    // Inverse round-trips through Gamma and g.
    const GammaMap gamma(inst.g, inst.N);
    const double x = std::pow(10.0, -4.0 + 10.0 * unit(rng));
    for (const double back : {invert(gamma, gamma(x)), invert(inst.g, inst.g(x))}) {
      if (std::abs(back - x) > 1e-8 * x) {
        ++roundtrip_fail;
        note(tag + " round-trip x=" + fmt("%g", x));
      }
    }

    // Numeric tail vs symbolic rule on one kind.
    const auto kind = kinds[rng() % kinds.size()];
    const bool with_f = kind != IntegralKind::gKO && kind != IntegralKind::UGrowth;
    const std::optional<Nonlinearity> f = with_f ? std::optional(inst.f) : std::nullopt;
    const auto sym = classify_integral(kind, f, inst.g, inst.N);
    CriterionOptions numeric;
    numeric.force_numeric = true;
    const auto num = classify_integral(kind, f, inst.g, inst.N, numeric);
    if (num.status == Status::Inconclusive) {
      const auto& e = *sym.reduced;
      const bool near = std::abs(e.lead - 1.0) <= 0.05 || (std::abs(e.lead - 1.0) <= 0.2 && std::abs(e.log - 1.0) <= 2.0);
      if (!near) {
        ++boundary_inconclusive;
        note(tag + " " + std::string(to_string(kind)) + " numeric inconclusive away from boundary");
      }
    } else if (num.status != sym.status) {
      ++contradictions;
      note(tag + " " + std::string(to_string(kind)) + " numeric " + std::string(to_string(num.status)));
    }

    // Report determinism.
    const auto c1 = inst.sign == Sign::Plus ? classify_plus(inst.f, inst.g, inst.N) : classify_minus(inst.f, inst.g, inst.N);
    const auto c2 = inst.sign == Sign::Plus ? classify_plus(inst.f, inst.g, inst.N) : classify_minus(inst.f, inst.g, inst.N);
    if (canonical_dump(to_json(c1)) != canonical_dump(to_json(c2))) {
      ++nondeterministic;
      note(tag + " report differs");
    }
    } catch (const std::exception& e) {
      ++errors;
      note(tag + " " + e.what());
    }
  }
  o.require(invariant_fail == 0, "invariant failures " + std::to_string(invariant_fail));
  o.require(integration_errors == 0, "integration errors " + std::to_string(integration_errors));
  o.require(roundtrip_fail == 0, "round-trip failures " + std::to_string(roundtrip_fail));
  o.require(contradictions == 0, "numeric/symbolic contradictions " + std::to_string(contradictions));
  o.require(boundary_inconclusive == 0, "inconclusive away from boundary " + std::to_string(boundary_inconclusive));
  o.require(errors == 0, "errors " + std::to_string(errors));
  o.require(nondeterministic == 0, "nondeterministic reports " + std::to_string(nondeterministic));
  if (!first_failure.empty()) o.detail += "; first: " + first_failure;
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("1000 instances, ") + fmt("%.1fs", seconds_since(t0));
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"1 plus phase diagram", [] { return phase_diagram(Sign::Plus); }},
      {"2 minus phase diagram", [] { return phase_diagram(Sign::Minus); }},
      {"3 shooting agrees with verdicts", shooting_agreement},
      {"4 classical KO sanity", classical_ko},
      {"5 closed-form trajectory sinh(r)/r", closed_form_trajectory},
      {"6 supersolution identity and checks", supersolution_identity},
      {"7 blow-up mode dichotomy", blowup_dichotomy},
      {"8 Pucci reduction", pucci_reduction},
      {"9 honest gap is Undetermined, exit 2", honest_gap},
      {"10 randomized property suites", property_suites},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Check o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s criterion %s%s%s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.empty() ? "" : " | ",
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
