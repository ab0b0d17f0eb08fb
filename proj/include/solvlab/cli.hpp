#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "solvlab/classify.hpp"
#include "solvlab/config.hpp"
#include "solvlab/criteria.hpp"
#include "solvlab/errors.hpp"
#include "solvlab/report.hpp"
#include "solvlab/shoot.hpp"
#include "solvlab/supersol.hpp"

namespace solvlab {

inline constexpr int kExitDeterminate = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUndetermined = 2;

/// Command-line values that take precedence over the environment, which in
/// turn takes precedence over the config file.
struct CliOverrides {
  std::optional<std::string> out_dir;
  std::optional<unsigned> workers;
  std::optional<double> tolerance_scale;
};

struct RunResult {
  int exit_code = kExitDeterminate;
  Json report;
  std::vector<std::pair<std::string, std::string>> files;  // name, content
};

namespace detail {

inline Json describe_problem(const ProblemSpec& spec) {
  Json op;
  if (std::holds_alternative<Laplacian>(spec.op)) {
    op = {{"type", "laplacian"}};
  } else {
    op = {{"type", "pucci"}, {"lambda", operator_lambda(spec.op)}};
  }
  return {{"sign", to_string(spec.sign)}, {"f", to_json(spec.f)}, {"g", to_json(spec.g)}, {"N", spec.N},
          {"operator", std::move(op)}};
}

inline Json describe_policy(const TolerancedPolicy& p) {
  return {{"rtol", p.rtol},
          {"atol", p.atol},
          {"r_start", p.r_start},
          {"blowup_threshold", p.blowup_threshold},
          {"step_collapse", p.step_collapse},
          {"output_points", p.output_points}};
}

inline void require_problem(const RunConfig& cfg, const std::string& verb) {
  if (!cfg.has_problem) throw ConfigError(verb + " needs a problem block");
}

inline RunResult run_criteria(const RunConfig& cfg) {
  require_problem(cfg, "criteria");
  const auto& spec = cfg.problem;
  RunResult result;
  Json& report = result.report;
  report["problem"] = describe_problem(spec);
  Json verdicts = Json::array();
  bool inconclusive = false;
  for (const auto kind : {IntegralKind::KO, IntegralKind::gKO, IntegralKind::GammaInvF, IntegralKind::gInvF,
                          IntegralKind::UGrowth}) {
    const bool needs_f = kind == IntegralKind::KO || kind == IntegralKind::GammaInvF || kind == IntegralKind::gInvF;
    const bool needs_g = kind != IntegralKind::KO;
    if ((needs_f && !spec.f) || (needs_g && !spec.g)) continue;
    const auto v = classify_integral(kind, needs_f ? spec.f : std::nullopt, spec.g, spec.N, cfg.classify.criterion);
    inconclusive |= v.status == Status::Inconclusive;
    verdicts.push_back(to_json(v));
  }
  report["criteria"] = std::move(verdicts);
  if (spec.f && spec.g) {
    const auto inter = check_interaction(*spec.f, *spec.g, cfg.classify.A0, cfg.classify.eps0);
    inconclusive |= inter.branch == InteractionBranch::Inconclusive;
    report["interaction"] = to_json(inter);
    report["supplementary"] = to_json(check_supplementary(*spec.f, *spec.g));
  }
  if (spec.g) {
    const auto sup = superlinearity_test(*spec.g);
    inconclusive |= sup.result == TriState::Inconclusive;
    report["superlinearity"] = to_json(sup);
  }
  result.exit_code = inconclusive ? kExitUndetermined : kExitDeterminate;
  return result;
}

inline CrossValidateOptions cross_options(const RunConfig& cfg) {
  CrossValidateOptions o;
  o.u0_set = cfg.u0;
  o.r_max = cfg.r_max;
  o.policy = cfg.policy;
  o.supersolution_grid = cfg.supersol_grid;
  return o;
}

inline RunResult run_classify(const RunConfig& cfg) {
  require_problem(cfg, "classify");
  RunResult result;
  auto c = classify(cfg.problem, cfg.classify);
  if (cfg.crosscheck) c = cross_validate(std::move(c), CauchyProblem{cfg.problem, cfg.u0.front()}, cross_options(cfg));
  result.report["problem"] = describe_problem(cfg.problem);
  result.report["classification"] = to_json(c);
  result.exit_code = c.verdict == Verdict::Undetermined ? kExitUndetermined : kExitDeterminate;
  return result;
}

inline RunResult run_shoot(const RunConfig& cfg) {
  require_problem(cfg, "shoot");
  RunResult result;
  const auto sampled = sample_initial_values(CauchyProblem{cfg.problem, cfg.u0.front()}, cfg.u0, cfg.r_max, cfg.policy);
  Json runs = Json::array();
  bool inconclusive = false;
  for (std::size_t i = 0; i < sampled.runs.size(); ++i) {
    const auto& t = sampled.runs[i];
    const std::string name = "trajectory_" + std::to_string(i) + ".csv";
    Json run = to_json(t);
    run["csv"] = name;
    run["blowup_mode"] = to_json(blowup_mode(t, cfg.problem.g));
    run["invariants"] = to_json(check_invariants(t));
    runs.push_back(std::move(run));
    result.files.emplace_back(name, trajectory_csv(t));
    inconclusive |= t.outcome == Outcome::Inconclusive;
  }
  result.report["problem"] = describe_problem(cfg.problem);
  result.report["policy"] = describe_policy(cfg.policy);
  result.report["runs"] = std::move(runs);
  result.report["consensus"] = to_string(sampled.consensus);
  result.exit_code = inconclusive ? kExitUndetermined : kExitDeterminate;
  return result;
}

inline RunResult run_supersol(const RunConfig& cfg) {
  require_problem(cfg, "supersol");
  if (!cfg.problem.f) throw ConfigError("supersol needs f");
  RunResult result;
  const auto profile = build_profile(*cfg.problem.f, cfg.problem.g, cfg.problem.N);
  const auto rep = verify_supersolution(profile, cfg.supersol_grid);
  result.report["problem"] = describe_problem(cfg.problem);
  result.report["criterion"] = to_json(profile.criterion());
  result.report["verification"] = to_json(rep);
  result.exit_code = rep.all_passed ? kExitDeterminate : kExitUndetermined;
  return result;
}

/// Runs fn(i) for i in [0, n) on `workers` threads; the first exception
/// by index is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned count = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  for (unsigned w = 1; w < count; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline RunResult run_sweep(const RunConfig& cfg, unsigned workers) {
  if (!cfg.sweep) throw ConfigError("sweep needs a sweep block");
  const auto& sw = *cfg.sweep;
  std::vector<SweepRow> rows;
  for (const double p : sw.p.values()) {
    for (const double q : sw.q.values()) rows.push_back({p, q});
  }
  if (rows.empty()) throw ConfigError("sweep grid is empty");

  parallel_for(rows.size(), workers, [&](std::size_t i) {
    auto& row = rows[i];
    const auto f = Nonlinearity::power_log(row.p, sw.alpha);
    const auto g = Nonlinearity::power_log(row.q, sw.beta);
    auto c = sw.sign == Sign::Plus ? classify_plus(f, g, sw.N, cfg.classify)
                                   : classify_minus(f, g, sw.N, cfg.classify);
    row.verdict = c.verdict;
    if (sw.crosscheck) {
      const ProblemSpec spec{sw.sign, f, g, sw.N, Laplacian{}};
      c = cross_validate(std::move(c), CauchyProblem{spec, cfg.u0.front()}, cross_options(cfg));
      const auto& agree = c.cross_check->agree;
      row.crosscheck = !agree ? "none" : *agree ? "agree" : "disagree";
    }
  });

  RunResult result;
  Json cells = Json::array();
  std::size_t counts[3] = {0, 0, 0};
  std::size_t disagreements = 0;
  for (const auto& r : rows) {
    ++counts[static_cast<int>(r.verdict)];
    disagreements += r.crosscheck == "disagree";
    cells.push_back({{"p", r.p}, {"q", r.q}, {"verdict", to_string(r.verdict)}, {"crosscheck", r.crosscheck}});
  }
  result.report["sweep"] = {{"sign", to_string(sw.sign)},
                            {"N", sw.N},
                            {"alpha", sw.alpha},
                            {"beta", sw.beta},
                            {"p", {{"from", sw.p.from}, {"to", sw.p.to}, {"step", sw.p.step}}},
                            {"q", {{"from", sw.q.from}, {"to", sw.q.to}, {"step", sw.q.step}}},
                            {"crosscheck", sw.crosscheck}};
  result.report["cells"] = std::move(cells);
  result.report["counts"] = {{"Existence", counts[0]},
                             {"Nonexistence", counts[1]},
                             {"Undetermined", counts[2]},
                             {"disagreements", disagreements}};
  result.files.emplace_back("sweep.csv", sweep_csv(rows));
  result.exit_code = counts[2] > 0 ? kExitUndetermined : kExitDeterminate;
  return result;
}

inline std::optional<std::string> env(const char* name) {
  const char* value = std::getenv(name);
  if (value == nullptr || *value == '\0') return std::nullopt;
  return std::string(value);
}

// Which module an exception comes from, for error messages.
inline std::string provenance(const std::exception& e, const std::string& verb) {
  if (dynamic_cast<const ConfigError*>(&e)) return "cli";
  if (dynamic_cast<const IntegrationError*>(&e)) return "shoot";
  if (dynamic_cast<const ConsistencyError*>(&e)) return "classify";
  if (dynamic_cast<const QuadratureError*>(&e) || dynamic_cast<const BracketError*>(&e) ||
      dynamic_cast<const SpecRejected*>(&e) || dynamic_cast<const DomainError*>(&e)) {
    return "nonlin";
  }
  return verb;
}

}  // namespace detail

/// Effective worker count: CLI, then SOLVLAB_WORKERS, then config, then
/// the hardware concurrency.
inline unsigned resolve_workers(const RunConfig& cfg, const CliOverrides& cli) {
  if (cli.workers) return std::max(1u, *cli.workers);
  if (const auto e = detail::env("SOLVLAB_WORKERS")) {
    try {
      const long n = std::stol(*e);
      if (n >= 1) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
    throw ConfigError("SOLVLAB_WORKERS must be a positive integer, got \"" + *e + "\"");
  }
  if (cfg.workers) return *cfg.workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Effective output directory: CLI, then SOLVLAB_OUT_DIR, then config.
inline std::string resolve_out_dir(const RunConfig& cfg, const CliOverrides& cli) {
  if (cli.out_dir) return *cli.out_dir;
  if (const auto e = detail::env("SOLVLAB_OUT_DIR")) return *e;
  return cfg.out_dir;
}

/// Runs a verb without touching the filesystem.
inline RunResult execute(const std::string& verb, RunConfig cfg, const CliOverrides& cli = {}) {
  if (cfg.verb && *cfg.verb != verb) {
    throw ConfigError("config declares verb \"" + *cfg.verb + "\" but \"" + verb + "\" was requested");
  }
  if (cli.tolerance_scale) {
    if (!(*cli.tolerance_scale > 0.0)) throw ConfigError("--tolerance-scale must be positive");
    cfg.policy = cfg.policy.scaled(*cli.tolerance_scale);
  }
  RunResult result;
  if (verb == "criteria") {
    result = detail::run_criteria(cfg);
  } else if (verb == "classify") {
    result = detail::run_classify(cfg);
  } else if (verb == "shoot") {
    result = detail::run_shoot(cfg);
  } else if (verb == "supersol") {
    result = detail::run_supersol(cfg);
  } else if (verb == "sweep") {
    result = detail::run_sweep(cfg, resolve_workers(cfg, cli));
  } else {
    throw ConfigError("unknown verb \"" + verb + "\"");
  }
  result.report["verb"] = verb;
  result.report["exit_code"] = result.exit_code;
  return result;
}

/// Writes <verb>.json and any CSV artifacts into out_dir.
inline std::vector<std::string> emit_report(const std::string& verb, const RunResult& result,
                                            const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory " + out_dir + ": " + ec.message());
  std::vector<std::string> written;
  const auto put = [&](const std::string& name, const std::string& content) {
    const auto path = (fs::path(out_dir) / name).string();
    write_file(path, content);
    written.push_back(path);
  };
  put(verb + ".json", canonical_dump(result.report));
  for (const auto& [name, content] : result.files) put(name, content);
  return written;
}

/// execute + emit_report; errors become exit code 1 with a message that
/// names the module they came from.
inline int run(const std::string& verb, const RunConfig& cfg, const CliOverrides& cli, std::string* message) {
  try {
    const auto result = execute(verb, cfg, cli);
    const auto written = emit_report(verb, result, resolve_out_dir(cfg, cli));
    if (message) {
      *message = verb + ": " + (result.exit_code == kExitDeterminate ? "determinate" : "undetermined") + "; wrote";
      for (const auto& w : written) *message += " " + w;
    }
    return result.exit_code;
  } catch (const std::exception& e) {
    if (message) *message = "error [" + detail::provenance(e, verb) + "]: " + e.what();
    return kExitError;
  }
}

}  // namespace solvlab
