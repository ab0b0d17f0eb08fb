#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "solvlab/classify.hpp"
#include "solvlab/criteria.hpp"
#include "solvlab/errors.hpp"
#include "solvlab/shoot.hpp"
#include "solvlab/supersol.hpp"

namespace solvlab {

using Json = nlohmann::json;

namespace detail {

inline std::string format_double(double x) {
  if (!std::isfinite(x)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_canonical(const Json& j, std::string& out, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map: sorted keys
        if (!first) out += ",\n";
        first = false;
        out += inner + Json(it.key()).dump() + ": ";
        write_canonical(it.value(), out, indent + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        write_canonical(j[i], out, indent + 1);
      }
      out += "\n" + pad + "]";
      return;
    }
    case Json::value_t::number_float:
      out += format_double(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

inline Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json numbers(const std::vector<double>& xs) {
  Json out = Json::array();
  for (const double x : xs) out.push_back(number(x));
  return out;
}

}  // namespace detail

/// Sorted keys, two-space indent, doubles as %.17g, non-finite as null.
inline std::string canonical_dump(const Json& j) {
  std::string out;
  detail::write_canonical(j, out, 0);
  out += "\n";
  return out;
}

inline Json to_json(const Nonlinearity& h) {
  Json j;
  if (const auto* pl = h.power_log_form()) {
    j["form"] = "powerlog";
    j["p"] = pl->p;
    j["alpha"] = pl->alpha;
  } else {
    j["form"] = "custom";
    j["label"] = h.describe();
    j["fitted_lead_exponent"] = detail::number(h.growth().lead_exponent);
    j["fitted_log_exponent"] = detail::number(h.growth().log_exponent);
    j["fit_residual"] = detail::number(h.growth().residual);
  }
  return j;
}

inline Json to_json(const std::optional<Nonlinearity>& h) { return h ? to_json(*h) : Json(nullptr); }

inline Json to_json(const CriterionVerdict& v) {
  Json j;
  j["kind"] = std::string(to_string(v.kind));
  j["status"] = std::string(to_string(v.status));
  j["method"] = std::string(to_string(v.method));
  j["rule"] = v.rule;
  j["lower_limit"] = v.lower_limit;
  if (v.reduced) j["reduced"] = {{"lead", v.reduced->lead}, {"log", v.reduced->log}};
  if (v.method == Method::NumericTail) {
    j["partial_sums"] = detail::numbers(v.partial_sums);
    j["tail_slope"] = detail::number(v.tail_slope);
    j["asymptotic_slope"] = detail::number(v.asymptotic_slope);
    j["asymptotic_slope_late"] = detail::number(v.asymptotic_slope_late);
  }
  if (!v.diagnostic.empty()) j["diagnostic"] = v.diagnostic;
  return j;
}

inline Json to_json(const InteractionVerdict& v) {
  Json j;
  j["branch"] = std::string(to_string(v.branch));
  j["method"] = std::string(to_string(v.method));
  j["advisory"] = v.advisory;
  j["A0"] = v.A0;
  j["eps0"] = v.eps0;
  if (v.ratio_growth) j["ratio_growth"] = {{"lead", v.ratio_growth->lead}, {"log", v.ratio_growth->log}};
  Json probes = Json::array();
  for (const auto& p : v.probes) {
    probes.push_back({{"A", p.A},
                      {"tail_sup", detail::number(p.tail_sup)},
                      {"tail_inf", detail::number(p.tail_inf)},
                      {"tail_last", detail::number(p.tail_last)},
                      {"stabilized", p.stabilized},
                      {"branch", std::string(to_string(p.branch))}});
  }
  j["probes"] = std::move(probes);
  if (!v.diagnostic.empty()) j["diagnostic"] = v.diagnostic;
  return j;
}

inline Json to_json(const SupplementaryVerdict& v) {
  return {{"result", std::string(to_string(v.result))},
          {"method", std::string(to_string(v.method))},
          {"g_sublinear", std::string(to_string(v.g_sublinear))},
          {"f_dominated_by_g", std::string(to_string(v.f_dominated))}};
}

inline Json to_json(const SuperlinearityVerdict& v) {
  Json j{{"result", std::string(to_string(v.result))},
         {"method", std::string(to_string(v.method))},
         {"consistent_with_gko", v.consistent},
         {"gko", to_json(v.gko)}};
  if (!v.diagnostic.empty()) j["diagnostic"] = v.diagnostic;
  return j;
}

inline Json to_json(const SupersolutionReport& r) {
  Json checks;
  for (std::size_t c = 0; c < 4; ++c) {
    checks[to_string(static_cast<SupersolCheck>(c))] = {{"max_violation", detail::number(r.max_violation[c])},
                                                         {"passed", r.passed[c]}};
  }
  return {{"grid_size", r.grid_size},
          {"R", r.R},
          {"epsilon", r.epsilon},
          {"u0_bar", detail::number(r.u0_bar)},
          {"scale", r.scale},
          {"tolerance", r.tolerance},
          {"checks", std::move(checks)},
          {"unresolved_radii", r.unresolved},
          {"identity_error", detail::number(r.identity_error)},
          {"monotone", r.monotone},
          {"phi_at_tmin", detail::number(r.phi_at_tmin)},
          {"explodes", r.explodes},
          {"ratio_grows", r.ratio_grows},
          {"all_passed", r.all_passed}};
}

inline Json to_json(const Trajectory& t) {
  Json j{{"u0", t.problem.u0},
         {"r_max", t.r_max},
         {"outcome", to_string(t.outcome)},
         {"r_end", t.last().r},
         {"u_end", detail::number(t.last().u)},
         {"du_end", detail::number(t.last().du)},
         {"R_estimate", detail::number(t.R_estimate)},
         {"R_error", detail::number(t.R_error)},
         {"mode", to_string(t.mode)},
         {"tail_decay", detail::number(t.tail_decay)},
         {"error_estimate", detail::number(t.error_estimate)},
         {"accepted_steps", t.accepted},
         {"rejected_steps", t.rejected},
         {"log_gradient_steps", t.log_gradient_steps}};
  if (!t.diagnostic.empty()) j["diagnostic"] = t.diagnostic;
  return j;
}

inline Json to_json(const BlowUpModeReport& r) {
  Json j{{"observed", to_string(r.observed)}, {"agrees", r.agrees}};
  j["predicted"] = r.predicted ? Json(to_string(*r.predicted)) : Json(nullptr);
  if (r.ugrowth) j["ugrowth"] = to_json(*r.ugrowth);
  if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
  return j;
}

inline Json to_json(const InvariantReport& r) {
  return {{"ok", r.ok},
          {"min_du", detail::number(r.min_du)},
          {"convexity_violation", r.convexity_violation},
          {"bound_violation", r.bound_violation},
          {"minus_balance_violation", r.minus_balance_violation},
          {"minus_energy_violation", r.minus_energy_violation}};
}

inline Json to_json(const CrossCheck& c) {
  Json j{{"method", c.method}, {"expected", c.expected}};
  j["agree"] = c.agree ? Json(*c.agree) : Json(nullptr);
  j["consensus"] = c.consensus ? Json(to_string(*c.consensus)) : Json(nullptr);
  Json runs = Json::array();
  for (const auto& r : c.runs) {
    Json run{{"u0", r.u0},
             {"outcome", to_string(r.outcome)},
             {"r_end", r.r_end},
             {"R_estimate", detail::number(r.R_estimate)},
             {"mode", to_string(r.mode)}};
    if (!r.diagnostic.empty()) run["diagnostic"] = r.diagnostic;
    runs.push_back(std::move(run));
  }
  j["runs"] = std::move(runs);
  if (c.supersolution) j["supersolution"] = to_json(*c.supersolution);
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

inline Json to_json(const Classification& c) {
  Json j;
  j["verdict"] = to_string(c.verdict);
  j["equation"] = c.equation;
  Json fired = Json::array();
  for (const auto& f : c.fired) {
    Json kinds = Json::array();
    for (const auto k : f.criteria) kinds.push_back(std::string(to_string(k)));
    Json clause{{"id", f.id}, {"conclusion", to_string(f.conclusion)}, {"criteria", std::move(kinds)}};
    if (!f.route.empty()) clause["route"] = f.route;
    fired.push_back(std::move(clause));
  }
  j["fired_clauses"] = std::move(fired);
  Json criteria = Json::array();
  for (const auto& v : c.criteria) criteria.push_back(to_json(v));
  j["criteria"] = std::move(criteria);
  if (c.interaction) j["interaction"] = to_json(*c.interaction);
  if (c.supplementary) j["supplementary"] = to_json(*c.supplementary);
  j["unresolved"] = c.unresolved;
  j["cross_check"] = c.cross_check ? to_json(*c.cross_check) : Json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string csv_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

inline std::string trajectory_csv(const Trajectory& t) {
  std::string out = "r,u,du,A,W\n";
  for (const auto& s : t.samples) {
    out += detail::csv_double(s.r) + ',' + detail::csv_double(s.u) + ',' + detail::csv_double(s.du) + ',' +
           detail::csv_double(s.A) + ',' + detail::csv_double(s.W) + '\n';
  }
  return out;
}

struct SweepRow {
  double p = 0.0;
  double q = 0.0;
  Verdict verdict = Verdict::Undetermined;
  std::string crosscheck = "skipped";  // agree, disagree, none or skipped
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "p,q,verdict,crosscheck\n";
  for (const auto& r : rows) {
    out += detail::csv_double(r.p) + ',' + detail::csv_double(r.q) + ',' + to_string(r.verdict) + ',' +
           r.crosscheck + '\n';
  }
  return out;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw Error("write failed for " + path);
}

}  // namespace solvlab
