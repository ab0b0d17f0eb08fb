#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "solvlab/classify.hpp"
#include "solvlab/errors.hpp"
#include "solvlab/problem.hpp"
#include "solvlab/shoot.hpp"

namespace solvlab {

struct Range {
  double from = 0.25;
  double to = 2.0;
  double step = 0.25;

  /// from, from + step, ... up to `to` (inclusive within 1e-9 step).
  std::vector<double> values() const {
    std::vector<double> out;
    const auto n = static_cast<long>(std::floor((to - from) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(from + static_cast<double>(i) * step);
    return out;
  }
};

struct SweepSpec {
  Range p;
  Range q;
  double alpha = 0.0;
  double beta = 0.0;
  Sign sign = Sign::Plus;
  int N = 3;
  bool crosscheck = false;
};

struct RunConfig {
  std::optional<std::string> verb;
  ProblemSpec problem{Sign::Plus, std::nullopt, std::nullopt, 3, Laplacian{}};
  bool has_problem = false;
  std::vector<double> u0{0.5, 1.0, 2.0, 10.0};
  double r_max = 20.0;
  std::size_t supersol_grid = 512;
  bool crosscheck = true;
  ClassifyOptions classify;
  TolerancedPolicy policy;
  std::optional<SweepSpec> sweep;
  std::string out_dir = ".";
  std::optional<unsigned> workers;
};

namespace detail {

inline std::string key_path(const std::string& parent, std::string_view key) {
  return parent.empty() ? std::string(key) : parent + "." + std::string(key);
}

class ConfigReader {
 public:
  explicit ConfigReader(std::string source) : source_(std::move(source)) {}

  void only(const nlohmann::json& obj, const std::string& path, std::initializer_list<std::string_view> keys) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
        std::string allowed;
        for (const auto k : keys) allowed += (allowed.empty() ? "" : ", ") + std::string(k);
        fail(key_path(path, it.key()), "unknown key (allowed: " + allowed + ")");
      }
    }
  }

  double number(const nlohmann::json& j, const std::string& path) const {
    if (!j.is_number()) fail(path, "expected a number");
    const double x = j.get<double>();
    if (!std::isfinite(x)) fail(path, "expected a finite number");
    return x;
  }

  double positive(const nlohmann::json& j, const std::string& path) const {
    const double x = number(j, path);
    if (!(x > 0.0)) fail(path, "must be positive");
    return x;
  }

  long integer(const nlohmann::json& j, const std::string& path) const {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<long>();
  }

  bool boolean(const nlohmann::json& j, const std::string& path) const {
    if (!j.is_boolean()) fail(path, "expected true or false");
    return j.get<bool>();
  }

  std::string string(const nlohmann::json& j, const std::string& path) const {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
  }

  Sign sign(const nlohmann::json& j, const std::string& path) const {
    const auto s = string(j, path);
    if (s == "plus" || s == "+") return Sign::Plus;
    if (s == "minus" || s == "-") return Sign::Minus;
    fail(path, "expected \"plus\" or \"minus\"");
  }

  std::optional<Nonlinearity> nonlinearity(const nlohmann::json& j, const std::string& path) const {
    if (j.is_null()) return std::nullopt;
    only(j, path, {"form", "p", "alpha"});
    if (!j.contains("form") || string(j["form"], key_path(path, "form")) != "powerlog") {
      fail(key_path(path, "form"), "only \"powerlog\" is available from a config file");
    }
    if (!j.contains("p")) fail(key_path(path, "p"), "missing");
    const double p = number(j["p"], key_path(path, "p"));
    const double alpha = j.contains("alpha") ? number(j["alpha"], key_path(path, "alpha")) : 0.0;
    try {
      return Nonlinearity::power_log(p, alpha);
    } catch (const SpecRejected& e) {
      fail(path, e.what());
    }
  }

  Range range(const nlohmann::json& j, const std::string& path) const {
    only(j, path, {"from", "to", "step"});
    Range r;
    if (j.contains("from")) r.from = number(j["from"], key_path(path, "from"));
    if (j.contains("to")) r.to = number(j["to"], key_path(path, "to"));
    if (j.contains("step")) r.step = positive(j["step"], key_path(path, "step"));
    if (r.to < r.from) fail(path, "empty range (to < from)");
    return r;
  }

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    throw ConfigError(source_ + ": " + (path.empty() ? "<root>" : path) + ": " + what);
  }

 private:
  std::string source_;
};

inline std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

/// Parses a run configuration; every object rejects keys it does not know.
inline RunConfig parse_config(const std::string& text, const std::string& source = "config") {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(source + ": " + detail::line_column(text, e.byte) + ": malformed JSON");
  }
  const detail::ConfigReader rd(source);
  rd.only(root, "", {"verb", "problem", "u0", "r_max", "crosscheck", "criteria", "supersol", "sweep", "tolerance",
                     "output", "workers"});
  RunConfig cfg;

  if (root.contains("verb")) {
    const auto v = rd.string(root["verb"], "verb");
    if (v != "criteria" && v != "classify" && v != "shoot" && v != "supersol" && v != "sweep") {
      rd.fail("verb", "expected one of criteria, classify, shoot, supersol, sweep");
    }
    cfg.verb = v;
  }

  if (root.contains("problem")) {
    const auto& p = root["problem"];
    rd.only(p, "problem", {"sign", "f", "g", "N", "operator", "u0"});
    cfg.has_problem = true;
    if (p.contains("sign")) cfg.problem.sign = rd.sign(p["sign"], "problem.sign");
    if (p.contains("f")) cfg.problem.f = rd.nonlinearity(p["f"], "problem.f");
    if (p.contains("g")) cfg.problem.g = rd.nonlinearity(p["g"], "problem.g");
    if (p.contains("N")) {
      const long n = rd.integer(p["N"], "problem.N");
      if (n < 2) rd.fail("problem.N", "must be >= 2");
      cfg.problem.N = static_cast<int>(n);
    }
    if (p.contains("operator")) {
      const auto& op = p["operator"];
      rd.only(op, "problem.operator", {"type", "lambda"});
      const auto type = op.contains("type") ? rd.string(op["type"], "problem.operator.type") : "laplacian";
      if (type == "laplacian") {
        if (op.contains("lambda")) rd.fail("problem.operator.lambda", "the Laplacian takes no lambda");
        cfg.problem.op = Laplacian{};
      } else if (type == "pucci") {
        const double lambda = op.contains("lambda") ? rd.number(op["lambda"], "problem.operator.lambda") : 1.0;
        if (!(lambda > 0.0 && lambda <= 1.0)) rd.fail("problem.operator.lambda", "must lie in (0, 1]");
        cfg.problem.op = Pucci{lambda};
      } else {
        rd.fail("problem.operator.type", "expected \"laplacian\" or \"pucci\"");
      }
    }
    if (!cfg.problem.f && !cfg.problem.g) rd.fail("problem", "at least one of f, g is required");
    if (p.contains("u0")) {
      const auto& u = p["u0"];
      if (!u.is_array() || u.empty()) rd.fail("problem.u0", "expected a nonempty array");
      cfg.u0.clear();
      for (std::size_t i = 0; i < u.size(); ++i) {
        cfg.u0.push_back(rd.positive(u[i], "problem.u0[" + std::to_string(i) + "]"));
      }
    }
  }
  if (root.contains("u0")) rd.fail("u0", "belongs in the problem block");

  if (root.contains("r_max")) cfg.r_max = rd.positive(root["r_max"], "r_max");
  if (root.contains("crosscheck")) cfg.crosscheck = rd.boolean(root["crosscheck"], "crosscheck");

  if (root.contains("criteria")) {
    const auto& c = root["criteria"];
    rd.only(c, "criteria", {"A0", "eps0", "force_numeric", "slope_margin"});
    if (c.contains("A0")) cfg.classify.A0 = rd.positive(c["A0"], "criteria.A0");
    if (c.contains("eps0")) cfg.classify.eps0 = rd.positive(c["eps0"], "criteria.eps0");
    if (c.contains("force_numeric")) {
      cfg.classify.criterion.force_numeric = rd.boolean(c["force_numeric"], "criteria.force_numeric");
    }
    if (c.contains("slope_margin")) {
      cfg.classify.criterion.slope_margin = rd.positive(c["slope_margin"], "criteria.slope_margin");
    }
  }

  if (root.contains("supersol")) {
    const auto& s = root["supersol"];
    rd.only(s, "supersol", {"grid"});
    if (s.contains("grid")) {
      const long n = rd.integer(s["grid"], "supersol.grid");
      if (n < 1) rd.fail("supersol.grid", "must be >= 1");
      cfg.supersol_grid = static_cast<std::size_t>(n);
    }
  }

  if (root.contains("sweep")) {
    const auto& s = root["sweep"];
    rd.only(s, "sweep", {"p", "q", "alpha", "beta", "sign", "N", "crosscheck"});
    SweepSpec sweep;
    if (s.contains("p")) sweep.p = rd.range(s["p"], "sweep.p");
    if (s.contains("q")) sweep.q = rd.range(s["q"], "sweep.q");
    if (sweep.p.from <= 0.0 || sweep.q.from <= 0.0) rd.fail("sweep", "exponents must be positive");
    if (s.contains("alpha")) sweep.alpha = rd.number(s["alpha"], "sweep.alpha");
    if (s.contains("beta")) sweep.beta = rd.number(s["beta"], "sweep.beta");
    if (s.contains("sign")) sweep.sign = rd.sign(s["sign"], "sweep.sign");
    if (s.contains("N")) {
      const long n = rd.integer(s["N"], "sweep.N");
      if (n < 2) rd.fail("sweep.N", "must be >= 2");
      sweep.N = static_cast<int>(n);
    }
    if (s.contains("crosscheck")) sweep.crosscheck = rd.boolean(s["crosscheck"], "sweep.crosscheck");
    cfg.sweep = sweep;
  }

  if (root.contains("tolerance")) {
    const auto& t = root["tolerance"];
    rd.only(t, "tolerance", {"rtol", "atol", "r_start", "blowup_threshold", "step_collapse", "output_points"});
    auto& pol = cfg.policy;
    if (t.contains("rtol")) pol.rtol = rd.positive(t["rtol"], "tolerance.rtol");
    if (t.contains("atol")) pol.atol = rd.positive(t["atol"], "tolerance.atol");
    if (t.contains("r_start")) pol.r_start = rd.positive(t["r_start"], "tolerance.r_start");
    if (t.contains("blowup_threshold")) {
      pol.blowup_threshold = rd.positive(t["blowup_threshold"], "tolerance.blowup_threshold");
    }
    if (t.contains("step_collapse")) pol.step_collapse = rd.positive(t["step_collapse"], "tolerance.step_collapse");
    if (t.contains("output_points")) {
      const long n = rd.integer(t["output_points"], "tolerance.output_points");
      if (n < 2) rd.fail("tolerance.output_points", "must be >= 2");
      pol.output_points = static_cast<std::size_t>(n);
    }
  }

  if (root.contains("output")) {
    const auto& o = root["output"];
    rd.only(o, "output", {"dir"});
    if (o.contains("dir")) cfg.out_dir = rd.string(o["dir"], "output.dir");
  }
  if (root.contains("workers")) {
    const long n = rd.integer(root["workers"], "workers");
    if (n < 1) rd.fail("workers", "must be >= 1");
    cfg.workers = static_cast<unsigned>(n);
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path);
}

}  // namespace solvlab
