#pragma once

// Scenario files: INI-style sections of key = value pairs, '#' comments.
// The schema is closed: unknown sections or keys are load errors.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bounds.hpp"
#include "errors.hpp"
#include "exprlang.hpp"
#include "geometry.hpp"
#include "problem.hpp"
#include "solver.hpp"

namespace issp {

struct VerifyConfig
{
  double tol = 0.02;
  double residual_tol_scale = 10.0;
};

struct Scenario
{
  ProblemSpec spec;
  RadialGrid grid;
  TimeGrid time;
  int snapshot_stride = 1;
  SolverOptions solver;
  std::optional<double> sup_f_override;
  std::optional<double> sup_d_override;
  TraceConstantConfig trace;
  GainMeasure neumann_gain_measure = GainMeasure::sphere;
  VerifyConfig verify;
};

namespace detail {

struct KeySpec
{
  std::string_view name;
  bool required;
};

struct SectionSpec
{
  std::string_view name;
  std::vector<KeySpec> keys;
};

inline const std::vector<SectionSpec>& scenario_schema()
{
  static const std::vector<SectionSpec> schema = {
      {"geometry", {{"n", true}, {"R", true}}},
      {"coefficients", {{"a", true}, {"b", true}, {"c", true}}},
      {"nonlinearity", {{"h", true}}},
      {"boundary", {{"kind", true}, {"psi", true}}},
      {"disturbances",
       {{"f", true}, {"d", true}, {"sup_f_override", false}, {"sup_d_override", false}}},
      {"initial", {{"phi", true}}},
      {"grid",
       {{"nr", true},
        {"dt", true},
        {"T", true},
        {"snapshot_stride", true},
        {"newton_tol", false},
        {"newton_max", false},
        {"scheme", false}}},
      {"bounds",
       {{"a_lower", true},
        {"a_upper", true},
        {"b_lower", false},
        {"b_upper", true},
        {"c_lower", true},
        {"trace_constant", false},
        {"trace_safety_factor", true},
        {"neumann_gain_measure", true}}},
      {"verify", {{"tol", true}, {"residual_tol_scale", false}}},
  };
  return schema;
}

struct Entry
{
  std::string value;
  int line = 0;
};

using RawScenario = std::map<std::string, std::map<std::string, Entry>>;

inline std::string trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

class ScenarioReader
{
public:
  ScenarioReader(std::string source, std::string_view text) : source_(std::move(source))
  {
    read(text);
  }

  Scenario build() const
  {
    Scenario sc;
    auto& spec = sc.spec;
    const int n = static_cast<int>(integer("geometry", "n"));
    const double R = number("geometry", "R");
    try {
      spec.geometry = BallGeometry(n, R);
    } catch (const Error& e) {
      fail(line_of("geometry", "n"), e.what());
    }

    using expr::Var;
    spec.a = expression("coefficients", "a", {Var::r, Var::t});
    spec.b_radial = expression("coefficients", "b", {Var::r, Var::t});
    spec.c = expression("coefficients", "c", {Var::r, Var::t});
    spec.h = expression("nonlinearity", "h", {Var::r, Var::t, Var::u});
    spec.psi = expression("boundary", "psi", {Var::u});
    spec.f = expression("disturbances", "f", {Var::r, Var::t});
    spec.d = expression("disturbances", "d", {Var::t});
    spec.phi = expression("initial", "phi", {Var::r});

    const std::string kind = text("boundary", "kind");
    if (kind == "robin")
      spec.boundary = BoundaryKind::robin;
    else if (kind == "neumann")
      spec.boundary = BoundaryKind::neumann;
    else if (kind == "dirichlet")
      spec.boundary = BoundaryKind::dirichlet;
    else
      fail(line_of("boundary", "kind"), "boundary kind must be robin, neumann or dirichlet");

    if (has("disturbances", "sup_f_override"))
      sc.sup_f_override = non_negative("disturbances", "sup_f_override");
    if (has("disturbances", "sup_d_override"))
      sc.sup_d_override = non_negative("disturbances", "sup_d_override");

    const int nr = static_cast<int>(integer("grid", "nr"));
    const double dt = number("grid", "dt");
    const double T = number("grid", "T");
    try {
      sc.grid = RadialGrid(nr, R);
    } catch (const Error& e) {
      fail(line_of("grid", "nr"), e.what());
    }
    try {
      sc.time = TimeGrid(dt, T);
    } catch (const Error& e) {
      fail(line_of("grid", "dt"), e.what());
    }
    spec.horizon = T;
    sc.snapshot_stride = static_cast<int>(integer("grid", "snapshot_stride"));
    if (sc.snapshot_stride < 1)
      fail(line_of("grid", "snapshot_stride"), "snapshot_stride must be >= 1");
    if (has("grid", "newton_tol")) {
      sc.solver.newton_tol = number("grid", "newton_tol");
      if (!(sc.solver.newton_tol > 0.0))
        fail(line_of("grid", "newton_tol"), "newton_tol must be positive");
    }
    if (has("grid", "newton_max")) {
      sc.solver.newton_max = static_cast<int>(integer("grid", "newton_max"));
      if (sc.solver.newton_max < 1)
        fail(line_of("grid", "newton_max"), "newton_max must be >= 1");
    }
    if (has("grid", "scheme")) {
      const std::string s = text("grid", "scheme");
      if (s == "backward_euler")
        sc.solver.scheme = TimeScheme::backward_euler;
      else if (s == "crank_nicolson")
        sc.solver.scheme = TimeScheme::crank_nicolson;
      else
        fail(line_of("grid", "scheme"), "scheme must be backward_euler or crank_nicolson");
    }

    auto& k = spec.constants;
    k.a_lower = number("bounds", "a_lower");
    k.a_upper = number("bounds", "a_upper");
    k.b_upper = number("bounds", "b_upper");
    k.c_lower = number("bounds", "c_lower");
    if (has("bounds", "b_lower"))
      k.b_lower = number("bounds", "b_lower");
    sc.trace.safety_factor = number("bounds", "trace_safety_factor");
    if (!(sc.trace.safety_factor >= 1.0))
      fail(line_of("bounds", "trace_safety_factor"), "trace_safety_factor must be >= 1");
    if (has("bounds", "trace_constant")) {
      sc.trace.override_value = number("bounds", "trace_constant");
      if (!(*sc.trace.override_value > 0.0))
        fail(line_of("bounds", "trace_constant"), "trace_constant must be positive");
    }
    const std::string measure = text("bounds", "neumann_gain_measure");
    if (measure == "sphere")
      sc.neumann_gain_measure = GainMeasure::sphere;
    else if (measure == "ball")
      sc.neumann_gain_measure = GainMeasure::ball;
    else
      fail(line_of("bounds", "neumann_gain_measure"), "neumann_gain_measure must be sphere or ball");
    k.trace_constant = trace_constant(spec.geometry, sc.trace);

    sc.verify.tol = non_negative("verify", "tol");
    if (has("verify", "residual_tol_scale"))
      sc.verify.residual_tol_scale = non_negative("verify", "residual_tol_scale");
    return sc;
  }

private:
  std::string source_;
  RawScenario raw_;
  std::map<std::string, int> section_lines_;

  [[noreturn]] void fail(int line, const std::string& msg) const
  {
    throw LoadError(source_ + ":" + std::to_string(line) + ": " + msg);
  }

  void read(std::string_view text)
  {
    const auto& schema = scenario_schema();
    const SectionSpec* current = nullptr;
    std::string section;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto end = text.find('\n', pos);
      std::string_view line =
          text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
      pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string_view::npos)
        line = line.substr(0, hash);
      const std::string content = trim(line);
      if (content.empty())
        continue;
      if (content.front() == '[') {
        if (content.back() != ']')
          fail(line_no, "malformed section header '" + content + "'");
        section = trim(std::string_view(content).substr(1, content.size() - 2));
        current = nullptr;
        for (const auto& s : schema)
          if (s.name == section)
            current = &s;
        if (!current)
          fail(line_no, "unknown section [" + section + "]");
        if (section_lines_.count(section))
          fail(line_no, "duplicate section [" + section + "]");
        section_lines_[section] = line_no;
        raw_[section];
        continue;
      }
      const auto eq = content.find('=');
      if (eq == std::string::npos)
        fail(line_no, "expected 'key = value'");
      if (!current)
        fail(line_no, "key outside of any section");
      const std::string key = trim(std::string_view(content).substr(0, eq));
      const std::string value = trim(std::string_view(content).substr(eq + 1));
      bool known = false;
      for (const auto& k : current->keys)
        known = known || k.name == key;
      if (!known)
        fail(line_no, "unknown key '" + key + "' in section [" + section + "]");
      if (raw_[section].count(key))
        fail(line_no, "duplicate key '" + key + "' in section [" + section + "]");
      if (value.empty())
        fail(line_no, "empty value for key '" + key + "'");
      raw_[section][key] = Entry{value, line_no};
    }
    for (const auto& s : schema) {
      if (!raw_.count(std::string(s.name)))
        fail(line_no, "missing section [" + std::string(s.name) + "]");
      for (const auto& k : s.keys)
        if (k.required && !raw_.at(std::string(s.name)).count(std::string(k.name)))
          fail(section_lines_.at(std::string(s.name)),
               "missing key '" + std::string(k.name) + "' in section [" + std::string(s.name) +
                   "]");
    }
  }

  bool has(const std::string& s, const std::string& k) const
  {
    auto it = raw_.find(s);
    return it != raw_.end() && it->second.count(k);
  }

  const Entry& entry(const std::string& s, const std::string& k) const { return raw_.at(s).at(k); }
  int line_of(const std::string& s, const std::string& k) const
  {
    return has(s, k) ? entry(s, k).line : section_lines_.at(s);
  }
  std::string text(const std::string& s, const std::string& k) const { return entry(s, k).value; }

  double number(const std::string& s, const std::string& k) const
  {
    const auto& e = entry(s, k);
    double v = 0.0;
    const auto* first = e.value.data();
    const auto* last = first + e.value.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v))
      fail(e.line, "'" + k + "' must be a number, got '" + e.value + "'");
    return v;
  }

  double non_negative(const std::string& s, const std::string& k) const
  {
    const double v = number(s, k);
    if (v < 0.0)
      fail(entry(s, k).line, "'" + k + "' must be non-negative");
    return v;
  }

  long integer(const std::string& s, const std::string& k) const
  {
    const auto& e = entry(s, k);
    long v = 0;
    const auto* first = e.value.data();
    const auto* last = first + e.value.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
      fail(e.line, "'" + k + "' must be an integer, got '" + e.value + "'");
    return v;
  }

  expr::Expression expression(const std::string& s, const std::string& k,
                              std::initializer_list<expr::Var> allowed) const
  {
    const auto& e = entry(s, k);
    expr::Expression ex;
    try {
      ex = expr::parse(e.value);
    } catch (const Error& err) {
      fail(e.line, "in '" + k + "': " + err.what());
    }
    for (auto v : {expr::Var::r, expr::Var::t, expr::Var::u}) {
      if (std::find(allowed.begin(), allowed.end(), v) == allowed.end() && ex.depends_on(v))
        fail(e.line, "'" + k + "' must not depend on '" + std::string(1, expr::name_of(v)) + "'");
    }
    return ex;
  }
};

}  // namespace detail

inline Scenario parse_scenario(std::string_view text, const std::string& source = "<scenario>")
{
  return detail::ScenarioReader(source, text).build();
}

inline Scenario load_scenario(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw LoadError(path.string() + ": cannot open scenario file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.string());
}

enum class ExampleVariant { robin, dirichlet, neumann, neumann_linear };

inline const char* to_string(ExampleVariant v)
{
  switch (v) {
    case ExampleVariant::robin: return "robin";
    case ExampleVariant::dirichlet: return "dirichlet";
    case ExampleVariant::neumann: return "neumann";
    case ExampleVariant::neumann_linear: return "neumann_linear";
  }
  return "?";
}

inline std::optional<ExampleVariant> parse_example_variant(std::string_view s)
{
  for (auto v : {ExampleVariant::robin, ExampleVariant::dirichlet, ExampleVariant::neumann,
                 ExampleVariant::neumann_linear})
    if (s == to_string(v))
      return v;
  return std::nullopt;
}

/// Shipped scenarios for the superlinear example u ln(1 + u^2) on the unit disc.
inline std::string example_scenario(ExampleVariant variant = ExampleVariant::robin)
{
  const bool linear = variant == ExampleVariant::neumann_linear;
  const std::string kind = linear ? "neumann" : to_string(variant);
  const std::string psi = linear ? "u" : "u + u^3";
  std::string s;
  s += "# Superlinear reaction u ln(1 + u^2) on the unit disc, " + kind +
       " condition with psi = " + psi + ",\n";
  s += "# driven by the boundary disturbance d(t) = sin(t)^2.\n\n";
  s += "[geometry]\nn = 2\nR = 1\n\n";
  s += "[coefficients]\na = 1\nb = 0\nc = 1\n\n";
  s += "[nonlinearity]\nh = u*ln(1 + u^2)\n\n";
  s += "[boundary]\nkind = " + kind + "\npsi = " + psi + "\n\n";
  s += "[disturbances]\nf = 0\nd = sin(t)^2\n\n";
  s += "[initial]\nphi = 0.5*(1 - r^2)^2\n\n";
  s += "[grid]\nnr = 201\ndt = 0.001\nT = 2\nsnapshot_stride = 100\n\n";
  s += "[bounds]\na_lower = 1\na_upper = 1\nb_upper = 0\nc_lower = 1\n";
  s += "trace_safety_factor = 1.1\nneumann_gain_measure = sphere\n\n";
  s += "[verify]\ntol = 0.02\n";
  return s;
}

}  // namespace issp
