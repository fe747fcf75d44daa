#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "exprlang.hpp"
#include "geometry.hpp"

namespace issp {

enum class BoundaryKind { robin, neumann, dirichlet };

inline const char* to_string(BoundaryKind k)
{
  switch (k) {
    case BoundaryKind::robin: return "robin";
    case BoundaryKind::neumann: return "neumann";
    case BoundaryKind::dirichlet: return "dirichlet";
  }
  return "?";
}

/// Envelope constants of the structural conditions. b_lower is recorded but
/// never enters a bound.
struct BoundConstants
{
  double a_lower = 1.0;
  double a_upper = 1.0;
  double b_lower = 0.0;
  double b_upper = 0.0;
  double c_lower = 1.0;
  double trace_constant = 1.0;
};

/// One radially symmetric problem instance on B_R x (0, horizon].
///
/// a, c, b_radial and f are read as functions of (r, t); h of (r, t, u);
/// psi of u; d of t; phi of r. b_radial is the radial component of the drift.
struct ProblemSpec
{
  BallGeometry geometry;
  expr::Expression a = expr::Expression::constant(1.0);
  expr::Expression b_radial = expr::Expression::constant(0.0);
  expr::Expression c = expr::Expression::constant(1.0);
  expr::Expression h = expr::Expression::constant(0.0);
  expr::Expression psi = expr::Expression::variable(expr::Var::u);
  expr::Expression f = expr::Expression::constant(0.0);
  expr::Expression d = expr::Expression::constant(0.0);
  expr::Expression phi = expr::Expression::constant(0.0);
  BoundaryKind boundary = BoundaryKind::robin;
  BoundConstants constants;
  double horizon = 1.0;
};

// Evaluation helpers fixing the argument conventions above.
inline double eval_rt(const expr::Expression& e, double r, double t) { return e(r, t, 0.0); }
inline double eval_u(const expr::Expression& e, double u) { return e(0.0, 0.0, u); }
inline double eval_d(const expr::Expression& d, double t) { return d(0.0, t, 0.0); }
inline double eval_phi(const expr::Expression& phi, double r) { return phi(r, 0.0, 0.0); }

struct CheckResult
{
  std::string name;
  bool passed = false;
  double r = 0.0;  // worst-case witness
  double t = 0.0;
  double u = 0.0;
  double value = 0.0;   // checked quantity at the witness
  double margin = 0.0;  // >= 0 means satisfied (strict checks need > 0)
  std::string note;
};

struct ValidationReport
{
  std::vector<CheckResult> checks;

  bool all_passed() const
  {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }

  const CheckResult* find(std::string_view name) const
  {
    for (const auto& c : checks)
      if (c.name == name)
        return &c;
    return nullptr;
  }

  void append(const ValidationReport& other)
  {
    checks.insert(checks.end(), other.checks.begin(), other.checks.end());
  }

  std::string table() const
  {
    std::ostringstream os;
    os << "check                         result  margin        witness (r, t, u)\n";
    for (const auto& c : checks) {
      os.width(30);
      os << std::left << c.name << (c.passed ? "pass    " : "FAIL    ");
      os.width(14);
      os << c.margin << "(" << c.r << ", " << c.t << ", " << c.u << ")";
      if (!c.note.empty())
        os << "  " << c.note;
      os << '\n';
    }
    return os.str();
  }
};

namespace detail {

// Tracks the smallest margin seen over a sampled check.
struct WorstCase
{
  CheckResult result;
  bool seen = false;

  explicit WorstCase(std::string name) { result.name = std::move(name); }

  void observe(double margin, double value, double r, double t, double u)
  {
    if (!seen || margin < result.margin) {
      seen = true;
      result.margin = margin;
      result.value = value;
      result.r = r;
      result.t = t;
      result.u = u;
    }
  }

  CheckResult finish(bool strict = false, std::string note = {})
  {
    result.passed = seen && (strict ? result.margin > 0.0 : result.margin >= 0.0);
    result.note = std::move(note);
    return result;
  }
};

inline double sample_point(double lo, double hi, int k, int count)
{
  if (count <= 1)
    return lo;
  return lo + (hi - lo) * static_cast<double>(k) / (count - 1);
}

template <typename F>
auto at_point(F&& f, const char* what, double r, double t)
{
  try {
    return f();
  } catch (const Error& e) {
    std::ostringstream os;
    os << what << ": evaluation failed at r=" << r << ", t=" << t << ": " << e.what();
    throw ValidationError(os.str());
  }
}

}  // namespace detail

/// div b for a radial drift field b(r) e_r; the removable singularity at the
/// origin is replaced by its limit n * db/dr(0).
inline double radial_divergence(const expr::Expression& b, const expr::Expression& db_dr, int n,
                                double r, double t)
{
  if (r == 0.0)
    return n * eval_rt(db_dr, 0.0, t);
  return eval_rt(db_dr, r, t) + (n - 1) * eval_rt(b, r, t) / r;
}

/// Checks the envelope inequalities on sampled coefficient values and the two
/// strict inequalities tying b_upper, c_lower, a_lower and the trace constant.
inline ValidationReport validate_structural(const ProblemSpec& spec, int samples)
{
  if (samples < 100)
    throw PreconditionError("validate_structural: samples must be >= 100");
  const auto& k = spec.constants;
  const double c2 = k.trace_constant * k.trace_constant;
  ValidationReport report;

  {
    CheckResult order;
    order.name = "constants_order";
    order.margin = std::min({k.a_lower, k.a_upper - k.a_lower, k.c_lower, k.b_upper,
                             k.trace_constant});
    order.passed = k.a_lower > 0.0 && k.a_lower <= k.a_upper && k.c_lower > 0.0 &&
                   k.b_upper >= 0.0 && k.trace_constant > 0.0;
    order.note = "0 < a_lower <= a_upper, c_lower > 0, b_upper >= 0, trace_constant > 0";
    report.checks.push_back(order);
  }
  {
    CheckResult first;
    first.name = "drift_vs_reaction";
    first.value = k.b_upper * (1.0 + 2.0 * c2);
    first.margin = 2.0 * k.c_lower - first.value;
    first.passed = first.value < 2.0 * k.c_lower;
    first.note = "b_upper (1 + 2 C^2) < 2 c_lower";
    report.checks.push_back(first);
  }
  {
    CheckResult second;
    second.name = "drift_vs_diffusion";
    second.value = k.b_upper * c2;
    second.margin = k.a_lower - second.value;
    second.passed = second.value < k.a_lower;
    second.note = "b_upper C^2 < a_lower";
    report.checks.push_back(second);
  }

  const int n = spec.geometry.dimension;
  const double R = spec.geometry.radius;
  const auto da = expr::derivative(spec.a, expr::Var::r);
  const auto db = expr::derivative(spec.b_radial, expr::Var::r);

  detail::WorstCase a_low("diffusion_lower"), a_up("diffusion_upper"), a_grad("diffusion_gradient"),
      b_env("drift_envelope"), c_low("reaction_lower");
  for (int i = 0; i < samples; ++i) {
    const double r = detail::sample_point(0.0, R, i, samples);
    for (int j = 0; j < samples; ++j) {
      const double t = detail::sample_point(0.0, spec.horizon, j, samples);
      detail::at_point(
          [&] {
            const double av = eval_rt(spec.a, r, t);
            const double dav = std::abs(eval_rt(da, r, t));
            const double bv = eval_rt(spec.b_radial, r, t);
            const double divb = radial_divergence(spec.b_radial, db, n, r, t);
            const double cv = eval_rt(spec.c, r, t);
            a_low.observe(av - k.a_lower, av, r, t, 0.0);
            a_up.observe(k.a_upper - av, av, r, t, 0.0);
            a_grad.observe(k.a_upper - dav, dav, r, t, 0.0);
            const double bsum = std::abs(bv) + std::abs(divb);
            b_env.observe(k.b_upper - bsum, bsum, r, t, 0.0);
            c_low.observe(cv - k.c_lower, cv, r, t, 0.0);
            return 0;
          },
          "validate_structural", r, t);
    }
  }
  report.checks.push_back(a_low.finish(false, "a >= a_lower (sampled)"));
  report.checks.push_back(a_up.finish(false, "a <= a_upper (sampled)"));
  report.checks.push_back(a_grad.finish(false, "|grad a| <= a_upper (sampled)"));
  report.checks.push_back(b_env.finish(false, "|b| + |div b| <= b_upper (sampled)"));
  report.checks.push_back(c_low.finish(false, "c >= c_lower (sampled)"));
  return report;
}

enum class MonotoneRole { h, psi };

struct Interval
{
  double lo = -10.0;
  double hi = 10.0;
};

/// Sampled necessary conditions for the monotone nonlinearities: strictly
/// increasing in u, value(w) + value(-w) >= 0, and value 0 at u = 0.
/// For h, the (r, t) plane of `domain` x [0, horizon] is sampled as well.
inline ValidationReport validate_monotonicity(const expr::Expression& e, MonotoneRole role,
                                              int samples, Interval u_range,
                                              const BallGeometry& domain = {}, double horizon = 1.0)
{
  if (samples < 100)
    throw PreconditionError("validate_monotonicity: samples must be >= 100");
  if (!(u_range.lo <= 0.0 && 0.0 <= u_range.hi) || !(u_range.lo < u_range.hi))
    throw PreconditionError("validate_monotonicity: u_range must contain 0");

  const std::string prefix = role == MonotoneRole::h ? "h_" : "psi_";
  const int plane = role == MonotoneRole::h ? std::max(2, samples / 10) : 1;
  const double wmax = std::min(-u_range.lo, u_range.hi);

  detail::WorstCase inc(prefix + "strictly_increasing"), odd(prefix + "odd_sum_nonnegative"),
      zero(prefix + "zero_at_origin");
  for (int i = 0; i < plane; ++i) {
    const double r = role == MonotoneRole::h ? detail::sample_point(0.0, domain.radius, i, plane) : 0.0;
    for (int j = 0; j < plane; ++j) {
      const double t = role == MonotoneRole::h ? detail::sample_point(0.0, horizon, j, plane) : 0.0;
      detail::at_point(
          [&] {
            double prev = e(r, t, u_range.lo);
            for (int k = 1; k < samples; ++k) {
              const double u = detail::sample_point(u_range.lo, u_range.hi, k, samples);
              const double cur = e(r, t, u);
              inc.observe(cur - prev, cur, r, t, u);
              prev = cur;
            }
            for (int k = 0; k < samples; ++k) {
              const double w = detail::sample_point(0.0, wmax, k, samples);
              const double plus = e(r, t, w);
              const double minus = e(r, t, -w);
              const double sum = plus + minus;
              const double slack = 1e-12 * (1.0 + std::abs(plus) + std::abs(minus));
              odd.observe(sum + slack, sum, r, t, w);
            }
            const double at0 = e(r, t, 0.0);
            zero.observe(1e-12 - std::abs(at0), at0, r, t, 0.0);
            return 0;
          },
          "validate_monotonicity", r, t);
    }
  }
  ValidationReport report;
  report.checks.push_back(inc.finish(true, "sampled"));
  report.checks.push_back(odd.finish(false, "sampled"));
  report.checks.push_back(zero.finish(false, "sampled"));
  return report;
}

/// Compatibility of initial and boundary data at t = 0, plus phi'(0) = 0.
inline ValidationReport validate_compatibility(const ProblemSpec& spec)
{
  constexpr double tol = 1e-10;
  const double R = spec.geometry.radius;
  ValidationReport report;
  auto push = [&](std::string name, double residual, double r, std::string note) {
    CheckResult c;
    c.name = std::move(name);
    c.value = residual;
    c.margin = tol - std::abs(residual);
    c.passed = std::abs(residual) <= tol;
    c.r = r;
    c.note = std::move(note);
    report.checks.push_back(std::move(c));
  };
  detail::at_point(
      [&] {
        const auto dphi = expr::derivative(spec.phi, expr::Var::r);
        const double phi_R = eval_phi(spec.phi, R);
        const double slope_R = eval_phi(dphi, R);
        push("disturbance_zero_at_start", eval_d(spec.d, 0.0), R, "d(0) = 0");
        switch (spec.boundary) {
          case BoundaryKind::robin:
            push("boundary_compatible", slope_R + eval_u(spec.psi, phi_R), R,
                 "phi'(R) + psi(phi(R)) = 0");
            break;
          case BoundaryKind::neumann:
            push("boundary_compatible", eval_u(spec.psi, slope_R), R, "psi(phi'(R)) = 0");
            break;
          case BoundaryKind::dirichlet:
            push("boundary_compatible", eval_u(spec.psi, phi_R), R, "psi(phi(R)) = 0");
            break;
        }
        push("initial_symmetric_at_origin", eval_phi(dphi, 0.0), 0.0, "phi'(0) = 0");
        return 0;
      },
      "validate_compatibility", R, 0.0);
  return report;
}

/// Solves psi(u) = y for strictly increasing psi with psi(0) = 0.
/// Brackets by doubling from [-1, 1], bisects, then polishes with Newton steps
/// that are kept inside the bracket.
inline double invert_psi(const expr::Expression& psi, double y, double tol = 1e-12)
{
  if (!(tol > 0.0))
    throw PreconditionError("invert_psi: tol must be positive");
  auto g = [&](double u) { return eval_u(psi, u) - y; };
  double lo = -1.0, hi = 1.0;
  int doublings = 0;
  while (g(lo) > 0.0) {
    if (++doublings > 60)
      throw InversionError("invert_psi: no bracket found for y = " + std::to_string(y));
    hi = lo;
    lo *= 2.0;
  }
  while (g(hi) < 0.0) {
    if (++doublings > 60)
      throw InversionError("invert_psi: no bracket found for y = " + std::to_string(y));
    lo = hi;
    hi *= 2.0;
  }
  const double scale = 1.0 + std::abs(y);
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if (gm == 0.0)
      return mid;
    if (gm < 0.0)
      lo = mid;
    else
      hi = mid;
    if (std::abs(gm) <= tol && hi - lo <= 1e-6 * (1.0 + std::abs(mid)))
      break;
    if (hi - lo <= std::numeric_limits<double>::epsilon() * (1.0 + std::abs(mid)))
      break;
  }
  const auto dpsi = expr::derivative(psi, expr::Var::u);
  double u = mid;
  for (int it = 0; it < 8; ++it) {
    const double gu = g(u);
    if (std::abs(gu) <= 1e-3 * tol)
      break;
    const double slope = eval_u(dpsi, u);
    if (!(slope > 0.0) || !std::isfinite(slope))
      break;
    const double next = u - gu / slope;
    if (!(next >= lo && next <= hi) || next == u)
      break;
    u = next;
  }
  if (std::abs(g(u)) > tol && std::abs(g(u)) > 1e-15 * scale)
    throw InversionError("invert_psi: tolerance not reached for y = " + std::to_string(y));
  return u;
}

}  // namespace issp
