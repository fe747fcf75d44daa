#pragma once

// Helpers shared by the unit tests and the acceptance runner: problem
// builders, random generators and closed-form oracles written independently
// of the library code paths.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "issparabolic/issparabolic.hpp"

namespace testsupport {

using issp::expr::Expression;
using issp::expr::parse;

inline std::string num(double v) { return issp::io::format_number(v); }

inline std::string scenario_path(const std::string& name)
{
  return std::string(ISSP_SCENARIO_DIR) + "/" + name;
}

/// Manufactured solution u = e^{-t} (1 - r^2/R^2)^2 of
///   u_t - Lap u + u + u^3 = f,   u_r + u + u^3 = 0 on r = R.
inline issp::ProblemSpec manufactured_spec(int n, double R, double horizon)
{
  issp::ProblemSpec s;
  s.geometry = issp::BallGeometry(n, R);
  s.a = Expression::constant(1.0);
  s.b_radial = Expression::constant(0.0);
  s.c = Expression::constant(1.0);
  s.h = parse("u^3");
  s.psi = parse("u + u^3");
  s.d = Expression::constant(0.0);
  const std::string R2 = num(R * R), R4 = num(R * R * R * R);
  const std::string g = "((1 - r^2/" + R2 + ")^2)";
  const std::string lap = "(" + num(-4.0 * n) + "/" + R2 + " + " + num(4.0 * n + 8.0) + "*r^2/" +
                          R4 + ")";
  s.f = parse("-exp(-t)*" + lap + " + exp(-3*t)*" + g + "^3");
  s.phi = parse(g);
  s.boundary = issp::BoundaryKind::robin;
  s.horizon = horizon;
  return s;
}

inline double manufactured_exact(double r, double t, double R)
{
  const double g = 1.0 - r * r / (R * R);
  return std::exp(-t) * g * g;
}

/// Max-in-time L2 error against the manufactured solution.
inline double manufactured_error(const issp::ProblemSpec& s, const issp::RadialGrid& grid,
                                 const issp::TimeGrid& time,
                                 const issp::SolverOptions& opts = {})
{
  double worst = 0.0;
  std::vector<double> e(grid.size());
  issp::solve(s, grid, time, 1 << 30, opts, [&](int, const issp::StateField& st) {
    for (int i = 0; i < grid.nodes; ++i)
      e[static_cast<std::size_t>(i)] = st.values[static_cast<std::size_t>(i)] -
                                       manufactured_exact(grid.node(i), st.time, s.geometry.radius);
    worst = std::max(worst, issp::l2_norm(e, s.geometry));
  });
  return worst;
}

/// Randomised scenario meeting every validator, with f of fixed sign.
/// `sign` = +1 gives f >= 0, -1 gives f <= 0.
inline issp::ProblemSpec random_validated_spec(std::mt19937_64& rng, double sign, double& horizon)
{
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto pick = [&](std::initializer_list<const char*> xs) {
    std::vector<const char*> v(xs);
    return std::string(v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)]);
  };
  issp::ProblemSpec s;
  const int n = std::uniform_int_distribution<int>(1, 3)(rng);
  const double R = 0.5 + 1.5 * U(rng);
  s.geometry = issp::BallGeometry(n, R);
  const double a0 = 0.5 + U(rng);
  const double c0 = 0.5 + U(rng);
  s.a = parse(num(a0) + "*(1 + 0.2*r^2/" + num(R * R) + ")");
  s.b_radial = Expression::constant(0.0);
  s.c = parse(num(c0) + " + 0.5*sin(t)^2");
  s.h = parse(pick({"u^3", "u*ln(1 + u^2)", "tanh(u)", "u*abs(u)"}));
  s.psi = parse(pick({"u", "u + u^3", "u + tanh(u)"}));
  const double F = 0.5 + 2.0 * U(rng);
  s.f = parse(num(sign * F) + "*(1 + r^2)*exp(-t)");
  const double D = 0.2 + 2.0 * U(rng);
  s.d = parse(num(sign * D) + "*sin(t)^2");
  const double A = (U(rng) - 0.5) * 2.0;
  s.phi = parse(num(A) + "*(1 - r^2/" + num(R * R) + ")^2");
  const int kind = std::uniform_int_distribution<int>(0, 2)(rng);
  s.boundary = kind == 0 ? issp::BoundaryKind::robin
               : kind == 1 ? issp::BoundaryKind::neumann
                           : issp::BoundaryKind::dirichlet;
  horizon = 1.0;
  s.horizon = horizon;
  auto& k = s.constants;
  k.a_lower = a0;
  k.a_upper = 1.2 * a0 + 0.8 * a0 / R;
  k.b_upper = 0.0;
  k.c_lower = c0;
  k.trace_constant = issp::trace_constant(s.geometry, {});
  return s;
}

/// Random expression in r, t, u whose every subterm is defined on all of R^3.
class ExpressionGenerator
{
public:
  explicit ExpressionGenerator(std::uint64_t seed) : rng_(seed) {}

  Expression next(int depth = 4) { return Expression(node(depth)); }

private:
  std::mt19937_64 rng_;

  int roll(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

  issp::expr::NodePtr leaf()
  {
    using namespace issp::expr;
    switch (roll(4)) {
      case 0: return Expression::variable(Var::r).root_ptr();
      case 1: return Expression::variable(Var::t).root_ptr();
      case 2: return Expression::variable(Var::u).root_ptr();
      default: {
        // Short decimals and a few awkward doubles.
        const double v = roll(3) == 0 ? std::uniform_real_distribution<double>(-3.0, 3.0)(rng_)
                                      : (roll(41) - 20) / 4.0;
        return fold::num(v);
      }
    }
  }

  issp::expr::NodePtr node(int depth)
  {
    using namespace issp::expr;
    if (depth <= 0 || roll(5) == 0)
      return leaf();
    auto a = node(depth - 1);
    auto square_plus_one = [&](NodePtr x) {
      return fold::add(fold::num(1.0), fold::pow(std::move(x), fold::num(2.0)));
    };
    switch (roll(11)) {
      case 0: return fold::add(a, node(depth - 1));
      case 1: return fold::sub(a, node(depth - 1));
      case 2: return fold::mul(a, node(depth - 1));
      case 3: return fold::div(a, square_plus_one(node(depth - 1)));
      case 4: return fold::pow(a, fold::num(static_cast<double>(2 + roll(2))));
      case 5: return fold::neg(a);
      case 6: return fold::call(Func::sin, a);
      case 7: return fold::call(Func::cos, a);
      case 8: return fold::call(Func::tanh, a);
      case 9: return fold::call(Func::ln, square_plus_one(a));
      default: return fold::call(Func::sqrt, square_plus_one(a));
    }
  }
};

/// Real root of u + u^3 = y by Cardano's formula, written as t - 1/(3t) with
/// t = cbrt(|y|/2 + sqrt(y^2/4 + 1/27)) so no cancellation occurs.
inline long double cardano_inverse(long double y)
{
  const long double q = std::abs(y) / 2.0L;
  const long double t = std::cbrt(q + std::sqrt(q * q + 1.0L / 27.0L));
  const long double root = t - 1.0L / (3.0L * t);
  return y < 0.0L ? -root : root;
}

/// Continuous radial trace constant: the supremum over radial H^1 functions
/// of sqrt|dB_R| |u(R)| / (||u|| + ||grad u||). For fixed s the extremal of
/// ||u||^2/s + ||grad u||^2/(1-s) with u(R) = 1 solves u'' + (n-1)/r u' = k^2 u,
/// k^2 = (1-s)/s, giving the value |dB_R| u'(R) / (1-s), so
/// C^2 = max_s (1-s) / u'(R).
inline double radial_trace_oracle(int n, double R)
{
  auto log_derivative = [&](double s) {
    const double k = std::sqrt((1.0 - s) / s);
    const double x = k * R;
    if (n == 1)
      return k * std::tanh(x);
    const double nu = 0.5 * n - 1.0;
    return k * std::cyl_bessel_i(nu + 1.0, x) / std::cyl_bessel_i(nu, x);
  };
  auto objective = [&](double s) { return (1.0 - s) / log_derivative(s); };
  double best_s = 0.5, best = 0.0;
  const int M = 20000;
  for (int i = 1; i < M; ++i) {
    const double s = static_cast<double>(i) / M;
    const double v = objective(s);
    if (v > best) {
      best = v;
      best_s = s;
    }
  }
  double lo = std::max(1e-9, best_s - 1.0 / M), hi = std::min(1.0 - 1e-9, best_s + 1.0 / M);
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (objective(m1) < objective(m2))
      lo = m1;
    else
      hi = m2;
  }
  return std::sqrt(objective(0.5 * (lo + hi)));
}

}  // namespace testsupport
