#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "errors.hpp"

namespace issp {

/// Open ball B_R in R^n centred at the origin.
struct BallGeometry
{
  int dimension = 1;
  double radius = 1.0;

  BallGeometry() = default;
  BallGeometry(int n, double r) : dimension(n), radius(r)
  {
    if (n < 1)
      throw PreconditionError("ball dimension must be >= 1");
    if (!(r > 0.0) || !std::isfinite(r))
      throw PreconditionError("ball radius must be a positive finite number");
  }
};

/// Gamma function at positive integers and half-integers, built by the
/// recurrence Gamma(m + 1) = m Gamma(m) from Gamma(1) = 1 or Gamma(1/2) = sqrt(pi).
inline double gamma_half_integer(double m)
{
  const double twice = 2.0 * m;
  if (!(m > 0.0) || !std::isfinite(m) || std::nearbyint(twice) != twice)
    throw DomainError("gamma_half_integer: argument must be a positive integer or half-integer");
  const bool half = static_cast<long long>(twice) % 2 == 1;
  double value = half ? std::sqrt(std::numbers::pi) : 1.0;
  for (double x = half ? 0.5 : 1.0; x < m; x += 1.0)
    value *= x;
  return value;
}

/// |dB_1|, the surface measure of the unit sphere.
inline double unit_sphere_area(int n)
{
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / gamma_half_integer(0.5 * n);
}

inline double ball_volume(const BallGeometry& geom)
{
  const double half_n = 0.5 * geom.dimension;
  return std::pow(std::numbers::pi, half_n) * std::pow(geom.radius, geom.dimension) /
         (half_n * gamma_half_integer(half_n));
}

inline double sphere_area(const BallGeometry& geom)
{
  return unit_sphere_area(geom.dimension) * std::pow(geom.radius, geom.dimension - 1);
}

struct TraceEstimate
{
  double value = 0.0;
  int grid_resolution = 0;
  bool converged = false;
};

namespace detail {

// Symmetric tridiagonal matrix stored by diagonals; off[i] couples i and i+1.
struct SymTridiag
{
  std::vector<double> diag;
  std::vector<double> off;
};

struct RadialP1Matrices
{
  SymTridiag mass;       // L2(B_R) Gram matrix of radial hat functions
  SymTridiag stiffness;  // Gram matrix of their gradients
};

inline RadialP1Matrices radial_p1_matrices(const BallGeometry& geom, int intervals)
{
  // 5-point Gauss-Legendre on [0, 1]; exact for the mass integrand when n <= 8.
  static constexpr std::array<double, 5> xi = {
      0.04691007703066800, 0.23076534494715845, 0.5, 0.76923465505284155, 0.95308992296933200};
  static constexpr std::array<double, 5> wi = {
      0.11846344252809454, 0.23931433524968324, 0.28444444444444444, 0.23931433524968324,
      0.11846344252809454};
  const int n = geom.dimension;
  const double h = geom.radius / intervals;
  const double sphere = unit_sphere_area(n);
  const auto nodes = static_cast<std::size_t>(intervals) + 1;

  RadialP1Matrices mats;
  mats.mass.diag.assign(nodes, 0.0);
  mats.mass.off.assign(nodes - 1, 0.0);
  mats.stiffness.diag.assign(nodes, 0.0);
  mats.stiffness.off.assign(nodes - 1, 0.0);

  for (std::size_t e = 0; e + 1 < nodes; ++e) {
    const double ra = static_cast<double>(e) * h;
    const double rb = static_cast<double>(e + 1) * h;
    double maa = 0.0, mab = 0.0, mbb = 0.0;
    for (std::size_t q = 0; q < xi.size(); ++q) {
      const double r = ra + xi[q] * h;
      const double w = wi[q] * h * std::pow(r, n - 1);
      const double pa = 1.0 - xi[q];
      const double pb = xi[q];
      maa += w * pa * pa;
      mab += w * pa * pb;
      mbb += w * pb * pb;
    }
    mats.mass.diag[e] += sphere * maa;
    mats.mass.diag[e + 1] += sphere * mbb;
    mats.mass.off[e] += sphere * mab;

    const double k = sphere * (std::pow(rb, n) - std::pow(ra, n)) / (n * h * h);
    mats.stiffness.diag[e] += k;
    mats.stiffness.diag[e + 1] += k;
    mats.stiffness.off[e] -= k;
  }
  return mats;
}

inline double quadratic_form(const SymTridiag& m, std::span<const double> u)
{
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    s += m.diag[i] * u[i] * u[i];
    if (i + 1 < u.size())
      s += 2.0 * m.off[i] * u[i] * u[i + 1];
  }
  return s;
}

// min { u'(M/s + K/(1-s))u : u_last = 1 }, the Schur complement of the last
// node. With alpha = (1-s)/s the pivots of alpha M + K are k_i + gamma_i,
// where k_i are the element stiffnesses; recursing on the excess gamma_i
// avoids the cancellation plain elimination suffers as s -> 1.
inline double corner_schur(const RadialP1Matrices& mats, double s)
{
  const std::size_t n = mats.mass.diag.size();
  const double alpha = (1.0 - s) / s;
  const auto& m = mats.mass;
  const auto& K = mats.stiffness;
  double gamma = alpha * m.diag[0];
  for (std::size_t i = 1; i < n; ++i) {
    const double k = -K.off[i - 1];
    const double mo = alpha * m.off[i - 1];
    gamma = alpha * m.diag[i] + (k * gamma + mo * (2.0 * k - mo)) / (k + gamma);
  }
  return gamma / (1.0 - s);
}

}  // namespace detail

/// L2(B_R) norm of the radial piecewise-linear function with the given nodal
/// values on a uniform grid of values.size() - 1 intervals over [0, R].
inline double p1_l2_norm(const BallGeometry& geom, std::span<const double> values)
{
  const auto mats = detail::radial_p1_matrices(geom, static_cast<int>(values.size()) - 1);
  return std::sqrt(std::max(0.0, detail::quadratic_form(mats.mass, values)));
}

inline double p1_gradient_norm(const BallGeometry& geom, std::span<const double> values)
{
  const auto mats = detail::radial_p1_matrices(geom, static_cast<int>(values.size()) - 1);
  return std::sqrt(std::max(0.0, detail::quadratic_form(mats.stiffness, values)));
}

/// ||u||_{L2(dB_R)} / (||u|| + ||grad u||) for a radial piecewise-linear u.
inline double trace_quotient(const BallGeometry& geom, std::span<const double> values)
{
  const double denom = p1_l2_norm(geom, values) + p1_gradient_norm(geom, values);
  if (denom == 0.0)
    return 0.0;
  return std::sqrt(sphere_area(geom)) * std::abs(values.back()) / denom;
}

/// Largest trace quotient over radial piecewise-linear functions on a uniform
/// grid with `resolution` intervals.
///
/// Uses (x + y)^2 = min_{0<s<1} x^2/s + y^2/(1-s): for fixed s the constrained
/// quadratic problem min { u'(M/s + K/(1-s))u : u(R) = 1 } has the value
/// the Schur complement of the last node. A coarse scan of s picks the starting bracket, then
/// golden-section search refines it. The limit s -> 1 forces u constant and is
/// evaluated exactly as the total mass 1'M1; it is the optimum when constants
/// maximise the quotient (small radii).
inline TraceEstimate estimate_trace_constant(const BallGeometry& geom, int resolution,
                                             double tol = 1e-12, int max_iterations = 400)
{
  if (resolution < 16)
    throw PreconditionError("estimate_trace_constant: resolution must be >= 16");
  const auto mats = detail::radial_p1_matrices(geom, resolution);
  auto objective = [&](double s) { return detail::corner_schur(mats, s); };

  constexpr int scan = 64;
  int best = 1;
  double best_val = objective(1.0 / scan);
  for (int k = 2; k < scan; ++k) {
    const double v = objective(static_cast<double>(k) / scan);
    if (v < best_val) {
      best_val = v;
      best = k;
    }
  }
  double lo = static_cast<double>(best - 1) / scan;
  double hi = static_cast<double>(best + 1) / scan;
  if (lo <= 0.0)
    lo = 1e-14;
  if (hi >= 1.0)
    hi = 1.0 - 1e-14;

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = objective(x1);
  double f2 = objective(x2);
  int it = 0;
  for (; it < max_iterations && hi - lo > tol; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = objective(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = objective(x2);
    }
  }
  std::vector<double> ones(mats.mass.diag.size(), 1.0);
  const double constant_limit = detail::quadratic_form(mats.mass, ones);
  const double g_min = std::min({f1, f2, best_val, constant_limit});
  const double value = std::sqrt(sphere_area(geom) / g_min);
  if (!std::isfinite(value) || value <= 0.0)
    throw EstimationError("trace constant search produced a non-finite value", value);
  if (hi - lo > tol)
    throw EstimationError("trace constant search did not converge", value);
  return TraceEstimate{value, resolution, true};
}

struct TraceConstantConfig
{
  std::optional<double> override_value;
  double safety_factor = 1.1;
  int resolution = 200;
};

/// Trace constant actually used by the bounds: the user override when given,
/// otherwise the radial estimate inflated by the safety factor.
inline double trace_constant(const BallGeometry& geom, const TraceConstantConfig& cfg)
{
  if (cfg.override_value)
    return *cfg.override_value;
  return estimate_trace_constant(geom, cfg.resolution).value * cfg.safety_factor;
}

}  // namespace issp
