#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "exprlang.hpp"
#include "geometry.hpp"
#include "problem.hpp"

namespace issp {

/// Uniform radial grid r_i = i * R / (nodes - 1), i = 0..nodes-1.
struct RadialGrid
{
  int nodes = 3;
  double radius = 1.0;

  RadialGrid() = default;
  RadialGrid(int n, double r) : nodes(n), radius(r)
  {
    if (n < 3)
      throw PreconditionError("radial grid needs at least 3 nodes");
    if (!(r > 0.0))
      throw PreconditionError("radial grid radius must be positive");
  }

  double spacing() const { return radius / (nodes - 1); }
  double node(int i) const { return i == nodes - 1 ? radius : i * spacing(); }
  std::size_t size() const { return static_cast<std::size_t>(nodes); }
};

struct TimeGrid
{
  double dt = 1e-3;
  double horizon = 1.0;

  TimeGrid() = default;
  TimeGrid(double step, double T) : dt(step), horizon(T)
  {
    if (!(step > 0.0) || !(T > 0.0))
      throw PreconditionError("time step and horizon must be positive");
    if (step > T)
      throw PreconditionError("time step must not exceed the horizon");
  }

  int steps() const
  {
    const double q = horizon / dt;
    const double nearest = std::round(q);
    if (std::abs(q - nearest) <= 1e-9 * std::max(1.0, q))
      return static_cast<int>(nearest);
    return static_cast<int>(std::ceil(q));
  }

  double time(int k) const { return k >= steps() ? horizon : k * dt; }
};

struct StateField
{
  std::vector<double> values;
  double time = 0.0;
};

struct Snapshot
{
  int step = 0;
  StateField state;
};

/// Norm time series (one entry per time step, starting at t = 0) plus
/// snapshots of the full field every `stride` steps.
struct SolutionTrajectory
{
  std::vector<double> times;
  std::vector<double> l2_norm;
  std::vector<double> sup_norm;
  std::vector<double> boundary_value;
  std::vector<int> newton_iters;
  std::vector<Snapshot> snapshots;
  int snapshot_stride = 1;
  double dt = 0.0;
  RadialGrid grid;
};

enum class TimeScheme { backward_euler, crank_nicolson };

struct SolverOptions
{
  double newton_tol = 1e-10;
  int newton_max = 25;
  int max_halvings = 10;
  TimeScheme scheme = TimeScheme::backward_euler;
};

class StepFailure : public Error
{
public:
  StepFailure(const std::string& message, double residual) : Error(message), residual_(residual) {}
  double last_residual() const noexcept { return residual_; }

private:
  double residual_;
};

/// A solve aborted; the trajectory up to the failing step is retained.
class SolverError : public Error
{
public:
  SolverError(const std::string& message, SolutionTrajectory partial, double residual)
      : Error(message), partial_(std::move(partial)), residual_(residual)
  {}
  const SolutionTrajectory& partial() const noexcept { return partial_; }
  double last_residual() const noexcept { return residual_; }

private:
  SolutionTrajectory partial_;
  double residual_;
};

/// L2(B_R) norm of nodal values by the composite trapezoid rule in r with
/// weight |dB_1| r^(n-1).
inline double l2_norm(std::span<const double> values, const BallGeometry& geom)
{
  const std::size_t N = values.size();
  const double dr = geom.radius / static_cast<double>(N - 1);
  const int n = geom.dimension;
  double sum = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double r = i + 1 == N ? geom.radius : static_cast<double>(i) * dr;
    const double w = (i == 0 || i + 1 == N) ? 0.5 : 1.0;
    sum += w * values[i] * values[i] * std::pow(r, n - 1);
  }
  return std::sqrt(unit_sphere_area(n) * sum * dr);
}

inline double l2_norm(const StateField& s, const BallGeometry& geom) { return l2_norm(s.values, geom); }

/// Trapezoid-rule measure of B_R on an N-node grid (l2_norm of the constant 1).
inline double discrete_ball_volume(std::size_t N, const BallGeometry& geom)
{
  const std::vector<double> ones(N, 1.0);
  const double v = l2_norm(ones, geom);
  return v * v;
}

inline double sup_norm(std::span<const double> values)
{
  double m = 0.0;
  for (double v : values)
    m = std::max(m, std::abs(v));
  return m;
}

inline double sup_norm(const StateField& s) { return sup_norm(s.values); }

/// Finite-difference discretisation of the radial problem.
///
/// Rows 0..N-2 carry the spatial operator
///   -div(a grad u) + b u_r + c u + h(r, t, u) - f(r, t)
/// in conservative radial form (symmetric stencil with factor 2n at r = 0);
/// row N-1 carries the boundary closure at r = R.
class RadialDiscretization
{
public:
  RadialDiscretization(const ProblemSpec& spec, RadialGrid grid)
      : spec_(spec),
        grid_(grid),
        dh_du_(expr::derivative(spec.h, expr::Var::u)),
        dpsi_du_(expr::derivative(spec.psi, expr::Var::u))
  {
    const std::size_t N = grid_.size();
    const int n = spec_.geometry.dimension;
    const double dr = grid_.spacing();
    r_.resize(N);
    w_plus_.assign(N, 0.0);
    w_minus_.assign(N, 0.0);
    for (std::size_t i = 0; i < N; ++i)
      r_[i] = grid_.node(static_cast<int>(i));
    for (std::size_t i = 1; i + 1 < N; ++i) {
      const double ri = r_[i];
      w_plus_[i] = std::pow((ri + 0.5 * dr) / ri, n - 1);
      w_minus_[i] = std::pow((ri - 0.5 * dr) / ri, n - 1);
    }
  }

  const ProblemSpec& spec() const { return spec_; }
  const RadialGrid& grid() const { return grid_; }
  std::span<const double> nodes() const { return r_; }

  struct Coefficients
  {
    double t = 0.0;
    std::vector<double> a, b, c, f;
  };

  Coefficients coefficients(double t) const
  {
    Coefficients k;
    k.t = t;
    fill(spec_.a, t, a_cache_, k.a);
    fill(spec_.b_radial, t, b_cache_, k.b);
    fill(spec_.c, t, c_cache_, k.c);
    fill(spec_.f, t, f_cache_, k.f);
    return k;
  }

  /// Spatial rows 0..N-2 at time k.t, written to out[0..N-2].
  void interior(const Coefficients& k, std::span<const double> u, std::span<double> out) const
  {
    const std::size_t N = grid_.size();
    const int n = spec_.geometry.dimension;
    const double dr = grid_.spacing();
    const double inv_dr2 = 1.0 / (dr * dr);
    out[0] = -2.0 * n * k.a[0] * (u[1] - u[0]) * inv_dr2 + k.c[0] * u[0] +
             spec_.h(r_[0], k.t, u[0]) - k.f[0];
    for (std::size_t i = 1; i + 1 < N; ++i) {
      const double ap = 0.5 * (k.a[i] + k.a[i + 1]) * w_plus_[i];
      const double am = 0.5 * (k.a[i - 1] + k.a[i]) * w_minus_[i];
      const double diffusion = (ap * (u[i + 1] - u[i]) - am * (u[i] - u[i - 1])) * inv_dr2;
      const double drift = k.b[i] * (u[i + 1] - u[i - 1]) / (2.0 * dr);
      out[i] = -diffusion + drift + k.c[i] * u[i] + spec_.h(r_[i], k.t, u[i]) - k.f[i];
    }
  }

  /// Value prescribed by the pre-inverted Neumann/Dirichlet conditions.
  double boundary_target(double t) const { return invert_psi(spec_.psi, eval_d(spec_.d, t)); }

  struct BoundaryRow
  {
    double residual = 0.0;
    double d3 = 0.0;  // partial derivatives w.r.t. u[N-3], u[N-2], u[N-1]
    double d2 = 0.0;
    double d1 = 0.0;
  };

  /// Boundary closure with the one-sided derivative (3u_N - 4u_{N-1} + u_{N-2}) / (2 dr).
  BoundaryRow boundary(std::span<const double> u, double t) const
  {
    const std::size_t N = grid_.size();
    const double dr = grid_.spacing();
    const double slope = (3.0 * u[N - 1] - 4.0 * u[N - 2] + u[N - 3]) / (2.0 * dr);
    BoundaryRow row;
    switch (spec_.boundary) {
      case BoundaryKind::robin:
        row.residual = slope + eval_u(spec_.psi, u[N - 1]) - eval_d(spec_.d, t);
        row.d3 = 1.0 / (2.0 * dr);
        row.d2 = -4.0 / (2.0 * dr);
        row.d1 = 3.0 / (2.0 * dr) + eval_u(dpsi_du_, u[N - 1]);
        break;
      case BoundaryKind::neumann:
        row.residual = slope - boundary_target(t);
        row.d3 = 1.0 / (2.0 * dr);
        row.d2 = -4.0 / (2.0 * dr);
        row.d1 = 3.0 / (2.0 * dr);
        break;
      case BoundaryKind::dirichlet:
        row.residual = u[N - 1] - boundary_target(t);
        row.d1 = 1.0;
        break;
    }
    return row;
  }

  /// Backward Euler (theta = 1) or Crank-Nicolson (theta = 1/2) step by
  /// Newton iteration on the full nonlinear system. Returns Newton iterations.
  int step(std::span<const double> u_old, double t0, double dt, const SolverOptions& opts,
           std::vector<double>& u) const
  {
    const std::size_t N = grid_.size();
    const double theta = opts.scheme == TimeScheme::crank_nicolson ? 0.5 : 1.0;
    const double t1 = t0 + dt;
    const auto k1 = coefficients(t1);
    std::vector<double> explicit_part(N, 0.0);
    if (theta < 1.0) {
      interior(coefficients(t0), u_old, explicit_part);
      for (auto& v : explicit_part)
        v *= (1.0 - theta) * dt;
    }

    u.assign(u_old.begin(), u_old.end());
    std::vector<double> F(N), lower(N, 0.0), diag(N, 0.0), upper(N, 0.0), s(N, 0.0);
    double prev = 0.0;
    int growth = 0;
    const double n = spec_.geometry.dimension;
    const double dr = grid_.spacing();
    const double inv_dr2 = 1.0 / (dr * dr);

    for (int it = 0;; ++it) {
      interior(k1, u, s);
      for (std::size_t i = 0; i + 1 < N; ++i)
        F[i] = u[i] - u_old[i] + theta * dt * s[i] + explicit_part[i];
      const auto brow = boundary(u, t1);
      F[N - 1] = brow.residual;

      double norm = 0.0;
      for (double v : F)
        norm = std::max(norm, std::abs(v));
      if (!std::isfinite(norm))
        throw StepFailure("non-finite Newton residual", norm);
      if (norm <= opts.newton_tol)
        return it;
      if (it >= opts.newton_max)
        throw StepFailure("Newton iteration cap reached", norm);
      if (it > 0 && norm > prev) {
        if (++growth >= 3)
          throw StepFailure("Newton residual grew for 3 consecutive iterates", norm);
      } else {
        growth = 0;
      }
      prev = norm;

      const double td = theta * dt;
      diag[0] = 1.0 + td * (2.0 * n * k1.a[0] * inv_dr2 + k1.c[0] + dh_du_(r_[0], t1, u[0]));
      upper[0] = -td * 2.0 * n * k1.a[0] * inv_dr2;
      for (std::size_t i = 1; i + 1 < N; ++i) {
        const double ap = 0.5 * (k1.a[i] + k1.a[i + 1]) * w_plus_[i] * inv_dr2;
        const double am = 0.5 * (k1.a[i - 1] + k1.a[i]) * w_minus_[i] * inv_dr2;
        const double bc = k1.b[i] / (2.0 * dr);
        lower[i] = td * (-am - bc);
        diag[i] = 1.0 + td * (ap + am + k1.c[i] + dh_du_(r_[i], t1, u[i]));
        upper[i] = td * (-ap + bc);
      }
      // Boundary row touches u[N-3]; eliminate it with row N-2.
      double bl = brow.d2, bd = brow.d1, rhs_b = -F[N - 1];
      std::vector<double> rhs(N);
      for (std::size_t i = 0; i < N; ++i)
        rhs[i] = -F[i];
      if (brow.d3 != 0.0) {
        const double l = lower[N - 2];
        if (l == 0.0)
          throw StepFailure("singular boundary elimination", norm);
        const double m = brow.d3 / l;
        bl -= m * diag[N - 2];
        bd -= m * upper[N - 2];
        rhs_b -= m * rhs[N - 2];
      }
      lower[N - 1] = bl;
      diag[N - 1] = bd;
      rhs[N - 1] = rhs_b;

      // Thomas algorithm.
      for (std::size_t i = 1; i < N; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
      }
      std::vector<double>& delta = rhs;
      delta[N - 1] = rhs[N - 1] / diag[N - 1];
      for (std::size_t i = N - 1; i-- > 0;)
        delta[i] = (rhs[i] - upper[i] * delta[i + 1]) / diag[i];
      for (std::size_t i = 0; i < N; ++i)
        u[i] += delta[i];
    }
  }

private:
  struct Cache
  {
    bool valid = false;
    std::vector<double> values;
  };

  void fill(const expr::Expression& e, double t, Cache& cache, std::vector<double>& out) const
  {
    const bool steady = !e.depends_on(expr::Var::t);
    if (steady && cache.valid) {
      out = cache.values;
      return;
    }
    out.resize(r_.size());
    for (std::size_t i = 0; i < r_.size(); ++i)
      out[i] = eval_rt(e, r_[i], t);
    if (steady) {
      cache.values = out;
      cache.valid = true;
    }
  }

  ProblemSpec spec_;
  RadialGrid grid_;
  expr::Expression dh_du_;
  expr::Expression dpsi_du_;
  std::vector<double> r_, w_plus_, w_minus_;
  mutable Cache a_cache_, b_cache_, c_cache_, f_cache_;
};

/// Spatial part of the discrete system: entries 0..N-2 are the interior rows,
/// entry N-1 is the boundary-closure residual at time t.
inline std::vector<double> spatial_operator(const ProblemSpec& spec, const RadialGrid& grid,
                                            const StateField& state, double t)
{
  RadialDiscretization disc(spec, grid);
  std::vector<double> out(grid.size(), 0.0);
  disc.interior(disc.coefficients(t), state.values, out);
  out.back() = disc.boundary(state.values, t).residual;
  return out;
}

/// Boundary-closure residual at r = R (the last row of the Newton system).
inline double apply_boundary(const ProblemSpec& spec, const RadialGrid& grid,
                             const StateField& state, double t)
{
  return RadialDiscretization(spec, grid).boundary(state.values, t).residual;
}

struct StepResult
{
  StateField state;
  int newton_iterations = 0;
};

namespace detail {

inline StepResult advance(const RadialDiscretization& disc, const StateField& old, double dt,
                          const SolverOptions& opts, int depth)
{
  StepResult res;
  try {
    res.newton_iterations = disc.step(old.values, old.time, dt, opts, res.state.values);
    res.state.time = old.time + dt;
    return res;
  } catch (const StepFailure&) {
    if (depth >= opts.max_halvings)
      throw;
  } catch (const DomainError& e) {
    if (depth >= opts.max_halvings)
      throw StepFailure(std::string("evaluation failed during Newton iteration: ") + e.what(),
                        std::numeric_limits<double>::infinity());
  }
  auto first = advance(disc, old, 0.5 * dt, opts, depth + 1);
  auto second = advance(disc, first.state, 0.5 * dt, opts, depth + 1);
  second.newton_iterations += first.newton_iterations;
  return second;
}

}  // namespace detail

/// One implicit step from `state` at time t, halving dt on Newton failure up
/// to opts.max_halvings times.
inline StepResult step_implicit(const ProblemSpec& spec, const RadialGrid& grid,
                                const StateField& state, double t, double dt,
                                const SolverOptions& opts = {})
{
  if (!(opts.newton_tol > 0.0))
    throw PreconditionError("newton_tol must be positive");
  RadialDiscretization disc(spec, grid);
  StateField old = state;
  old.time = t;
  return detail::advance(disc, old, dt, opts, 0);
}

inline std::vector<double> sample_initial(const ProblemSpec& spec, const RadialGrid& grid)
{
  std::vector<double> u(grid.size());
  for (int i = 0; i < grid.nodes; ++i)
    u[static_cast<std::size_t>(i)] = eval_phi(spec.phi, grid.node(i));
  return u;
}

using StepObserver = std::function<void(int step, const StateField&)>;

/// Marches from phi to the horizon, recording norms every step and snapshots
/// every `snapshot_stride` steps (and at the final step). `observer`, when
/// set, sees every accepted state including the initial one.
inline SolutionTrajectory solve(const ProblemSpec& spec, const RadialGrid& grid,
                                const TimeGrid& time, int snapshot_stride,
                                const SolverOptions& opts = {},
                                const StepObserver& observer = {})
{
  if (snapshot_stride < 1)
    throw PreconditionError("snapshot_stride must be >= 1");
  if (!(opts.newton_tol > 0.0))
    throw PreconditionError("newton_tol must be positive");
  RadialDiscretization disc(spec, grid);

  SolutionTrajectory traj;
  traj.snapshot_stride = snapshot_stride;
  traj.dt = time.dt;
  traj.grid = grid;
  auto record = [&](const StateField& s, int step, int iters) {
    traj.times.push_back(s.time);
    traj.l2_norm.push_back(l2_norm(s, spec.geometry));
    traj.sup_norm.push_back(sup_norm(s));
    traj.boundary_value.push_back(s.values.back());
    traj.newton_iters.push_back(iters);
    if (step % snapshot_stride == 0 || step == time.steps())
      traj.snapshots.push_back(Snapshot{step, s});
    if (observer)
      observer(step, s);
  };

  StateField current{sample_initial(spec, grid), 0.0};
  record(current, 0, 0);
  const int steps = time.steps();
  for (int k = 1; k <= steps; ++k) {
    const double t0 = time.time(k - 1);
    const double t1 = time.time(k);
    try {
      auto res = detail::advance(disc, current, t1 - t0, opts, 0);
      current = std::move(res.state);
      current.time = t1;
      record(current, k, res.newton_iterations);
    } catch (const StepFailure& e) {
      throw SolverError("step " + std::to_string(k) + " (t = " + std::to_string(t1) +
                            ") failed: " + e.what(),
                        std::move(traj), e.last_residual());
    }
  }
  return traj;
}

}  // namespace issp
