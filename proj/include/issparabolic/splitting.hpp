#pragma once

// Splitting u = v + w and the checks that compare simulated trajectories with
// the maximum principle, the maximum estimates, the Lyapunov decay of w and
// the ISS envelope of u.

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bounds.hpp"
#include "errors.hpp"
#include "problem.hpp"
#include "solver.hpp"

namespace issp {

enum class Verdict { pass, fail, not_applicable };

inline const char* to_string(Verdict v)
{
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::not_applicable: return "n/a";
  }
  return "?";
}

/// One verified claim: a measured curve against its bound curve.
/// Relative claims measure (measured - bound) / bound, absolute claims
/// measured - bound; the claim passes iff the worst violation <= tolerance.
struct ClaimResult
{
  std::string claim;
  std::vector<double> t;
  std::vector<double> measured;
  std::vector<double> bound;
  double max_violation = -std::numeric_limits<double>::infinity();
  double tolerance = 0.0;
  bool relative = true;
  Verdict verdict = Verdict::not_applicable;
  std::string note;

  bool passed() const { return verdict != Verdict::fail; }
};

struct VerificationReport
{
  std::vector<ClaimResult> claims;

  bool all_passed() const
  {
    return std::all_of(claims.begin(), claims.end(), [](const auto& c) { return c.passed(); });
  }

  void append(const VerificationReport& other)
  {
    claims.insert(claims.end(), other.claims.begin(), other.claims.end());
  }

  const ClaimResult* find(std::string_view name) const
  {
    for (const auto& c : claims)
      if (c.claim == name)
        return &c;
    return nullptr;
  }
};

inline double violation(double measured, double bound, bool relative)
{
  if (!relative)
    return measured - bound;
  if (bound > 0.0)
    return (measured - bound) / bound;
  return measured > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

inline ClaimResult make_claim(std::string name, std::vector<double> t, std::vector<double> measured,
                              std::vector<double> bound, double tol, bool relative,
                              std::string note = {})
{
  ClaimResult c;
  c.claim = std::move(name);
  c.tolerance = tol;
  c.relative = relative;
  c.note = std::move(note);
  for (std::size_t i = 0; i < t.size(); ++i)
    c.max_violation = std::max(c.max_violation, violation(measured[i], bound[i], relative));
  c.verdict = c.max_violation <= tol ? Verdict::pass : Verdict::fail;
  c.t = std::move(t);
  c.measured = std::move(measured);
  c.bound = std::move(bound);
  return c;
}

inline VerificationReport single(ClaimResult c)
{
  VerificationReport r;
  r.claims.push_back(std::move(c));
  return r;
}

/// Same problem with zero initial data.
inline ProblemSpec build_v_spec(const ProblemSpec& spec)
{
  ProblemSpec v = spec;
  v.phi = expr::Expression::constant(0.0);
  return v;
}

struct SplitRun
{
  SolutionTrajectory u_traj;
  SolutionTrajectory v_traj;
  std::vector<double> w_series;  // ||u - v|| at u_traj.times
  std::vector<double> residual_times;
  std::vector<double> residual_series;  // max-norm of the discrete w-equation residual
};

/// Max-norm residual of the w-equation between consecutive snapshots:
///   (w_new - w_old) / tau + [S(u_new) - S(v_new)]
/// where S is the discrete spatial operator (the forcing f cancels) and the
/// last row is the difference of the boundary closures.
inline std::pair<std::vector<double>, std::vector<double>>
w_equation_residuals(const SplitRun& run, const ProblemSpec& spec)
{
  const auto& us = run.u_traj.snapshots;
  const auto& vs = run.v_traj.snapshots;
  if (run.u_traj.grid.nodes != run.v_traj.grid.nodes ||
      run.u_traj.grid.radius != run.v_traj.grid.radius)
    throw PreconditionError("u and v trajectories live on different grids");
  if (us.size() != vs.size() || run.u_traj.snapshot_stride != run.v_traj.snapshot_stride ||
      run.u_traj.dt != run.v_traj.dt)
    throw PreconditionError("u and v trajectories have mismatched snapshot strides");
  for (std::size_t k = 0; k < us.size(); ++k)
    if (us[k].step != vs[k].step || us[k].state.time != vs[k].state.time)
      throw PreconditionError("u and v snapshots are taken at different times");

  const RadialGrid& grid = run.u_traj.grid;
  RadialDiscretization disc_u(spec, grid);
  RadialDiscretization disc_v(build_v_spec(spec), grid);
  const std::size_t N = grid.size();
  std::vector<double> times, values;
  std::vector<double> su(N), sv(N);
  for (std::size_t k = 1; k < us.size(); ++k) {
    const auto& u_new = us[k].state.values;
    const auto& u_old = us[k - 1].state.values;
    const auto& v_new = vs[k].state.values;
    const auto& v_old = vs[k - 1].state.values;
    const double t = us[k].state.time;
    const double tau = t - us[k - 1].state.time;
    const auto coeff = disc_u.coefficients(t);
    disc_u.interior(coeff, u_new, su);
    disc_v.interior(coeff, v_new, sv);
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < N; ++i) {
      const double dw = ((u_new[i] - v_new[i]) - (u_old[i] - v_old[i])) / tau;
      worst = std::max(worst, std::abs(dw + su[i] - sv[i]));
    }
    const double bu = disc_u.boundary(u_new, t).residual;
    const double bv = disc_v.boundary(v_new, t).residual;
    worst = std::max(worst, std::abs(bu - bv));
    times.push_back(t);
    values.push_back(worst);
  }
  return {std::move(times), std::move(values)};
}

/// Solves the u- and v-problems (optionally concurrently) and forms w = u - v
/// at every step.
inline SplitRun run_split(const ProblemSpec& spec, const RadialGrid& grid, const TimeGrid& time,
                          int snapshot_stride, const SolverOptions& opts = {},
                          bool concurrent = false)
{
  const ProblemSpec v_spec = build_v_spec(spec);
  std::vector<std::vector<double>> u_fields, v_fields;
  auto solve_into = [&](const ProblemSpec& s, std::vector<std::vector<double>>& fields) {
    return solve(s, grid, time, snapshot_stride, opts,
                 [&fields](int, const StateField& st) { fields.push_back(st.values); });
  };
  SplitRun run;
  if (concurrent) {
    auto fu = std::async(std::launch::async, [&] { return solve_into(spec, u_fields); });
    run.v_traj = solve_into(v_spec, v_fields);
    run.u_traj = fu.get();
  } else {
    run.u_traj = solve_into(spec, u_fields);
    run.v_traj = solve_into(v_spec, v_fields);
  }
  run.w_series.reserve(u_fields.size());
  std::vector<double> w(grid.size());
  for (std::size_t k = 0; k < u_fields.size(); ++k) {
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] = u_fields[k][i] - v_fields[k][i];
    run.w_series.push_back(l2_norm(w, spec.geometry));
  }
  auto [rt, rv] = w_equation_residuals(run, spec);
  run.residual_times = std::move(rt);
  run.residual_series = std::move(rv);
  return run;
}

/// Discrete weak maximum principle. With f <= 0 on the sampled grid, the
/// running maximum of u never exceeds max(0, max over the discrete parabolic
/// boundary); with f >= 0 the symmetric minimum statement is checked.
/// Absolute tolerance.
inline VerificationReport check_max_principle(const SolutionTrajectory& traj,
                                              const ProblemSpec& spec, double tol)
{
  const RadialGrid& grid = traj.grid;
  bool nonpos = true, nonneg = true;
  for (double t : traj.times) {
    for (int i = 0; i < grid.nodes; ++i) {
      const double fv = eval_rt(spec.f, grid.node(i), t);
      nonpos = nonpos && fv <= 0.0;
      nonneg = nonneg && fv >= 0.0;
    }
    if (!nonpos && !nonneg)
      break;
  }
  VerificationReport report;
  if (!nonpos && !nonneg) {
    ClaimResult c;
    c.claim = "max_principle";
    c.verdict = Verdict::not_applicable;
    c.tolerance = tol;
    c.relative = false;
    c.note = "f changes sign on the grid";
    report.claims.push_back(std::move(c));
    return report;
  }
  if (traj.snapshots.empty())
    throw PreconditionError("check_max_principle: trajectory has no snapshots");

  const auto& initial = traj.snapshots.front().state.values;
  auto run = [&](double sign, const char* name) {
    // sign = +1 checks the maximum, -1 the minimum (as a maximum of -u).
    double boundary_max = 0.0;
    for (double v : initial)
      boundary_max = std::max(boundary_max, sign * v);
    std::vector<double> t, measured, bound;
    std::size_t series = 0;
    for (const auto& snap : traj.snapshots) {
      while (series < traj.times.size() && traj.times[series] <= snap.state.time) {
        boundary_max = std::max(boundary_max, sign * traj.boundary_value[series]);
        ++series;
      }
      double m = -std::numeric_limits<double>::infinity();
      for (double v : snap.state.values)
        m = std::max(m, sign * v);
      t.push_back(snap.state.time);
      measured.push_back(m);
      bound.push_back(boundary_max);
    }
    report.claims.push_back(make_claim(name, std::move(t), std::move(measured), std::move(bound),
                                       tol, false));
  };
  if (nonpos)
    run(+1.0, "max_principle");
  if (nonneg)
    run(-1.0, "min_principle");
  return report;
}

enum class MaxEstimateKind { robin_prop, dirichlet_prop };

inline MaxEstimateKind max_estimate_kind_for(BoundaryKind k)
{
  return k == BoundaryKind::dirichlet ? MaxEstimateKind::dirichlet_prop
                                      : MaxEstimateKind::robin_prop;
}

/// The closed-form sup bound on v (zero initial data). Neumann problems use the
/// Robin estimate with boundary data psi^{-1}(d).
inline double v_max_bound(const ProblemSpec& spec, MaxEstimateKind which,
                          const DisturbanceMagnitudes& mags)
{
  DisturbanceMagnitudes m = mags;
  m.sup_phi = 0.0;
  m.l2_phi = 0.0;
  if (which == MaxEstimateKind::dirichlet_prop)
    return max_estimate_dirichlet(spec.constants, m, spec.psi);
  if (spec.boundary == BoundaryKind::neumann)
    m.sup_d = invert_psi(spec.psi, m.sup_d);
  return max_estimate_robin(spec.constants, spec.geometry, m);
}

inline VerificationReport check_max_estimate(const SolutionTrajectory& v_traj,
                                             const ProblemSpec& spec, MaxEstimateKind which,
                                             const DisturbanceMagnitudes& mags, double tol)
{
  const double b = v_max_bound(spec, which, mags);
  std::vector<double> bound(v_traj.times.size(), b);
  return single(make_claim("max_estimate_v", v_traj.times, v_traj.sup_norm, std::move(bound), tol,
                           true,
                           which == MaxEstimateKind::robin_prop ? "p R^2 + q" : "three-way max"));
}

/// Forcing data of the Gronwall envelope used for Neumann problems:
/// ||w||^2 <= ||phi||^2 e^{-lambda t} + (a_upper^2 / (eps lambda)) |dB_R| max|v|^2.
struct GronwallForcing
{
  double squared_rate = 0.0;  // lambda
  double epsilon = 0.0;
  double a_upper = 0.0;
  double sphere_area = 0.0;
  std::vector<double> v_sup;  // sup|v| at the w_series times
};

inline GronwallForcing gronwall_forcing(const ProblemSpec& spec, const SplitRun& run)
{
  GronwallForcing g;
  g.epsilon = choose_epsilon(spec.constants);
  g.squared_rate = neumann_lambda(spec.constants, g.epsilon);
  g.a_upper = spec.constants.a_upper;
  g.sphere_area = sphere_area(spec.geometry);
  g.v_sup = run.v_traj.sup_norm;
  return g;
}

/// ||w(t)|| <= ||phi|| e^{-lambda t}, or the Gronwall envelope when forcing is given.
inline VerificationReport check_lyapunov_decay(const SplitRun& run, double lambda, double l2_phi,
                                               double tol,
                                               const std::optional<GronwallForcing>& forcing = {})
{
  const auto& times = run.u_traj.times;
  std::vector<double> bound(times.size());
  double vmax = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!forcing) {
      bound[k] = l2_phi * std::exp(-lambda * times[k]);
      continue;
    }
    vmax = std::max(vmax, forcing->v_sup[k]);
    const double lam = forcing->squared_rate;
    bound[k] = std::sqrt(l2_phi * l2_phi * std::exp(-lam * times[k]) +
                         forcing->a_upper * forcing->a_upper / (forcing->epsilon * lam) *
                             forcing->sphere_area * vmax * vmax);
  }
  return single(make_claim("lyapunov_decay_w", times, run.w_series, std::move(bound), tol, true,
                           forcing ? "Gronwall envelope" : "exponential envelope"));
}

/// Time average of the max-norm w-equation residual, weighting each snapshot
/// interval by its length. Data that only meet the first-order compatibility
/// condition give an initial layer where the pointwise residual decays like
/// tau^(1/2); the average stays O(dr^2 + tau).
inline double w_residual_norm(const std::vector<double>& times, const std::vector<double>& series)
{
  double weighted = 0.0, span = 0.0, prev = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double w = times[k] - prev;
    weighted += w * series[k];
    span += w;
    prev = times[k];
  }
  return span > 0.0 ? weighted / span : 0.0;
}

inline double w_residual_norm(const SplitRun& run)
{
  return w_residual_norm(run.residual_times, run.residual_series);
}

/// Asserts w_residual_norm <= tol_scale * (dr^2 + tau) with tau the snapshot spacing.
inline VerificationReport check_w_equation_residual(const SplitRun& run, const ProblemSpec& spec,
                                                    double tol_scale)
{
  const auto [times, values] = w_equation_residuals(run, spec);
  const double dr = run.u_traj.grid.spacing();
  const double tau = run.u_traj.dt * run.u_traj.snapshot_stride;
  const double t_end = run.u_traj.times.empty() ? 0.0 : run.u_traj.times.back();
  return single(make_claim("w_equation_residual", {t_end}, {w_residual_norm(times, values)},
                           {tol_scale * (dr * dr + tau)}, 0.0, false, "time-averaged max norm"));
}

/// ||u(t)|| <= estimate(t).total for every recorded t.
inline VerificationReport verify_iss(const SolutionTrajectory& u_traj, const EstimateFn& estimate,
                                     double tol)
{
  std::vector<double> bound;
  bound.reserve(u_traj.times.size());
  for (double t : u_traj.times)
    bound.push_back(estimate(t).total);
  return single(make_claim("iss_envelope", u_traj.times, u_traj.l2_norm, std::move(bound), tol,
                           true));
}

/// Least-squares decay rate -d/dt ln(series) over [t0, t1].
inline double measured_decay_rate(const std::vector<double>& times,
                                  const std::vector<double>& series, double t0, double t1)
{
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int count = 0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < t0 || times[k] > t1 || !(series[k] > 0.0))
      continue;
    const double y = std::log(series[k]);
    sx += times[k];
    sy += y;
    sxx += times[k] * times[k];
    sxy += times[k] * y;
    ++count;
  }
  if (count < 2)
    throw PreconditionError("measured_decay_rate: fewer than two positive samples in the window");
  const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  return -slope;
}

/// Magnitudes sampled on the solver grids; declared overrides replace the
/// sampled sup|f| and sup|d|.
inline DisturbanceMagnitudes grid_magnitudes(const ProblemSpec& spec, const RadialGrid& grid,
                                             const TimeGrid& time,
                                             std::optional<double> sup_f_override = {},
                                             std::optional<double> sup_d_override = {})
{
  DisturbanceMagnitudes m;
  const int steps = time.steps();
  for (int k = 0; k <= steps; ++k) {
    const double t = time.time(k);
    m.sup_d = std::max(m.sup_d, std::abs(eval_d(spec.d, t)));
    for (int i = 0; i < grid.nodes; ++i)
      m.sup_f = std::max(m.sup_f, std::abs(eval_rt(spec.f, grid.node(i), t)));
  }
  const auto phi = sample_initial(spec, grid);
  m.sup_phi = sup_norm(phi);
  m.l2_phi = l2_norm(phi, spec.geometry);
  if (sup_f_override)
    m.sup_f = *sup_f_override;
  if (sup_d_override)
    m.sup_d = *sup_d_override;
  return m;
}

}  // namespace issp
