#pragma once

// Command implementations behind the issparabolic executable. Every command
// returns one of the exit codes below; exceptions never escape.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "bounds.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "problem.hpp"
#include "scenario.hpp"
#include "solver.hpp"
#include "splitting.hpp"

namespace issp {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int load_error = 1;
inline constexpr int validation_failed = 2;
inline constexpr int solver_failed = 3;
inline constexpr int bound_violated = 4;
inline constexpr int estimator_failed = 5;
}  // namespace exit_code

inline constexpr int structural_samples = 100;
inline constexpr int monotonicity_samples = 401;

/// Structural, monotonicity and compatibility checks of a loaded scenario.
inline ValidationReport validate_scenario(const Scenario& sc)
{
  const auto& spec = sc.spec;
  ValidationReport report = validate_structural(spec, structural_samples);
  report.append(validate_monotonicity(spec.h, MonotoneRole::h, monotonicity_samples, Interval{},
                                      spec.geometry, spec.horizon));
  report.append(
      validate_monotonicity(spec.psi, MonotoneRole::psi, monotonicity_samples, Interval{}));
  report.append(validate_compatibility(spec));
  return report;
}

struct VerifyOutcome
{
  int code = exit_code::ok;
  std::string message;
  ValidationReport validation;
  std::optional<SplitRun> run;
  DisturbanceMagnitudes mags;
  VerificationReport report;
  std::vector<double> bound_times;
  std::vector<IssEstimate> bounds;
  double response = 0.0;    // max_t ||v(t)||
  double max_u_norm = 0.0;  // max_t ||u(t)||
  double gain_bound = 0.0;  // disturbance part of the envelope
};

/// The verify-iss pipeline without any file output.
inline VerifyOutcome run_verification(const Scenario& sc, std::optional<double> tol_override = {},
                                      bool concurrent = false)
{
  VerifyOutcome out;
  const auto& spec = sc.spec;
  const double tol = tol_override.value_or(sc.verify.tol);

  out.validation = validate_scenario(sc);
  if (!out.validation.all_passed()) {
    out.code = exit_code::validation_failed;
    out.message = "validation failed";
    return out;
  }

  try {
    out.run = run_split(spec, sc.grid, sc.time, sc.snapshot_stride, sc.solver, concurrent);
  } catch (const SolverError& e) {
    out.code = exit_code::solver_failed;
    out.message = e.what();
    return out;
  }
  const SplitRun& run = *out.run;
  out.mags = grid_magnitudes(spec, sc.grid, sc.time, sc.sup_f_override, sc.sup_d_override);

  const double principle_tol = 10.0 * sc.solver.newton_tol;
  auto& report = out.report;
  for (auto [traj, suffix] : {std::pair{&run.u_traj, "_u"}, std::pair{&run.v_traj, "_v"}}) {
    auto r = check_max_principle(*traj, spec, principle_tol);
    for (auto& c : r.claims)
      c.claim += suffix;
    report.append(r);
  }
  report.append(check_max_estimate(run.v_traj, spec, max_estimate_kind_for(spec.boundary),
                                   out.mags, tol));

  const auto& k = spec.constants;
  switch (spec.boundary) {
    case BoundaryKind::robin:
      report.append(check_lyapunov_decay(run, decay_rate_robin(k), out.mags.l2_phi, tol));
      break;
    case BoundaryKind::dirichlet:
      report.append(check_lyapunov_decay(run, decay_rate_dirichlet(k), out.mags.l2_phi, tol));
      break;
    case BoundaryKind::neumann:
      report.append(check_lyapunov_decay(run, 0.0, out.mags.l2_phi, tol, gronwall_forcing(spec, run)));
      break;
  }
  report.append(check_w_equation_residual(run, spec, sc.verify.residual_tol_scale));

  const auto estimate = iss_estimate_for(spec.boundary, k, spec.geometry, out.mags, spec.psi,
                                         sc.neumann_gain_measure);
  report.append(verify_iss(run.u_traj, estimate, tol));

  for (double t : run.u_traj.times) {
    out.bound_times.push_back(t);
    out.bounds.push_back(estimate(t));
  }
  const auto& last = out.bounds.back();
  out.gain_bound = spec.boundary == BoundaryKind::dirichlet ? std::max(last.gain_d, last.gain_f)
                                                            : last.gain_d + last.gain_f;
  out.response = *std::max_element(run.v_traj.l2_norm.begin(), run.v_traj.l2_norm.end());
  out.max_u_norm = *std::max_element(run.u_traj.l2_norm.begin(), run.u_traj.l2_norm.end());
  out.code = report.all_passed() ? exit_code::ok : exit_code::bound_violated;
  return out;
}

inline void write_verification(const std::filesystem::path& dir, const VerifyOutcome& out)
{
  if (!out.run)
    return;
  io::write_trajectory(dir, out.run->u_traj, "u_trajectory.csv", false);
  io::write_trajectory(dir, out.run->v_traj, "v_trajectory.csv", false);
  {
    auto os = io::open_for_write(dir / "w_norm.csv");
    os << "t,w_l2_norm\n";
    for (std::size_t k = 0; k < out.run->w_series.size(); ++k)
      os << io::format_number(out.run->u_traj.times[k]) << ','
         << io::format_number(out.run->w_series[k]) << '\n';
  }
  if (!out.bounds.empty()) {
    auto os = io::open_for_write(dir / "iss_bound.csv");
    io::write_bound_header(os);
    for (std::size_t k = 0; k < out.bounds.size(); ++k)
      io::write_bound_row(os, out.bound_times[k], out.bounds[k]);
  }
  if (!out.report.claims.empty()) {
    auto os = io::open_for_write(dir / "verification_report.csv");
    io::write_report_csv(os, out.report);
  }
}

inline void print_claims(std::ostream& os, const VerificationReport& report)
{
  os << "claim                      verdict  worst violation        tolerance\n";
  for (const auto& c : report.claims) {
    os << std::left << std::setw(27) << c.claim << std::setw(9) << to_string(c.verdict);
    if (c.verdict == Verdict::not_applicable)
      os << c.note << '\n';
    else
      os << std::setw(23) << io::format_number(c.max_violation) << io::format_number(c.tolerance)
         << (c.relative ? " (rel)" : " (abs)") << '\n';
  }
}

namespace detail {

// Runs `body`, mapping library exceptions onto the exit-code contract.
template <typename Body>
int guarded(std::ostream& err, Body&& body)
{
  try {
    return body();
  } catch (const LoadError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::load_error;
  } catch (const EstimationError& e) {
    err << "error: " << e.what() << " (best value " << e.best_value() << ")\n";
    return exit_code::estimator_failed;
  } catch (const InfeasibleError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::validation_failed;
  } catch (const SolverError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::solver_failed;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::load_error;
  }
}

}  // namespace detail

inline int cmd_validate(const std::filesystem::path& scenario, std::ostream& out, std::ostream& err)
{
  return detail::guarded(err, [&] {
    const auto sc = load_scenario(scenario);
    const auto report = validate_scenario(sc);
    out << "trace constant C = " << io::format_number(sc.spec.constants.trace_constant) << '\n';
    out << report.table();
    if (!report.all_passed()) {
      for (const auto& c : report.checks)
        if (!c.passed)
          err << "failed: " << c.name << " (" << c.note << ")\n";
      return exit_code::validation_failed;
    }
    return exit_code::ok;
  });
}

/// Validates first unless `force`; a forced run still reports failures on stderr.
inline int cmd_simulate(const std::filesystem::path& scenario, const std::filesystem::path& out_dir,
                        std::ostream& out, std::ostream& err, bool force = false)
{
  return detail::guarded(err, [&] {
    const auto sc = load_scenario(scenario);
    const auto report = validate_scenario(sc);
    if (!report.all_passed()) {
      err << report.table();
      if (!force)
        return exit_code::validation_failed;
      err << "warning: validation failed, continuing because of --force\n";
    }
    try {
      const auto traj = solve(sc.spec, sc.grid, sc.time, sc.snapshot_stride, sc.solver);
      io::write_trajectory(out_dir, traj);
      out << "steps " << traj.times.size() - 1 << ", final l2_norm "
          << io::format_number(traj.l2_norm.back()) << ", output in " << out_dir.string() << '\n';
      return exit_code::ok;
    } catch (const SolverError& e) {
      io::write_trajectory(out_dir, e.partial());
      err << "error: " << e.what() << "; partial output in " << out_dir.string() << '\n';
      return exit_code::solver_failed;
    }
  });
}

inline int cmd_verify_iss(const std::filesystem::path& scenario, const std::filesystem::path& out_dir,
                          std::ostream& out, std::ostream& err,
                          std::optional<double> tol_override = {})
{
  return detail::guarded(err, [&] {
    const auto sc = load_scenario(scenario);
    const auto result = run_verification(sc, tol_override, true);
    if (result.code == exit_code::validation_failed) {
      err << result.validation.table();
      return result.code;
    }
    if (result.code == exit_code::solver_failed) {
      err << "error: " << result.message << '\n';
      return result.code;
    }
    write_verification(out_dir, result);
    print_claims(out, result.report);
    out << (result.code == exit_code::ok ? "all claims hold" : "bound violated") << '\n';
    return result.code;
  });
}

inline int cmd_trace_constant(const std::filesystem::path& scenario, std::ostream& out,
                              std::ostream& err)
{
  return detail::guarded(err, [&] {
    const auto sc = load_scenario(scenario);
    const auto& g = sc.spec.geometry;
    const auto coarse = estimate_trace_constant(g, 200);
    const auto fine = estimate_trace_constant(g, 400);
    out << "n = " << g.dimension << ", R = " << io::format_number(g.radius) << '\n';
    out << "estimate (resolution 200): " << io::format_number(coarse.value) << '\n';
    out << "estimate (resolution 400): " << io::format_number(fine.value) << '\n';
    out << "relative drift: " << io::format_number(std::abs(fine.value - coarse.value) / fine.value)
        << '\n';
    out << "safety factor " << io::format_number(sc.trace.safety_factor) << ": "
        << io::format_number(fine.value * sc.trace.safety_factor) << '\n';
    if (sc.trace.override_value)
      out << "scenario override in effect: " << io::format_number(*sc.trace.override_value) << '\n';
    return exit_code::ok;
  });
}

/// Fan-out for sweeps, from ISSPARABOLIC_THREADS (default 1).
inline int sweep_threads()
{
  const char* env = std::getenv("ISSPARABOLIC_THREADS");
  if (!env)
    return 1;
  const int n = std::atoi(env);
  return std::max(1, n);
}

struct SweepRow
{
  double multiplier = 0.0;
  VerifyOutcome outcome;
};

inline Scenario scale_boundary_disturbance(Scenario sc, double multiplier)
{
  sc.spec.d = multiplier * sc.spec.d;
  if (sc.sup_d_override)
    *sc.sup_d_override *= multiplier;
  return sc;
}

/// Verify pipelines for every multiplier of d, in multiplier order.
inline std::vector<SweepRow> run_sweep(const Scenario& base, const std::vector<double>& multipliers,
                                       std::optional<double> tol_override = {}, int threads = 1)
{
  std::vector<SweepRow> rows(multipliers.size());
  const std::size_t batch = static_cast<std::size_t>(std::max(1, threads));
  for (std::size_t start = 0; start < multipliers.size(); start += batch) {
    std::vector<std::future<VerifyOutcome>> jobs;
    const std::size_t stop = std::min(multipliers.size(), start + batch);
    for (std::size_t i = start; i < stop; ++i) {
      jobs.push_back(std::async(batch > 1 ? std::launch::async : std::launch::deferred, [&, i] {
        return run_verification(scale_boundary_disturbance(base, multipliers[i]), tol_override);
      }));
    }
    for (std::size_t i = start; i < stop; ++i)
      rows[i] = SweepRow{multipliers[i], jobs[i - start].get()};
  }
  return rows;
}

/// Response must not decrease as the amplitude grows.
inline bool sweep_monotone(std::vector<SweepRow> rows)
{
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.multiplier < b.multiplier; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double prev = rows[i - 1].outcome.response;
    if (rows[i].outcome.response < prev - 1e-12 * std::max(1.0, prev))
      return false;
  }
  return true;
}

inline int cmd_sweep(const std::filesystem::path& scenario, const std::vector<double>& multipliers,
                     const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err,
                     std::optional<double> tol_override = {})
{
  return detail::guarded(err, [&] {
    if (multipliers.empty())
      throw LoadError("sweep needs at least one multiplier");
    for (double m : multipliers)
      if (!(m >= 0.0) || !std::isfinite(m))
        throw LoadError("sweep multipliers must be finite and non-negative");
    const auto sc = load_scenario(scenario);
    const auto rows = run_sweep(sc, multipliers, tol_override, sweep_threads());

    int code = exit_code::ok;
    auto csv = io::open_for_write(out_dir / "sweep.csv");
    csv << "multiplier,response,max_l2_norm,gain_bound,pass\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i].outcome;
      const auto dir = out_dir / ("multiplier_" + std::to_string(i));
      write_verification(dir, r);
      csv << io::format_number(rows[i].multiplier) << ',' << io::format_number(r.response) << ','
          << io::format_number(r.max_u_norm) << ',' << io::format_number(r.gain_bound) << ','
          << (r.code == exit_code::ok ? "pass" : "fail") << '\n';
      out << "multiplier " << io::format_number(rows[i].multiplier) << ": response "
          << io::format_number(r.response) << ", bound " << io::format_number(r.gain_bound)
          << ", exit " << r.code << '\n';
      if (r.code != exit_code::ok) {
        if (!r.message.empty())
          err << "multiplier " << io::format_number(rows[i].multiplier) << ": " << r.message << '\n';
        if (code == exit_code::ok || r.code < code)
          code = r.code;
      }
    }
    if (code == exit_code::ok && !sweep_monotone(rows)) {
      err << "measured response is not monotone in the multiplier\n";
      code = exit_code::bound_violated;
    }
    return code;
  });
}

inline int cmd_example(ExampleVariant variant, const std::filesystem::path& path, std::ostream& out,
                       std::ostream& err)
{
  return detail::guarded(err, [&] {
    const std::string text = example_scenario(variant);
    if (path.empty()) {
      out << text;
      return exit_code::ok;
    }
    auto os = io::open_for_write(path);
    os << text;
    return exit_code::ok;
  });
}

}  // namespace issp
