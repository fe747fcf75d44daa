#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>

#include "bounds.hpp"
#include "errors.hpp"
#include "solver.hpp"
#include "splitting.hpp"

namespace issp::io {

/// Shortest decimal form that round-trips; keeps CSV output deterministic.
inline std::string format_number(double v)
{
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  if (v == 0.0)
    return "0";  // no "-0"
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline std::ofstream open_for_write(const std::filesystem::path& path)
{
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error("cannot open " + path.string() + " for writing");
  return out;
}

inline void write_trajectory_csv(std::ostream& os, const SolutionTrajectory& traj)
{
  os << "t,l2_norm,sup_norm,boundary_value,newton_iters\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    os << format_number(traj.times[k]) << ',' << format_number(traj.l2_norm[k]) << ','
       << format_number(traj.sup_norm[k]) << ',' << format_number(traj.boundary_value[k]) << ','
       << traj.newton_iters[k] << '\n';
}

inline void write_snapshot_csv(std::ostream& os, const RadialGrid& grid, const StateField& state)
{
  os << "r,u\n";
  for (int i = 0; i < grid.nodes; ++i)
    os << format_number(grid.node(i)) << ',' << format_number(state.values[static_cast<std::size_t>(i)])
       << '\n';
}

/// trajectory.csv plus snapshot_<step>.csv files under `dir`.
inline void write_trajectory(const std::filesystem::path& dir, const SolutionTrajectory& traj,
                             const std::string& name = "trajectory.csv", bool snapshots = true)
{
  auto out = open_for_write(dir / name);
  write_trajectory_csv(out, traj);
  if (!snapshots)
    return;
  for (const auto& snap : traj.snapshots) {
    auto s = open_for_write(dir / ("snapshot_" + std::to_string(snap.step) + ".csv"));
    write_snapshot_csv(s, traj.grid, snap.state);
  }
}

inline void write_bound_header(std::ostream& os) { os << "T,transient,gain_d,gain_f,total,lambda,epsilon\n"; }

inline void write_bound_row(std::ostream& os, double T, const IssEstimate& e)
{
  os << format_number(T) << ',' << format_number(e.transient) << ',' << format_number(e.gain_d)
     << ',' << format_number(e.gain_f) << ',' << format_number(e.total) << ','
     << format_number(e.decay_rate) << ',' << format_number(e.epsilon) << '\n';
}

inline void write_report_csv(std::ostream& os, const VerificationReport& report)
{
  os << "claim,t,measured,bound,margin,pass\n";
  for (const auto& c : report.claims) {
    if (c.verdict == Verdict::not_applicable && c.t.empty()) {
      os << c.claim << ",,,,," << to_string(c.verdict) << '\n';
      continue;
    }
    for (std::size_t k = 0; k < c.t.size(); ++k) {
      const double v = violation(c.measured[k], c.bound[k], c.relative);
      os << c.claim << ',' << format_number(c.t[k]) << ',' << format_number(c.measured[k]) << ','
         << format_number(c.bound[k]) << ',' << format_number(c.bound[k] - c.measured[k]) << ','
         << (v <= c.tolerance ? "pass" : "fail") << '\n';
    }
  }
}

}  // namespace issp::io
