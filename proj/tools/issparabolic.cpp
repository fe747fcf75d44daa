#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "issparabolic/issparabolic.hpp"

int main(int argc, char** argv)
{
  CLI::App app{"Radial simulator and ISS bound checker for nonlinear parabolic problems on a ball"};
  app.require_subcommand(1);

  std::string scenario, out_dir = "out", variant = "robin", example_out;
  std::vector<double> multipliers;
  std::optional<double> tol;
  bool force = false;

  auto add_scenario = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", scenario, "scenario file")->required();
  };
  auto add_tol = [&](CLI::App* cmd) {
    cmd->add_option("--tol", tol, "relative tolerance for the bound checks")
        ->check(CLI::NonNegativeNumber);
  };

  auto* validate = app.add_subcommand("validate", "check the structural conditions");
  add_scenario(validate);

  auto* simulate = app.add_subcommand("simulate", "solve and write trajectory CSV files");
  add_scenario(simulate);
  simulate->add_option("--out", out_dir, "output directory");
  simulate->add_flag("--force", force, "solve even if validation fails");

  auto* verify = app.add_subcommand("verify-iss", "solve u and v and check every bound");
  add_scenario(verify);
  verify->add_option("--out", out_dir, "output directory");
  add_tol(verify);

  auto* trace = app.add_subcommand("trace-constant", "estimate the trace constant of the ball");
  add_scenario(trace);

  auto* sweep = app.add_subcommand("sweep", "verify-iss over multiples of the boundary disturbance");
  add_scenario(sweep);
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--multipliers", multipliers, "comma separated multipliers of d")
      ->delimiter(',')
      ->required();
  add_tol(sweep);

  auto* example = app.add_subcommand("example", "print or write a shipped scenario");
  example->add_option("--variant", variant, "robin, dirichlet, neumann or neumann_linear");
  example->add_option("--scenario", example_out, "write to this path instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : issp::exit_code::load_error;
  }

  auto& out = std::cout;
  auto& err = std::cerr;
  if (*validate)
    return issp::cmd_validate(scenario, out, err);
  if (*simulate)
    return issp::cmd_simulate(scenario, out_dir, out, err, force);
  if (*verify)
    return issp::cmd_verify_iss(scenario, out_dir, out, err, tol);
  if (*trace)
    return issp::cmd_trace_constant(scenario, out, err);
  if (*sweep)
    return issp::cmd_sweep(scenario, multipliers, out_dir, out, err, tol);
  if (*example) {
    const auto v = issp::parse_example_variant(variant);
    if (!v) {
      err << "error: unknown example variant '" << variant << "'\n";
      return issp::exit_code::load_error;
    }
    return issp::cmd_example(*v, example_out, out, err);
  }
  return issp::exit_code::load_error;
}
