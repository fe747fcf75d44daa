#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace issp;
namespace fs = std::filesystem;

namespace {

std::string replace(std::string text, const std::string& from, const std::string& to)
{
  const auto pos = text.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  if (pos != std::string::npos)
    text.replace(pos, from.size(), to);
  return text;
}

std::string read_file(const fs::path& p)
{
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class Workdir : public ::testing::Test
{
protected:
  fs::path dir;

  void SetUp() override
  {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / ("issp_" + std::string(info->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path write(const std::string& name, const std::string& text)
  {
    const auto p = dir / name;
    std::ofstream(p) << text;
    return p;
  }

  int cli(const std::string& args)
  {
    const std::string cmd = std::string(ISSP_CLI_PATH) + " " + args + " > " +
                            (dir / "stdout.txt").string() + " 2> " + (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
};

std::string load_error_of(const std::string& text)
{
  try {
    parse_scenario(text, "s.scenario");
  } catch (const LoadError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Scenario, ExampleLoads)
{
  const auto sc = parse_scenario(example_scenario());
  EXPECT_EQ(sc.spec.geometry.dimension, 2);
  EXPECT_EQ(sc.grid.nodes, 201);
  EXPECT_EQ(sc.time.steps(), 2000);
  EXPECT_EQ(sc.snapshot_stride, 100);
  EXPECT_EQ(sc.spec.boundary, BoundaryKind::robin);
  EXPECT_EQ(sc.spec.horizon, 2.0);
  EXPECT_NEAR(sc.spec.constants.trace_constant, 1.1 * std::sqrt(2.0), 1e-9);
  EXPECT_TRUE(validate_scenario(sc).all_passed());
}

TEST(Scenario, ShippedFilesMatchGenerator)
{
  for (auto v : {ExampleVariant::robin, ExampleVariant::dirichlet, ExampleVariant::neumann,
                 ExampleVariant::neumann_linear}) {
    const auto path = testsupport::scenario_path(std::string("example_") + to_string(v) + ".scenario");
    EXPECT_EQ(read_file(path), example_scenario(v)) << path;
    EXPECT_NO_THROW(load_scenario(path));
  }
}

TEST(Scenario, VariantNames)
{
  EXPECT_EQ(parse_example_variant("neumann_linear"), ExampleVariant::neumann_linear);
  EXPECT_FALSE(parse_example_variant("periodic").has_value());
}

TEST(Scenario, ErrorsNameFileAndLine)
{
  const auto text = example_scenario();
  auto msg = load_error_of(replace(text, "[geometry]", "[geomtry]"));
  EXPECT_NE(msg.find("s.scenario:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("geomtry"), std::string::npos) << msg;

  msg = load_error_of(replace(text, "\npsi = u + u^3", ""));
  EXPECT_NE(msg.find("psi"), std::string::npos) << msg;

  msg = load_error_of(replace(text, "n = 2", "n = 2\nn = 3"));
  EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;

  msg = load_error_of(replace(text, "nr = 201", "nr = 20.5"));
  EXPECT_FALSE(msg.empty());

  msg = load_error_of(replace(text, "d = sin(t)^2", "d = sin(r)^2"));
  EXPECT_NE(msg.find("r"), std::string::npos) << msg;

  msg = load_error_of(replace(text, "h = u*ln(1 + u^2)", "h = u*ln(1 + u^2"));
  EXPECT_FALSE(msg.empty());

  msg = load_error_of(replace(text, "tol = 0.02", "tol = 0.02\ncolour = red"));
  EXPECT_NE(msg.find("colour"), std::string::npos) << msg;

  msg = load_error_of(replace(text, "trace_safety_factor = 1.1", "trace_safety_factor = 0.9"));
  EXPECT_FALSE(msg.empty());
}

TEST(Scenario, OptionalKeys)
{
  auto text = replace(example_scenario(), "snapshot_stride = 100",
                      "snapshot_stride = 100\nscheme = crank_nicolson\nnewton_max = 7");
  text = replace(text, "c_lower = 1", "c_lower = 1\ntrace_constant = 0.5");
  const auto sc = parse_scenario(text);
  EXPECT_EQ(sc.solver.scheme, TimeScheme::crank_nicolson);
  EXPECT_EQ(sc.solver.newton_max, 7);
  EXPECT_EQ(sc.spec.constants.trace_constant, 0.5);
}

TEST(Scenario, BoundaryScalingForSweeps)
{
  auto sc = parse_scenario(example_scenario());
  sc.sup_d_override = 2.0;
  const auto scaled = scale_boundary_disturbance(sc, 3.0);
  EXPECT_DOUBLE_EQ(eval_d(scaled.spec.d, 0.7), 3.0 * std::pow(std::sin(0.7), 2));
  EXPECT_EQ(*scaled.sup_d_override, 6.0);
}

TEST(Io, NumbersAndCsvHeaders)
{
  EXPECT_EQ(io::format_number(0.1), "0.1");
  EXPECT_EQ(io::format_number(-0.0), "0");
  EXPECT_EQ(io::format_number(std::numeric_limits<double>::infinity()), "inf");
  std::ostringstream os;
  VerificationReport rep;
  rep.claims.push_back(make_claim("c", {0.0, 1.0}, {1.0, 2.0}, {2.0, 2.0}, 0.0, false));
  io::write_report_csv(os, rep);
  EXPECT_EQ(os.str(), "claim,t,measured,bound,margin,pass\nc,0,1,2,1,pass\nc,1,2,2,0,pass\n");
}

TEST_F(Workdir, MissingFileExitsOne)
{
  EXPECT_EQ(cli("validate --scenario " + (dir / "nope.scenario").string()), 1);
  EXPECT_EQ(cli("frobnicate"), 1);
}

TEST_F(Workdir, ValidateAcceptsExampleAndRejectsBadConstants)
{
  const auto good = write("good.scenario", example_scenario());
  EXPECT_EQ(cli("validate --scenario " + good.string()), 0);
  const auto bad = write("bad.scenario", replace(example_scenario(), "b_upper = 0", "b_upper = 2"));
  EXPECT_EQ(cli("validate --scenario " + bad.string()), 2);
  EXPECT_NE(read_file(dir / "stderr.txt").find("drift_vs_reaction"), std::string::npos);
  EXPECT_EQ(cli("simulate --scenario " + bad.string() + " --out " + (dir / "o").string()), 2);
}

TEST_F(Workdir, SolverFailureExitsThreeWithPartialOutput)
{
  auto text = replace(example_scenario(), "dt = 0.001", "dt = 2");
  text = replace(text, "snapshot_stride = 100",
                 "snapshot_stride = 1\nnewton_max = 1\nnewton_tol = 1e-15");
  text = replace(text, "phi = 0.5*(1 - r^2)^2", "phi = 40*(1 - r^2)^2");
  const auto p = write("hard.scenario", text);
  const auto out = dir / "out";
  EXPECT_EQ(cli("simulate --force --scenario " + p.string() + " --out " + out.string()), 3);
  const auto csv = read_file(out / "trajectory.csv");
  EXPECT_EQ(csv.rfind("t,l2_norm,sup_norm,boundary_value,newton_iters\n", 0), 0u) << csv;
  EXPECT_NE(csv.find("\n0,"), std::string::npos);
}

TEST_F(Workdir, VerifyDetectsUnderstatedDisturbance)
{
  auto text = replace(example_scenario(), "nr = 201", "nr = 41");
  text = replace(text, "dt = 0.001", "dt = 0.01");
  text = replace(text, "snapshot_stride = 100", "snapshot_stride = 10");
  const auto ok = write("ok.scenario", text);
  EXPECT_EQ(cli("verify-iss --scenario " + ok.string() + " --out " + (dir / "a").string()), 0);
  for (const char* f : {"u_trajectory.csv", "v_trajectory.csv", "w_norm.csv", "iss_bound.csv",
                        "verification_report.csv"})
    EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
  EXPECT_EQ(read_file(dir / "a" / "iss_bound.csv").rfind("T,transient,gain_d,gain_f,total,lambda,epsilon\n", 0),
            0u);

  const auto low = write("low.scenario", replace(text, "d = sin(t)^2", "d = sin(t)^2\nsup_d_override = 1e-6"));
  EXPECT_EQ(cli("verify-iss --scenario " + low.string() + " --out " + (dir / "b").string()), 4);
  EXPECT_NE(read_file(dir / "b" / "verification_report.csv").find(",fail"), std::string::npos);
}

TEST_F(Workdir, TraceConstantCommand)
{
  const auto p = write("s.scenario", example_scenario());
  EXPECT_EQ(cli("trace-constant --scenario " + p.string()), 0);
  const auto text = read_file(dir / "stdout.txt");
  EXPECT_NE(text.find("1.414213562"), std::string::npos) << text;
}

TEST_F(Workdir, SweepWithZeroMultiplierHasZeroResponse)
{
  auto text = replace(example_scenario(), "nr = 201", "nr = 41");
  text = replace(text, "dt = 0.001", "dt = 0.01");
  text = replace(text, "snapshot_stride = 100", "snapshot_stride = 10");
  const auto p = write("s.scenario", text);
  EXPECT_EQ(cli("sweep --scenario " + p.string() + " --multipliers 0,1,2 --out " +
                (dir / "sw").string()),
            0);
  const auto csv = read_file(dir / "sw" / "sweep.csv");
  EXPECT_EQ(csv.rfind("multiplier,response,max_l2_norm,gain_bound,pass\n0,0,", 0), 0u) << csv;
  EXPECT_TRUE(fs::exists(dir / "sw" / "multiplier_2" / "verification_report.csv"));
  const auto low = write("low.scenario", replace(text, "d = sin(t)^2", "d = sin(t)^2\nsup_d_override = 1e-6"));
  EXPECT_EQ(cli("sweep --scenario " + low.string() + " --multipliers 1,2 --out " +
                (dir / "sw3").string()),
            4);
  EXPECT_EQ(cli("sweep --scenario " + p.string() + " --multipliers -1 --out " +
                (dir / "sw2").string()),
            1);
}

TEST_F(Workdir, SimulateZeroScenario)
{
  auto text = replace(example_scenario(), "d = sin(t)^2", "d = 0");
  text = replace(text, "phi = 0.5*(1 - r^2)^2", "phi = 0");
  text = replace(text, "nr = 201", "nr = 21");
  text = replace(text, "dt = 0.001", "dt = 0.1");
  text = replace(text, "snapshot_stride = 100", "snapshot_stride = 5");
  const auto p = write("zero.scenario", text);
  EXPECT_EQ(cli("simulate --scenario " + p.string() + " --out " + (dir / "z").string()), 0);
  std::istringstream csv(read_file(dir / "z" / "trajectory.csv"));
  std::string line;
  std::getline(csv, line);
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    std::stringstream ls(line);
    std::string t, l2, sup;
    std::getline(ls, t, ',');
    std::getline(ls, l2, ',');
    std::getline(ls, sup, ',');
    EXPECT_EQ(l2, "0");
    EXPECT_EQ(sup, "0");
  }
  EXPECT_EQ(rows, 21);
  EXPECT_TRUE(fs::exists(dir / "z" / "snapshot_0.csv"));
  EXPECT_TRUE(fs::exists(dir / "z" / "snapshot_20.csv"));
}

TEST_F(Workdir, ExampleCommandWritesScenario)
{
  const auto p = dir / "ex.scenario";
  EXPECT_EQ(cli("example --variant dirichlet --scenario " + p.string()), 0);
  EXPECT_EQ(read_file(p), example_scenario(ExampleVariant::dirichlet));
  EXPECT_EQ(cli("example"), 0);
  EXPECT_EQ(read_file(dir / "stdout.txt"), example_scenario());
}
