#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"

using namespace issp;

TEST(Geometry, RejectsInvalidBalls)
{
  EXPECT_THROW(BallGeometry(0, 1.0), PreconditionError);
  EXPECT_THROW(BallGeometry(2, 0.0), PreconditionError);
  EXPECT_THROW(BallGeometry(2, -1.0), PreconditionError);
  EXPECT_THROW(BallGeometry(2, std::nan("")), PreconditionError);
}

TEST(Geometry, GammaAtHalfIntegersMatchesTgamma)
{
  for (int k = 1; k <= 30; ++k) {
    const double m = 0.5 * k;
    EXPECT_NEAR(gamma_half_integer(m), std::tgamma(m), 1e-13 * std::tgamma(m)) << m;
  }
  EXPECT_THROW(gamma_half_integer(0.25), DomainError);
  EXPECT_THROW(gamma_half_integer(0.0), DomainError);
}

TEST(Geometry, UnitMeasuresInLowDimensions)
{
  const double pi = std::numbers::pi;
  EXPECT_DOUBLE_EQ(ball_volume(BallGeometry(1, 1.0)), 2.0);
  EXPECT_DOUBLE_EQ(ball_volume(BallGeometry(2, 1.0)), pi);
  EXPECT_DOUBLE_EQ(ball_volume(BallGeometry(3, 2.0)), 32.0 * pi / 3.0);
  EXPECT_DOUBLE_EQ(sphere_area(BallGeometry(1, 5.0)), 2.0);
  EXPECT_DOUBLE_EQ(sphere_area(BallGeometry(2, 1.0)), 2.0 * pi);
  EXPECT_DOUBLE_EQ(sphere_area(BallGeometry(3, 1.0)), 4.0 * pi);
}

TEST(Geometry, SurfaceToVolumeRatioIsNOverR)
{
  for (int n = 1; n <= 8; ++n)
    for (double R : {0.3, 1.0, 2.5}) {
      const BallGeometry g(n, R);
      EXPECT_NEAR(sphere_area(g) / ball_volume(g), n / R, 1e-13 * n / R);
    }
}

TEST(Geometry, P1NormsOfConstantsAndLinears)
{
  // u = 1: ||u||^2 = |B|, grad 0. u = r: ||grad u||^2 = |B|.
  for (int n = 1; n <= 4; ++n) {
    const BallGeometry g(n, 1.5);
    std::vector<double> ones(41, 1.0), ramp(41);
    for (int i = 0; i <= 40; ++i)
      ramp[static_cast<std::size_t>(i)] = 1.5 * i / 40.0;
    EXPECT_NEAR(std::pow(p1_l2_norm(g, ones), 2), ball_volume(g), 1e-12 * ball_volume(g));
    EXPECT_NEAR(std::pow(p1_gradient_norm(g, ones), 2), 0.0, 1e-12);
    EXPECT_NEAR(std::pow(p1_gradient_norm(g, ramp), 2), ball_volume(g), 1e-12 * ball_volume(g));
    // ||r||^2 = |dB_1| R^(n+2) / (n+2)
    const double exact = unit_sphere_area(n) * std::pow(1.5, n + 2) / (n + 2);
    EXPECT_NEAR(std::pow(p1_l2_norm(g, ramp), 2), exact, 1e-12 * exact);
  }
}

TEST(Geometry, TraceEstimateRejectsCoarseGrids)
{
  EXPECT_THROW(estimate_trace_constant(BallGeometry(2, 1.0), 8), PreconditionError);
}

TEST(Geometry, TraceEstimateReportsNonConvergence)
{
  try {
    estimate_trace_constant(BallGeometry(2, 3.0), 64, 1e-12, 2);
    FAIL() << "expected EstimationError";
  } catch (const EstimationError& e) {
    EXPECT_GT(e.best_value(), 0.0);
  }
}

TEST(Geometry, TraceEstimateEqualsConstantQuotientOnSmallBalls)
{
  // For R <= n-dependent threshold constants are extremal: C = sqrt(n / R).
  for (int n = 1; n <= 3; ++n)
    for (double R : {0.25, 0.5, 1.0}) {
      const auto e = estimate_trace_constant(BallGeometry(n, R), 200);
      EXPECT_NEAR(e.value, std::sqrt(n / R), 1e-12 * std::sqrt(n / R)) << n << " " << R;
      EXPECT_TRUE(e.converged);
    }
}

TEST(Geometry, TraceEstimateApproachesBesselOracleFromBelow)
{
  for (int n = 1; n <= 3; ++n)
    for (double R : {2.0, 4.0}) {
      const BallGeometry g(n, R);
      const double oracle = testsupport::radial_trace_oracle(n, R);
      const double c200 = estimate_trace_constant(g, 200).value;
      const double c800 = estimate_trace_constant(g, 800).value;
      EXPECT_LE(c200, oracle * (1 + 1e-9));
      EXPECT_LE(c800, oracle * (1 + 1e-9));
      EXPECT_LE(c200, c800 * (1 + 1e-12)) << "nested spaces must not lose";
      EXPECT_NEAR(c800, oracle, 1e-5 * oracle) << n << " " << R;
    }
}

TEST(Geometry, TraceEstimateDominatesRandomQuotients)
{
  std::mt19937_64 rng(7);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int n = 1; n <= 3; ++n) {
    const BallGeometry g(n, 2.0);
    const double c = estimate_trace_constant(g, 64).value;
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> u(65);
      for (std::size_t i = 0; i < u.size(); ++i)
        u[i] = N(rng) + (trial % 2 ? std::exp(static_cast<double>(i) / 8.0) : 0.0);
      EXPECT_LE(trace_quotient(g, u), c * (1 + 1e-12));
    }
  }
}

TEST(Geometry, TraceConstantConfig)
{
  const BallGeometry g(2, 1.0);
  TraceConstantConfig cfg;
  EXPECT_NEAR(trace_constant(g, cfg), 1.1 * std::sqrt(2.0), 1e-12);
  cfg.override_value = 0.75;
  EXPECT_EQ(trace_constant(g, cfg), 0.75);
}
