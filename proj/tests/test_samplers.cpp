#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "ustat/distribution.hpp"
#include "ustat/errors.hpp"
#include "ustat/kernel.hpp"
#include "ustat/samplers.hpp"

using namespace ustat;

TEST(Ell, AnalyticFiniteVariance) {
  const auto e = estimate_ell(Distribution::normal(1.0, 1.0), kernels::product(2), 500);
  EXPECT_EQ(e.method, EllMethod::kAnalyticFiniteVar);
  EXPECT_DOUBLE_EQ(e.ell_sq, 1.0);
  EXPECT_EQ(e.n, 500);
  // h1 = x mu^2 - mu^3 under N(2, 3^2) for m = 3: Var = mu^4 sigma^2.
  EXPECT_DOUBLE_EQ(estimate_ell(Distribution::normal(2.0, 3.0), kernels::product(3), 10).ell_sq, 16.0 * 9.0);
}

TEST(Ell, VarianceKernelUnderNormalMatchesQuadrature) {
  // E h1^2 = E[((X^2 - 1) / 2)^2] under N(0,1) = 1/2.
  const double oracle_value = oracle::simpson(
      [](double x) { return 0.25 * (x * x - 1) * (x * x - 1) * std::exp(-0.5 * x * x) / std::sqrt(2 * M_PI); }, -12.0,
      12.0, 20000);
  EXPECT_NEAR(oracle_value, 0.5, 1e-10);
  EXPECT_NEAR(estimate_ell(Distribution::normal(0.0, 1.0), kernels::variance(), 100).ell_sq, oracle_value, 1e-10);
  EXPECT_NEAR(estimate_ell(Distribution::normal(1.0, 2.0), kernels::variance(), 100).ell_sq, 8.0, 1e-9);
}

TEST(Ell, FiniteSupportUsesExactSecondMoment) {
  const auto d = Distribution::finite({-1.0, 0.0, 3.0}, {0.25, 0.25, 0.5});
  const auto e = estimate_ell(d, kernels::variance(), 50);
  double want = 0.0;
  const double mu = 1.25, var = 0.25 * 5.0625 + 0.25 * 1.5625 + 0.5 * 3.0625;
  for (auto [x, p] : {std::pair{-1.0, 0.25}, {0.0, 0.25}, {3.0, 0.5}}) {
    const double h1 = 0.5 * ((x - mu) * (x - mu) - var);
    want += p * h1 * h1;
  }
  EXPECT_NEAR(e.ell_sq, want, 1e-12);
}

TEST(Ell, ExampleTruncatedSecondMomentMatchesQuadrature) {
  for (double u : {1.0, 1.5, 3.0, 40.0}) {
    const double q = u > 1.0 ? oracle::simpson([](double t) { return t * t * 2.0 / (t * t * t); }, 1.0, u, 20000) : 0.0;
    EXPECT_NEAR(example_truncated_second_moment(u), q, 1e-9) << u;
  }
  EXPECT_EQ(example_truncated_second_moment(0.5), 0.0);
}

TEST(Ell, ExampleAsymptotic) {
  EXPECT_NEAR(example_asymptotic_ell_sq(2.0, 2, std::numbers::e), 4.0, 1e-15);
  const auto e = estimate_ell(Distribution::example_density(2.0), kernels::product(2), 10000);
  EXPECT_EQ(e.method, EllMethod::kExampleAsymptotic);
  EXPECT_DOUBLE_EQ(e.ell_sq, 4.0 * std::log(10000.0));
  EXPECT_DOUBLE_EQ(estimate_ell(Distribution::example_density(3.0), kernels::product(3), 100).ell_sq,
                   81.0 * std::log(100.0));
  EXPECT_THROW(estimate_ell(Distribution::example_density(2.0), kernels::product(2), 1, EllMethod::kExampleAsymptotic),
               invalid_argument);
  EXPECT_THROW(estimate_ell(Distribution::normal(0, 1), kernels::product(2), 10, EllMethod::kExampleAsymptotic),
               unsupported_operation);
}

TEST(Ell, FixedPointSolvesItsEquation) {
  const auto d = Distribution::example_density(2.0);
  for (std::int64_t n : {100, 10000, 1000000}) {
    const auto e = estimate_ell(d, kernels::product(2), n, EllMethod::kTruncatedFixedPoint);
    const double b = std::sqrt(static_cast<double>(n) * e.ell_sq);
    // h1 = 2(x - 2): E h1^2 1(|h1| <= B) = 4 * 2 ln(B / 2).
    const double rhs = static_cast<double>(n) * 4.0 * example_truncated_second_moment(b / 2.0);
    EXPECT_NEAR(b * b, rhs, 1e-5 * rhs);
    EXPECT_GT(e.ell_sq, 0.0);
  }
}

TEST(Ell, FixedPointOnFiniteSupportReachesVariance) {
  const auto d = Distribution::finite({-1.0, 1.0}, {0.5, 0.5});
  const auto e = estimate_ell(d, kernels::identity(), 400, EllMethod::kTruncatedFixedPoint);
  EXPECT_NEAR(e.ell_sq, 1.0, 1e-6);
}

TEST(Ell, NoRouteOrDegenerate) {
  EXPECT_THROW(estimate_ell(Distribution::pareto(1.5, 1.0), kernels::identity(), 100), unsupported_operation);
  EXPECT_THROW(estimate_ell(Distribution::normal(0, 1), kernels::constant(2, 1.0), 100), unsupported_operation);
  EXPECT_THROW(estimate_ell(Distribution::normal(0, 1), kernels::product(2), 0), invalid_argument);
}

TEST(Ell, MethodNames) {
  for (auto m : {EllMethod::kAnalyticFiniteVar, EllMethod::kExampleAsymptotic, EllMethod::kTruncatedFixedPoint}) {
    EXPECT_EQ(parse_ell_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_ell_method("guess"), invalid_argument);
}

TEST(MomentDiagnostic, ConstantKernelIsExact) {
  const auto r = moment_diagnostic(Distribution::normal(0, 1), kernels::constant(2, -3.0), 5.0 / 3.0, 1000, 1);
  EXPECT_EQ(r.estimate, std::pow(3.0, 5.0 / 3.0));
  EXPECT_EQ(r.std_error, 0.0);
  EXPECT_FALSE(r.suspected_infinite);
}

TEST(MomentDiagnostic, FiveThirdsMomentOfExampleProduct) {
  // E|X|^{5/3} for a = 2 after substituting t = v^{-3} in the two tails.
  const double one = 3.0 * oracle::simpson(
                               [](double v) {
                                 const double w = 2.0 * v * v * v;
                                 return std::pow(1.0 + w, 5.0 / 3.0) + std::pow(std::abs(1.0 - w), 5.0 / 3.0);
                               },
                               0.0, 1.0, 200000);
  const double want = one * one;
  const auto r = moment_diagnostic(Distribution::example_density(2.0), kernels::product(2), 5.0 / 3.0, 4000000, 61);
  EXPECT_TRUE(std::isfinite(r.estimate));
  EXPECT_NEAR(r.estimate, want, 0.1 * want);
  EXPECT_FALSE(r.suspected_infinite);
  EXPECT_EQ(r.ladder_budgets.back(), 4000000U);
  EXPECT_EQ(r.ladder_budgets.front(), 250000U);
}

TEST(MomentDiagnostic, SecondMomentOfExampleFlagged) {
  const auto r = moment_diagnostic(Distribution::example_density(2.0), kernels::product(2), 2.0, 4000000, 62);
  EXPECT_TRUE(r.suspected_infinite) << r.relative_growth_per_doubling;
}

TEST(MomentDiagnostic, FiniteMomentNotFlagged) {
  const auto r = moment_diagnostic(Distribution::normal(1, 1), kernels::product(2), 2.0, 1000000, 63);
  // E (X1 X2)^2 = (E X^2)^2 = 4
  EXPECT_NEAR(r.estimate, 4.0, 4.0 * r.std_error);
  EXPECT_FALSE(r.suspected_infinite);
}

TEST(MomentDiagnostic, Preconditions) {
  EXPECT_THROW(moment_diagnostic(Distribution::normal(0, 1), kernels::identity(), 0.0, 100, 1), invalid_argument);
  EXPECT_THROW(moment_diagnostic(Distribution::normal(0, 1), kernels::identity(), 1.0, 8, 1), invalid_argument);
}
