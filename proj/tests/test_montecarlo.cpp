#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "ustat/errors.hpp"
#include "ustat/montecarlo.hpp"
#include "ustat/rng.hpp"

using namespace ustat;

namespace {

ExperimentConfig small_config(Experiment e, const std::string& kernel, const std::string& dist) {
  ExperimentConfig c;
  c.experiment = e;
  c.kernel = kernel;
  c.distribution = dist;
  c.n_grid = {40, 80};
  c.replications = 60;
  c.base_seed = 91;
  return c;
}

}  // namespace

TEST(ReferenceLaws, NormalCdf) {
  EXPECT_EQ(normal_cdf(0.0), 0.5);
  for (double x : {0.3, 1.0, 2.5, 4.0}) EXPECT_NEAR(normal_cdf(x) + normal_cdf(-x), 1.0, 1e-15);
  for (double x : {-2.0, -0.7, 0.4, 1.959964}) EXPECT_NEAR(normal_cdf(x), oracle::normal_cdf(x), 1e-10);
  EXPECT_NEAR(normal_cdf(1.959964), 0.975, 1e-6);
}

TEST(ReferenceLaws, SupremumOfBrownianMotion) {
  EXPECT_EQ(wiener_sup_cdf(-0.1), 0.0);
  EXPECT_EQ(wiener_sup_cdf(0.0), 0.0);
  EXPECT_NEAR(wiener_sup_cdf(1.959964), 0.95, 1e-6);
  EXPECT_NEAR(wiener_sup_cdf(0.6744898), 0.5, 1e-6);
}

TEST(Ks, ExactQuantilesAndSingleSample) {
  const int n = 200;
  std::vector<double> q;
  for (int i = 0; i < n; ++i) q.push_back((i + 0.5) / n);
  const auto uniform = [](double x) { return std::clamp(x, 0.0, 1.0); };
  EXPECT_NEAR(ks_distance(q, uniform), 0.5 / n, 1e-15);
  EXPECT_EQ(ks_distance({0.5}, uniform), 0.5);
  EXPECT_THROW(ks_distance({}, uniform), invalid_argument);
}

TEST(Ks, UniformDrawsAreClose) {
  Xoshiro256ss gen(92);
  std::vector<double> u(1000);
  for (auto& v : u) v = gen.uniform01();
  EXPECT_LT(ks_distance(u, [](double x) { return std::clamp(x, 0.0, 1.0); }), 0.061);
}

TEST(Config, StrictParsing) {
  const std::string good =
      R"({"version":1,"experiment":"ARVESEN","kernel":"product:m=2","distribution":"normal:1,1",)"
      R"("n_grid":[100,200],"replications":50,"base_seed":7,"tolerances":{"relative_mean":0.1}})";
  const auto c = parse_config(good);
  EXPECT_EQ(c.experiment, Experiment::kArvesen);
  EXPECT_EQ(c.n_grid, (std::vector<int>{100, 200}));
  EXPECT_EQ(c.tolerances.relative_mean, 0.1);
  EXPECT_EQ(c.tolerances.ks, 0.06);

  EXPECT_THROW(parse_config(R"({"version":1,"experiment":"ARVESEN","n_grid":[100],"replications":50,"base_seed":1,"colour":2})"),
               config_error);
  EXPECT_THROW(parse_config(R"({"experiment":"ARVESEN","n_grid":[100],"replications":50,"base_seed":1})"), config_error);
  EXPECT_THROW(parse_config(R"({"version":1,"experiment":"ARVESEN","n_grid":[100],"replications":10,"base_seed":1})"),
               config_error);
  EXPECT_THROW(parse_config(R"({"version":1,"experiment":"ARVESEN","n_grid":[200,100],"replications":50,"base_seed":1})"),
               config_error);
  EXPECT_THROW(parse_config(R"({"version":1,"experiment":"NOPE","n_grid":[100],"replications":50,"base_seed":1})"),
               config_error);
  EXPECT_THROW(parse_config(R"({"version":2,"experiment":"ARVESEN","n_grid":[100],"replications":50,"base_seed":1})"),
               config_error);
  EXPECT_THROW(parse_config(R"({"version":1,"experiment":"ARVESEN","n_grid":[100],"replications":50,"base_seed":1,)"
                            R"("tolerances":{"kss":0.1}})"),
               config_error);
  EXPECT_THROW(parse_config("{\"version\":1,"), config_error);
}

TEST(Config, JsonRoundTrip) {
  auto c = small_config(Experiment::kCltT0, "variance", "normal:0,1");
  c.theta = 1.0;
  c.t0 = 0.5;
  c.process = ProcessKind::kPseudo;
  const auto back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Workers, ParallelIndexedKeepsOrder) {
  const auto out = parallel_indexed<int>(1000, 4, [](int i) { return i * i; });
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(out[static_cast<std::size_t>(i)], i * i);
  EXPECT_THROW(parallel_indexed<int>(10, 3,
                                     [](int i) -> int {
                                       if (i == 7) throw invalid_argument("boom");
                                       return i;
                                     }),
               invalid_argument);
}

TEST(Experiments, DeterministicAcrossWorkerCounts) {
  auto c = small_config(Experiment::kCltT0, "variance", "normal:0,1");
  c.theta = 1.0;
  const auto a = run_experiment(c, 1);
  const auto b = run_experiment(c, 4);
  EXPECT_TRUE(same_content(a, b));
  auto j = small_config(Experiment::kJackRaikov, "product:m=2", "normal:1,1");
  EXPECT_TRUE(same_content(run_experiment(j, 1), run_experiment(j, 3)));
}

TEST(Experiments, ConstantKernelIsDegenerate) {
  const auto r = run_experiment(small_config(Experiment::kJackRaikov, "constant:m=2,c=1", "normal:0,1"), 2);
  EXPECT_TRUE(r.degenerate_configuration);
  EXPECT_FALSE(r.pass);
  EXPECT_FALSE(r.notes.empty());
}

TEST(Experiments, ArvesenSmallRun) {
  auto c = small_config(Experiment::kArvesen, "product:m=2", "normal:1,1");
  c.n_grid = {200, 400};
  c.replications = 100;
  c.tolerances.relative_mean = 0.1;
  const auto r = run_experiment(c, 2);
  ASSERT_EQ(r.records.size(), 2U);
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.target, 1.0);
    EXPECT_EQ(rec.dropped, 0);
    EXPECT_NEAR(rec.mean, 1.0, 0.1);
  }
  EXPECT_TRUE(r.pass);
}

TEST(Experiments, ThetaRequiredForPaths) {
  auto c = small_config(Experiment::kCltT0, "product:m=2", "example:a=2");
  EXPECT_NO_THROW(run_experiment(c, 1));
  c.kernel = "nonsense";
  EXPECT_THROW(run_experiment(c, 1), config_error);
}

TEST(Experiments, NegligibilityDelegatesToTrend) {
  auto c = small_config(Experiment::kNegligibility, "variance:center=1", "normal:0,1");
  c.n_grid = {50, 100, 200, 400};
  c.replications = 100;
  const auto r = run_experiment(c, 1);
  EXPECT_EQ(r.records.size(), 4U);
  EXPECT_TRUE(r.trend_pass);
  EXPECT_TRUE(r.pass);
}
