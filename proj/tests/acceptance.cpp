// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "ustat/ustat.hpp"

using namespace ustat;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string record_line(const NRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "n=%d mean=%.4f median=%.4f%s dropped=%d", r.n, r.mean, r.median,
                r.ks ? fmt(" ks=%.4f", *r.ks).c_str() : "", r.dropped);
  return buf;
}

ExperimentConfig config(Experiment e, std::string kernel, std::string dist, std::vector<int> grid, int reps,
                        std::uint64_t seed) {
  ExperimentConfig c;
  c.experiment = e;
  c.kernel = std::move(kernel);
  c.distribution = std::move(dist);
  c.n_grid = std::move(grid);
  c.replications = reps;
  c.base_seed = seed;
  return c;
}

int workers() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

void criterion1() {
  const auto start = Clock::now();
  std::mt19937_64 gen(1001);
  double worst = 0.0;
  for (int inst = 0; inst < 500; ++inst) {
    const int family = inst % 3;
    const int m = family == 0 ? 1 + (inst / 3) % 3 : (family == 1 ? 2 : 1);
    const Kernel k = family == 0 ? kernels::product(m) : (family == 1 ? kernels::variance() : kernels::identity());
    const Distribution d = inst % 2 ? Distribution::example_density(2.0) : Distribution::normal(1.0, 1.0);
    const int n = std::uniform_int_distribution<int>(m + 1, 40)(gen);
    const auto data = sample(d, static_cast<std::size_t>(n), gen());
    const double naive = naive_jackknife_sum_sq(k, data);
    const double scale = std::max(std::abs(naive), 1e-300);
    worst = std::max(worst, std::abs(jackknife_closed_form(k, data).sum_sq - naive) / scale);
    worst = std::max(worst, std::abs(jackknife(k, data).sum_sq - naive) / scale);
  }
  const double t = seconds_since(start);
  report(1, worst <= 1e-9 && t < 30.0,
         "jackknife identity over 500 instances, max relative discrepancy " + fmt("%.3g", worst) + ", " +
             fmt("%.2f s", t));
}

void criterion2() {
  const std::vector<double> data{1.0, 2.0, 3.0};
  const auto k = kernels::product(2);
  const double naive = naive_jackknife_sum_sq(k, data);
  const auto closed = jackknife_closed_form(k, data);
  const auto fast = jackknife(k, data);
  const double e1 = std::max({std::abs(naive - 52.0 / 3.0), std::abs(closed.sum_sq - 52.0 / 3.0),
                              std::abs(fast.sum_sq - 52.0 / 3.0)});
  const double e2 = std::max({std::abs(u_statistic(k, data) - 11.0 / 3.0), std::abs(closed.u_n - 11.0 / 3.0),
                              std::abs(fast.u_n - 11.0 / 3.0)});
  report(2, e1 <= 1e-12 && e2 <= 1e-12,
         "product m=2 on (1,2,3): sum error " + fmt("%.2g", e1) + ", U error " + fmt("%.2g", e2));
}

Distribution random_support(std::mt19937_64& gen, int size) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> support;
  std::vector<double> probs;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    support.push_back(-1.5 + 0.75 * i + 0.25 * u(gen));
    probs.push_back(u(gen));
    total += probs.back();
  }
  double partial = 0.0;
  for (int i = 0; i + 1 < size; ++i) partial += probs[static_cast<std::size_t>(i)] /= total;
  probs.back() = 1.0 - partial;
  return Distribution::finite(support, probs);
}

void criterion3() {
  const auto start = Clock::now();
  std::mt19937_64 gen(1003);
  const auto pair_sum3 = kernels::custom(3, "pairs", [](std::span<const double> x) {
    return x[0] * x[1] + x[0] * x[2] + x[1] * x[2] + x[0] * x[1] * x[2] * x[0] * x[1] * x[2];
  });
  const std::vector<Kernel> ks2{kernels::product(2), kernels::variance(),
                                truncate_kernel(kernels::product(2), TruncationRule::full_m(3))};
  const std::vector<Kernel> ks3{kernels::product(3), pair_sum3};
  int expansions = 0;
  int terms = 0;
  int bad_terms = 0;
  double worst_recon = 0.0;
  double worst_defect = 0.0;
  for (int size = 1; size <= 4; ++size) {
    for (int rep = 0; rep < 3; ++rep) {
      const auto d = random_support(gen, size);
      for (const auto* list : {&ks2, &ks3}) {
        for (const auto& k : *list) {
          for (int shared = 1; shared <= 2; ++shared) {
            const ProductStatistic ps(k, shared);
            const auto ex = build_v_expansion(ps, d);
            ++expansions;
            worst_recon = std::max(worst_recon, reconstruction_error(ps, ex));
            for (const auto& t : ex.terms) {
              ++terms;
              const double def = degeneracy_defect(t);
              worst_defect = std::max(worst_defect, def);
              if (!check_degeneracy(t)) ++bad_terms;
            }
          }
        }
      }
    }
  }
  const double t = seconds_since(start);
  report(3, bad_terms == 0 && worst_recon <= 1e-10 && t < 60.0,
         std::to_string(expansions) + " expansions, " + std::to_string(terms) + " terms, worst defect " +
             fmt("%.2g", worst_defect) + ", worst reconstruction " + fmt("%.2g", worst_recon) + ", " +
             fmt("%.2f s", t));
}

void criterion4() {
  const auto sign = Distribution::uniform_on({-1.0, 1.0});
  const std::function<double(std::span<const double>)> xy = [](std::span<const double> x) { return x[0] * x[1]; };
  const auto a = variance_bound(xy, 2, 0.0, sign, 2);
  const auto b = variance_bound(xy, 2, 0.0, sign, 3);
  const auto near = [](double x, double y) { return std::abs(x - y) <= 1e-12; };
  bool ok = near(a.lhs, 1.0) && near(a.rhs, 0.5) && near(a.ratio, 2.0) && near(b.lhs, 1.0 / 3.0) &&
            near(b.rhs, 1.0 / 6.0) && near(b.ratio, 2.0);
  std::mt19937_64 gen(1004);
  double worst = 0.0;
  int violations = 0;
  for (int i = 0; i < 20; ++i) {
    const auto d = random_support(gen, 2 + i % 2);
    const double mu = 0.5 * (i % 3);
    const auto l = random_degenerate_kernel2(d, mu, gen());
    const auto r = variance_bound(l, 2, mu, d, 2 + i % 5);
    worst = std::max(worst, r.ratio);
    if (!(r.lhs <= 2.0 * r.rhs * (1.0 + 1e-12))) ++violations;
  }
  const auto j = to_json(b);
  ok = ok && violations == 0 && j.contains("stated_constant") && j.contains("ratio");
  report(4, ok,
         "xy on +-1: n=2 (" + fmt("%.6g", a.lhs) + ", " + fmt("%.6g", a.rhs) + ", " + fmt("%.6g", a.ratio) +
             "), n=3 (" + fmt("%.6g", b.lhs) + ", " + fmt("%.6g", b.rhs) + ", " + fmt("%.6g", b.ratio) +
             "); stated constant " + fmt("%.0f", b.stated_constant) + ", measured ratio up to " +
             fmt("%.4f", worst) + " over 20 random kernels");
}

void criterion5() {
  const auto start = Clock::now();
  auto c = config(Experiment::kArvesen, "product:m=2", "normal:1,1", {250, 500, 1000, 2000}, 200, 1005);
  c.tolerances.relative_mean = 0.05;
  c.require_trend = true;
  const auto r = run_experiment(c, workers());
  const double t = seconds_since(start);
  std::string detail = "Arvesen mean vs E h1^2 = 1:";
  for (const auto& rec : r.records) detail += " [" + record_line(rec) + "]";
  detail += r.trend_pass ? ", |mean-1| shrinking" : ", |mean-1| not monotone";
  report(5, r.pass && r.records.back().pass && t < 300.0, detail + ", " + fmt("%.1f s", t));
}

void criterion6() {
  bool ok = true;
  std::string detail;
  for (double t0 : {1.0, 0.5}) {
    auto c = config(Experiment::kCltT0, "identity", "normal:0,1", {500}, 1000, 1006);
    c.theta = 0.0;
    c.t0 = t0;
    c.tolerances.ks = 0.06;
    const auto r = run_experiment(c, workers());
    ok = ok && r.pass;
    detail += (detail.empty() ? "" : "; ") + fmt("t0=%.1f ", t0) + record_line(r.records.front());
  }
  report(6, ok, "studentized identity kernel, N(0,1): " + detail);
}

void criterion7() {
  const auto start = Clock::now();
  auto c = config(Experiment::kCltT0, "product:m=2,a=2", "example:a=2", {500, 2000, 5000}, 500, 1007);
  c.theta = 4.0;
  c.tolerances.ks = 0.09;
  const auto r = run_experiment(c, workers());
  const double t = seconds_since(start);
  std::string detail;
  for (const auto& rec : r.records) detail += " [" + record_line(rec) + "]";
  const bool last = r.records.back().pass;
  report(7, last && r.trend_pass && t < 600.0,
         "example density, product m=2:" + detail + (r.trend_pass ? ", KS decreasing" : ", KS not decreasing") + ", " +
             fmt("%.1f s", t));
}

/// Sup of simple random walks of `steps` steps scaled by sqrt(steps).
std::vector<double> random_walk_sups(int walks, int steps, std::uint64_t seed) {
  return parallel_indexed<double>(walks, workers(), [&](int w) {
    Xoshiro256ss gen(replication_seed(seed, static_cast<std::uint64_t>(w)));
    long pos = 0;
    long best = 0;
    std::uint64_t bits = 0;
    int left = 0;
    for (int s = 0; s < steps; ++s) {
      if (left == 0) {
        bits = gen();
        left = 64;
      }
      pos += (bits & 1U) ? 1 : -1;
      bits >>= 1;
      --left;
      best = std::max(best, pos);
    }
    return static_cast<double>(best) / std::sqrt(static_cast<double>(steps));
  });
}

void criterion8() {
  auto c = config(Experiment::kFcltSup, "identity", "normal:0,1", {1000}, 1000, 1008);
  c.theta = 0.0;
  c.tolerances.ks = 0.07;
  const auto r = run_experiment(c, workers());
  const auto sups = random_walk_sups(100000, 10000, 1009);
  const double walk_ks = ks_distance(sups, wiener_sup_cdf);
  report(8, r.pass && walk_ks <= 0.02,
         "signed sup of studentized path: " + record_line(r.records.front()) + "; reference law vs 1e5 walks ks=" +
             fmt("%.4f", walk_ks));
}

void criterion9() {
  bool finite_ok = true;
  std::string detail = "finite variance (product m=2, N(1,1)):";
  for (auto e : {Experiment::kRaikov, Experiment::kJackRaikov}) {
    auto c = config(e, "product:m=2", "normal:1,1", {2000}, 200, 1010);
    c.tolerances.relative_mean = 0.05;
    const auto r = run_experiment(c, workers());
    finite_ok = finite_ok && r.pass;
    detail += " " + to_string(e) + " [" + record_line(r.records.front()) + "]";
  }
  bool example_ok = true;
  detail += "; example a=2 with ell^2 = a^2 ln n:";
  for (auto e : {Experiment::kRaikov, Experiment::kJackRaikov}) {
    auto c = config(e, "product:m=2,a=2", "example:a=2", {10000}, 100, 1011);
    c.tolerances.relative_mean = 0.15;
    c.ell = "example_asymptotic";
    const auto r = run_experiment(c, workers());
    example_ok = example_ok && r.pass;
    detail += " " + to_string(e) + " [" + record_line(r.records.front()) + "]";
  }
  report(9, finite_ok && example_ok, detail);
}

void criterion10() {
  bool ok = true;
  std::string detail;
  struct Case {
    const char* statistic;
    const char* kernel;
    const char* dist;
    std::vector<int> grid;
  };
  const std::vector<Case> cases{{"P1_Un_sq", "variance:center=1", "normal:0,1", {50, 100, 200, 400}},
                                {"P3_diag_square", "product:m=2", "normal:1,1", {50, 100, 200, 400}},
                                {"P4_shared_j", "product:m=3", "normal:0,1", {10, 20, 40, 60}}};
  for (const auto& cs : cases) {
    auto c = config(Experiment::kNegligibility, cs.kernel, cs.dist, cs.grid, 200, 1012);
    c.statistic = cs.statistic;
    const auto r = run_experiment(c, workers());
    ok = ok && r.pass;
    detail += std::string(detail.empty() ? "" : "; ") + cs.statistic + " " + fmt("%.3g", r.records.front().mean) +
              " -> " + fmt("%.3g", r.records.back().mean);
  }
  bool closed = true;
  for (int n : {3, 4, 10, 100, 400}) {
    const std::vector<double> data(static_cast<std::size_t>(n), 0.25);
    closed = closed && negligibility_statistic(NegligibilityStatistic::kDiagSquare, kernels::constant(2, 1.0), data) ==
                           1.0 / (n - 2);
  }
  report(10, ok && closed, detail + (closed ? "; constant-kernel 1/(n-2) exact" : "; constant-kernel value off"));
}

std::string stripped(const ConvergenceReport& r) {
  auto j = to_json(r);
  j.erase("runtime_seconds");
  return j.dump(2);
}

void criterion11() {
  std::vector<ExperimentConfig> configs;
  {
    auto c = config(Experiment::kCltT0, "product:m=2,a=2", "example:a=2", {100, 200}, 60, 1013);
    c.theta = 4.0;
    configs.push_back(c);
    c.experiment = Experiment::kFcltSup;
    c.process = ProcessKind::kPseudo;
    configs.push_back(c);
  }
  configs.push_back(config(Experiment::kRaikov, "variance", "normal:0,1", {100, 200}, 60, 1014));
  configs.push_back(config(Experiment::kJackRaikov, "product:m=3", "normal:1,1", {60, 120}, 60, 1015));
  configs.push_back(config(Experiment::kArvesen, "product:m=2", "normal:1,1", {100, 200}, 60, 1016));
  {
    auto c = config(Experiment::kNegligibility, "product:m=2", "normal:1,1", {20, 40}, 60, 1017);
    c.statistic = "P3_diag_square";
    configs.push_back(c);
  }
  bool ok = true;
  for (const auto& c : configs) {
    const auto ref = stripped(run_experiment(c, 1));
    for (int w : {1, 2, 4, 7}) ok = ok && stripped(run_experiment(c, w)) == ref;
  }
  report(11, ok, std::to_string(configs.size()) + " configs, report.json identical at 1, 2, 4 and 7 workers");
}

}  // namespace

int main() {
  const std::array<void (*)(), 11> all{criterion1, criterion2, criterion3, criterion4,  criterion5, criterion6,
                                       criterion7, criterion8, criterion9, criterion10, criterion11};
  for (std::size_t i = 0; i < all.size(); ++i) {
    try {
      all[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i + 1), false, std::string("threw: ") + e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, all.size());
  return failures == 0 ? 0 : 1;
}
