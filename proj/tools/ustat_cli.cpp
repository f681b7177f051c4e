// ustat_cli: paths, jackknife summaries, Monte Carlo studies and lab reports.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ustat/ustat.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDegenerate = 3;

struct PathArgs {
  std::string kernel = "identity";
  std::string dist = "normal:0,1";
  std::optional<double> theta;
  int n = 100;
  std::uint64_t seed = 1;
  std::string process = "studentized";
  std::string out = "path.csv";
  std::string svg;
};

struct JackArgs {
  std::string kernel = "product:m=2";
  std::string dist = "normal:1,1";
  int n = 30;
  std::uint64_t seed = 1;
  std::string data;
};

struct StudyArgs {
  std::string config;
  std::string out = "study";
  int workers = 0;
};

struct DecompArgs {
  std::string kernel = "product:m=2";
  std::string dist = "finite:[-1,1];[0.5,0.5]";
  int shared = 1;
  int bound_n = 0;
  std::string out;
};

struct VerifyArgs {
  std::string kernel = "product:m=2";
  std::string dist = "normal:0,1";
  int n = 30;
  int trials = 100;
  std::uint64_t seed = 1;
};

ustat::Kernel load_kernel(const std::string& s) {
  try {
    return ustat::parse_kernel(s);
  } catch (const ustat::invalid_argument& e) {
    throw ustat::config_error(e.what());
  }
}

ustat::Distribution load_dist(const std::string& s) {
  try {
    return ustat::parse_distribution(s);
  } catch (const std::exception& e) {
    throw ustat::config_error(e.what());
  }
}

int run_path(const PathArgs& a) {
  const auto kernel = load_kernel(a.kernel);
  const auto dist = load_dist(a.dist);
  if (a.n < kernel.order()) throw ustat::config_error("n must be at least the kernel order");
  if (a.process != "pseudo" && a.process != "studentized") throw ustat::config_error("--process is pseudo or studentized");
  const auto theta = a.theta ? a.theta : kernel.theta(dist);
  if (!theta) throw ustat::config_error("theta is unknown for this kernel and distribution; pass --theta");
  const auto data = ustat::sample(dist, static_cast<std::size_t>(a.n), a.seed);
  ustat::StepProcess path;
  if (a.process == "pseudo") {
    std::vector<double> proj(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) proj[i] = ustat::project_h1(kernel, data[i], dist, {}).value;
    path = ustat::pseudo_selfnormalized_path(kernel, data, *theta, proj);
  } else {
    if (a.n < kernel.order() + 1) throw ustat::config_error("the studentized path needs n >= m + 1");
    path = ustat::studentized_path(kernel, data, *theta);
  }
  ustat::io::write_text(a.out, ustat::io::path_csv(path));
  if (!a.svg.empty()) ustat::io::write_text(a.svg, ustat::io::path_svg(path));
  std::cout << "wrote " << a.out << " (" << path.n + 1 << " rows), sup = " << ustat::sup_functional(path) << '\n';
  return kExitOk;
}

int run_jackknife(const JackArgs& a) {
  const auto kernel = load_kernel(a.kernel);
  std::vector<double> data;
  if (!a.data.empty()) {
    for (auto part : ustat::detail::split(a.data, ',')) data.push_back(ustat::detail::parse_number(part, "--data"));
  } else {
    data = ustat::sample(load_dist(a.dist), static_cast<std::size_t>(a.n), a.seed);
  }
  if (static_cast<int>(data.size()) <= kernel.order()) throw ustat::config_error("jackknife needs n >= m + 1");
  const auto s = ustat::jackknife(kernel, data);
  nlohmann::json j{{"n", s.n},
                   {"m", s.m},
                   {"u_n", s.u_n},
                   {"sum_sq", s.sum_sq},
                   {"arvesen", ustat::arvesen_estimator(s)},
                   {"leave_one_out", s.leave_one_out}};
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int run_study(const StudyArgs& a) {
  const auto cfg = ustat::parse_config(ustat::io::read_text(a.config));
  const int workers = a.workers > 0 ? a.workers : ustat::default_workers();
  const auto result = ustat::run_experiment_detailed(cfg, workers);
  ustat::io::write_study(a.out, result);
  std::cout << ustat::io::summary_csv(result.report);
  std::cout << (result.report.pass ? "PASS" : "FAIL") << '\n';
  return result.report.pass ? kExitOk : kExitFailed;
}

int run_decomp(const DecompArgs& a) {
  const auto kernel = load_kernel(a.kernel);
  const auto dist = load_dist(a.dist);
  if (!dist.is_finite_support()) throw ustat::config_error("decomp needs a finite distribution");
  nlohmann::json report;
  const ustat::ProductStatistic ps(kernel, a.shared);
  const auto ex = ustat::build_v_expansion(ps, dist);
  report["expansion"] = ustat::to_json(ex, ps);
  if (a.bound_n > 0) {
    const double mu = kernel.theta(dist).value_or(ustat::exact_theta(kernel, dist));
    auto fn = [&kernel](std::span<const double> x) { return kernel(x); };
    report["variance_bound"] = ustat::to_json(ustat::variance_bound(fn, kernel.order(), mu, dist, a.bound_n));
  }
  const auto text = report.dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    ustat::io::write_text(a.out, text);
  }
  bool ok = true;
  for (const auto& t : ex.terms) ok = ok && ustat::check_degeneracy(t);
  return ok ? kExitOk : kExitFailed;
}

int run_verify(const VerifyArgs& a) {
  const auto kernel = load_kernel(a.kernel);
  const auto dist = load_dist(a.dist);
  if (a.n < kernel.order() + 1) throw ustat::config_error("verify-identity needs n >= m + 1");
  if (a.trials < 1) throw ustat::config_error("--trials must be positive");
  double worst = 0.0;
  for (int t = 0; t < a.trials; ++t) {
    const auto data = ustat::sample(dist, static_cast<std::size_t>(a.n), ustat::replication_seed(a.seed, static_cast<std::uint64_t>(t)));
    const double naive = ustat::naive_jackknife_sum_sq(kernel, data);
    const double closed = ustat::jackknife_closed_form(kernel, data).sum_sq;
    const double scale = std::max(std::abs(naive), std::abs(closed));
    if (scale > 0.0) worst = std::max(worst, std::abs(naive - closed) / scale);
  }
  std::cout << "max relative discrepancy " << ustat::io::format_double(worst) << " over " << a.trials << " trials\n";
  return worst <= 1e-9 ? kExitOk : kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"U-statistic processes, jackknife studentization and Monte Carlo checks"};
  app.require_subcommand(1);

  PathArgs pa;
  auto* path = app.add_subcommand("path", "write one step path as CSV (k,t,value)");
  path->add_option("--kernel", pa.kernel, "kernel spec, e.g. product:m=2");
  path->add_option("--dist", pa.dist, "distribution spec, e.g. example:a=2");
  path->add_option("--theta", pa.theta, "centering value (default: the kernel's theta)");
  path->add_option("--n", pa.n, "sample size");
  path->add_option("--seed", pa.seed, "sample seed");
  path->add_option("--process", pa.process, "pseudo or studentized");
  path->add_option("--out", pa.out, "CSV output file");
  path->add_option("--svg", pa.svg, "optional SVG output file");

  JackArgs ja;
  auto* jack = app.add_subcommand("jackknife", "leave-one-out summary as JSON");
  jack->add_option("--kernel", ja.kernel);
  jack->add_option("--dist", ja.dist);
  jack->add_option("--n", ja.n);
  jack->add_option("--seed", ja.seed);
  jack->add_option("--data", ja.data, "comma separated observations instead of sampling");

  StudyArgs sa;
  auto* study = app.add_subcommand("study", "run a Monte Carlo study config");
  study->add_option("--config", sa.config, "JSON config file")->required();
  study->add_option("--out", sa.out, "output directory");
  study->add_option("--workers", sa.workers, "worker threads (fallback: USTAT_WORKERS)");

  DecompArgs da;
  auto* decomp = app.add_subcommand("decomp", "exact expansion of h* or h** over a finite support");
  decomp->add_option("--kernel", da.kernel);
  decomp->add_option("--dist", da.dist);
  decomp->add_option("--shared", da.shared, "shared leading arguments (1 for h*, 2 for h**)");
  decomp->add_option("--bound-n", da.bound_n, "also bound the degenerate kernel sum at this n");
  decomp->add_option("--out", da.out, "JSON output file (default stdout)");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify-identity", "naive vs closed-form jackknife sum on random data");
  verify->add_option("--kernel", va.kernel);
  verify->add_option("--dist", va.dist);
  verify->add_option("--n", va.n);
  verify->add_option("--trials", va.trials);
  verify->add_option("--seed", va.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*path) return run_path(pa);
    if (*jack) return run_jackknife(ja);
    if (*study) return run_study(sa);
    if (*decomp) return run_decomp(da);
    if (*verify) return run_verify(va);
  } catch (const ustat::degenerate_normalizer& e) {
    std::cerr << "degenerate normalizer: " << e.what() << '\n';
    return kExitDegenerate;
  } catch (const ustat::config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ustat::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ustat::insufficient_data& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ustat::resource_limit& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ustat::unsupported_operation& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ustat::precondition_violation& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailed;
  }
  return kExitOk;
}
