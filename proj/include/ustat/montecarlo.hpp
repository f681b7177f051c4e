#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ustat/decomposition_lab.hpp"
#include "ustat/distribution.hpp"
#include "ustat/errors.hpp"
#include "ustat/jackknife.hpp"
#include "ustat/kernel.hpp"
#include "ustat/pairwise_sum.hpp"
#include "ustat/processes.hpp"
#include "ustat/rng.hpp"
#include "ustat/samplers.hpp"

namespace ustat {

// ---------------------------------------------------------------------------
// Reference laws and KS distance

/// Phi(x) = erfc(-x / sqrt 2) / 2.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// P(sup_{0<=t<=1} W(t) <= x) = 2 Phi(x) - 1 by reflection; 0 for x < 0.
inline double wiener_sup_cdf(double x) { return x < 0.0 ? 0.0 : 2.0 * normal_cdf(x) - 1.0; }

inline double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw invalid_argument("ks_distance needs at least one sample");
  std::sort(samples.begin(), samples.end());
  const auto count = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, std::abs(static_cast<double>(i + 1) / count - f), std::abs(f - static_cast<double>(i) / count)});
  }
  return d;
}

// ---------------------------------------------------------------------------
// Configuration

enum class Experiment { kCltT0, kFcltSup, kRaikov, kJackRaikov, kArvesen, kNegligibility };

inline std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::kCltT0: return "CLT_T0";
    case Experiment::kFcltSup: return "FCLT_SUP";
    case Experiment::kRaikov: return "RAIKOV";
    case Experiment::kJackRaikov: return "JACK_RAIKOV";
    case Experiment::kArvesen: return "ARVESEN";
    case Experiment::kNegligibility: return "NEGLIGIBILITY";
  }
  return "?";
}

inline Experiment parse_experiment(const std::string& s) {
  for (auto e : {Experiment::kCltT0, Experiment::kFcltSup, Experiment::kRaikov, Experiment::kJackRaikov,
                 Experiment::kArvesen, Experiment::kNegligibility}) {
    if (to_string(e) == s) return e;
  }
  throw config_error("unknown experiment '" + s +
                     "' (CLT_T0, FCLT_SUP, RAIKOV, JACK_RAIKOV, ARVESEN, NEGLIGIBILITY)");
}

enum class ProcessKind { kStudentized, kPseudo };

inline constexpr int kConfigVersion = 1;
inline constexpr int kMinReplications = 50;
inline constexpr double kMaxDropFraction = 0.01;

struct Tolerances {
  double ks = 0.06;
  double relative_mean = 0.05;
  bool operator==(const Tolerances&) const = default;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::kCltT0;
  std::string kernel = "identity";
  std::string distribution = "normal:0,1";
  std::optional<double> theta;
  double t0 = 1.0;
  std::vector<int> n_grid;
  int replications = 0;
  std::uint64_t base_seed = 0;
  Tolerances tolerances;
  ProcessKind process = ProcessKind::kStudentized;
  /// ell(n) route for RAIKOV / JACK_RAIKOV: "auto" or an EllMethod name.
  std::string ell = "auto";
  /// NEGLIGIBILITY statistic id.
  std::string statistic = "P1_Un_sq";
  /// Also require the per-n discrepancy (KS, or |mean - target|) to be non-increasing along n_grid.
  bool require_trend = false;
};

inline void validate(const ExperimentConfig& c) {
  if (c.n_grid.empty()) throw config_error("n_grid must be nonempty");
  for (std::size_t i = 0; i < c.n_grid.size(); ++i) {
    if (c.n_grid[i] < 1) throw config_error("n_grid entries must be positive");
    if (i > 0 && c.n_grid[i] <= c.n_grid[i - 1]) throw config_error("n_grid must be strictly ascending");
  }
  if (c.replications < kMinReplications) {
    throw config_error("replications must be >= " + std::to_string(kMinReplications) + ", got " +
                       std::to_string(c.replications));
  }
  if (!(c.t0 > 0.0 && c.t0 <= 1.0)) throw config_error("t0 must lie in (0, 1]");
  if (!(c.tolerances.ks > 0.0) || !(c.tolerances.relative_mean > 0.0)) throw config_error("tolerances must be positive");
  if (c.ell != "auto") {
    try {
      (void)parse_ell_method(c.ell);
    } catch (const invalid_argument& e) {
      throw config_error(e.what());
    }
  }
  if (c.experiment == Experiment::kNegligibility) {
    try {
      (void)parse_negligibility_statistic(c.statistic);
    } catch (const invalid_argument& e) {
      throw config_error(e.what());
    }
  }
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["version"] = kConfigVersion;
  j["experiment"] = to_string(c.experiment);
  j["kernel"] = c.kernel;
  j["distribution"] = c.distribution;
  j["theta"] = c.theta ? nlohmann::json(*c.theta) : nlohmann::json(nullptr);
  j["t0"] = c.t0;
  j["n_grid"] = c.n_grid;
  j["replications"] = c.replications;
  j["base_seed"] = c.base_seed;
  j["tolerances"] = {{"ks", c.tolerances.ks}, {"relative_mean", c.tolerances.relative_mean}};
  j["process"] = c.process == ProcessKind::kStudentized ? "studentized" : "pseudo";
  j["ell"] = c.ell;
  j["statistic"] = c.statistic;
  j["require_trend"] = c.require_trend;
  return j;
}

/// Strict parse: a version field is required and unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw config_error("config must be a JSON object");
  static const std::vector<std::string> known = {"version", "experiment", "kernel", "distribution", "theta",
                                                 "t0", "n_grid", "replications", "base_seed", "tolerances",
                                                 "process", "ell", "statistic", "require_trend"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw config_error("unknown config key '" + key + "'");
  }
  if (!j.contains("version")) throw config_error("config needs a 'version' field");
  ExperimentConfig c;
  try {
    if (j.at("version").get<int>() != kConfigVersion) {
      throw config_error("unsupported config version " + j.at("version").dump());
    }
    for (const char* req : {"experiment", "n_grid", "replications", "base_seed"}) {
      if (!j.contains(req)) throw config_error(std::string("config needs '") + req + "'");
    }
    c.experiment = parse_experiment(j.at("experiment").get<std::string>());
    if (j.contains("kernel")) c.kernel = j.at("kernel").get<std::string>();
    if (j.contains("distribution")) c.distribution = j.at("distribution").get<std::string>();
    if (j.contains("theta") && !j.at("theta").is_null()) c.theta = j.at("theta").get<double>();
    if (j.contains("t0")) c.t0 = j.at("t0").get<double>();
    c.n_grid = j.at("n_grid").get<std::vector<int>>();
    c.replications = j.at("replications").get<int>();
    c.base_seed = j.at("base_seed").get<std::uint64_t>();
    if (j.contains("tolerances")) {
      const auto& t = j.at("tolerances");
      if (!t.is_object()) throw config_error("'tolerances' must be an object");
      for (const auto& [key, _] : t.items()) {
        if (key != "ks" && key != "relative_mean") throw config_error("unknown tolerance key '" + key + "'");
      }
      if (t.contains("ks")) c.tolerances.ks = t.at("ks").get<double>();
      if (t.contains("relative_mean")) c.tolerances.relative_mean = t.at("relative_mean").get<double>();
    }
    if (j.contains("process")) {
      const auto p = j.at("process").get<std::string>();
      if (p == "studentized") {
        c.process = ProcessKind::kStudentized;
      } else if (p == "pseudo") {
        c.process = ProcessKind::kPseudo;
      } else {
        throw config_error("process must be 'studentized' or 'pseudo'");
      }
    }
    if (j.contains("ell")) c.ell = j.at("ell").get<std::string>();
    if (j.contains("statistic")) c.statistic = j.at("statistic").get<std::string>();
    if (j.contains("require_trend")) c.require_trend = j.at("require_trend").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad config value: ") + e.what());
  }
  validate(c);
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error(std::string("malformed JSON config: ") + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Report

struct NRecord {
  int n = 0;
  std::string statistic;
  double mean = 0.0;
  double se = 0.0;
  double median = 0.0;
  double variance = 0.0;
  std::optional<double> ks;
  /// Target of the mean check (ratio experiments); empty for KS experiments.
  std::optional<double> target;
  int used = 0;
  int dropped = 0;
  bool pass = false;
  bool operator==(const NRecord&) const = default;
};

struct ConvergenceReport {
  ExperimentConfig config;
  std::string reference;  // law or target the statistic is compared with
  std::vector<NRecord> records;
  bool degenerate_configuration = false;
  bool trend_pass = true;
  bool variance_decreasing = true;
  bool pass = false;
  std::vector<std::string> notes;
  double runtime_seconds = 0.0;
};

inline bool same_content(const ConvergenceReport& a, const ConvergenceReport& b) {
  return to_json(a.config) == to_json(b.config) && a.reference == b.reference && a.records == b.records &&
         a.degenerate_configuration == b.degenerate_configuration && a.trend_pass == b.trend_pass &&
         a.variance_decreasing == b.variance_decreasing && a.pass == b.pass && a.notes == b.notes;
}

inline nlohmann::json to_json(const ConvergenceReport& r) {
  nlohmann::json j;
  j["config"] = to_json(r.config);
  j["reference"] = r.reference;
  auto recs = nlohmann::json::array();
  for (const auto& rec : r.records) {
    recs.push_back({{"n", rec.n},
                    {"statistic", rec.statistic},
                    {"mean", rec.mean},
                    {"se", rec.se},
                    {"median", rec.median},
                    {"variance", rec.variance},
                    {"ks", rec.ks ? nlohmann::json(*rec.ks) : nlohmann::json(nullptr)},
                    {"target", rec.target ? nlohmann::json(*rec.target) : nlohmann::json(nullptr)},
                    {"replications_used", rec.used},
                    {"dropped", rec.dropped},
                    {"pass", rec.pass}});
  }
  j["records"] = std::move(recs);
  j["degenerate_configuration"] = r.degenerate_configuration;
  j["trend_pass"] = r.trend_pass;
  j["variance_decreasing"] = r.variance_decreasing;
  j["pass"] = r.pass;
  j["notes"] = r.notes;
  j["runtime_seconds"] = r.runtime_seconds;
  return j;
}

inline ConvergenceReport report_from_json(const nlohmann::json& j) {
  ConvergenceReport r;
  r.config = config_from_json(j.at("config"));
  r.reference = j.at("reference").get<std::string>();
  for (const auto& rec : j.at("records")) {
    NRecord x;
    x.n = rec.at("n").get<int>();
    x.statistic = rec.at("statistic").get<std::string>();
    x.mean = rec.at("mean").get<double>();
    x.se = rec.at("se").get<double>();
    x.median = rec.at("median").get<double>();
    x.variance = rec.at("variance").get<double>();
    if (!rec.at("ks").is_null()) x.ks = rec.at("ks").get<double>();
    if (!rec.at("target").is_null()) x.target = rec.at("target").get<double>();
    x.used = rec.at("replications_used").get<int>();
    x.dropped = rec.at("dropped").get<int>();
    x.pass = rec.at("pass").get<bool>();
    r.records.push_back(std::move(x));
  }
  r.degenerate_configuration = j.at("degenerate_configuration").get<bool>();
  r.trend_pass = j.at("trend_pass").get<bool>();
  r.variance_decreasing = j.at("variance_decreasing").get<bool>();
  r.pass = j.at("pass").get<bool>();
  r.notes = j.at("notes").get<std::vector<std::string>>();
  r.runtime_seconds = j.at("runtime_seconds").get<double>();
  return r;
}

/// Per-n replication values, in replication order; nullopt marks a dropped replication.
struct ReplicationValues {
  int n = 0;
  std::vector<std::optional<double>> values;
};

struct ExperimentResult {
  ConvergenceReport report;
  std::vector<ReplicationValues> replications;
};

// ---------------------------------------------------------------------------
// Worker pool

inline int default_workers() {
  if (const char* env = std::getenv("USTAT_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
  }
  return 1;
}

/// Runs task(0..count-1) on `workers` threads; results land at their own index,
/// so the outcome does not depend on scheduling. The first exception is rethrown.
template <class T, class Task>
std::vector<T> parallel_indexed(int count, int workers, Task task) {
  std::vector<T> out(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        out[static_cast<std::size_t>(i)] = task(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
        return;
      }
    }
  };
  const int threads = std::clamp(workers, 1, std::max(1, count));
  if (threads == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

namespace detail {

struct Summary {
  double mean = 0.0;
  double se = 0.0;
  double median = 0.0;
  double variance = 0.0;
};

inline Summary summarize(std::vector<double> v) {
  Summary s;
  if (v.empty()) return s;
  const auto count = static_cast<double>(v.size());
  s.mean = pairwise_sum(v) / count;
  std::vector<double> dev(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) dev[i] = (v[i] - s.mean) * (v[i] - s.mean);
  s.variance = v.size() > 1 ? pairwise_sum(dev) / (count - 1.0) : 0.0;
  s.se = std::sqrt(s.variance / count);
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  s.median = v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  return s;
}

inline std::vector<double> projections(const Kernel& kernel, std::span<const double> data, const Distribution& dist) {
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto v = kernel.analytic_projection(data[i], dist);
    out[i] = v ? *v : project_h1(kernel, data[i], dist, {}).value;
  }
  return out;
}

inline bool needs_ell(Experiment e) {
  return e == Experiment::kRaikov || e == Experiment::kJackRaikov || e == Experiment::kArvesen;
}

}  // namespace detail

/// Runs every replication of `config`; workers <= 0 means USTAT_WORKERS or 1.
inline ExperimentResult run_experiment_detailed(const ExperimentConfig& config, int workers = 0) {
  const auto start = std::chrono::steady_clock::now();
  validate(config);
  if (workers <= 0) workers = default_workers();

  Kernel kernel = [&] {
    try {
      return parse_kernel(config.kernel);
    } catch (const std::exception& e) {
      throw config_error(e.what());
    }
  }();
  Distribution dist = [&] {
    try {
      return parse_distribution(config.distribution);
    } catch (const std::exception& e) {
      throw config_error(e.what());
    }
  }();
  const int m = kernel.order();

  ExperimentResult result;
  auto& report = result.report;
  report.config = config;

  if (config.n_grid.front() <= m) throw config_error("every n in n_grid must exceed the kernel order");

  // NEGLIGIBILITY is a lab trend, not a per-replication law check.
  if (config.experiment == Experiment::kNegligibility) {
    const auto id = parse_negligibility_statistic(config.statistic);
    const auto trend = negligibility_trend(id, kernel, dist, config.n_grid, config.replications, config.base_seed);
    report.reference = "mean |statistic| halves from first to last n";
    for (const auto& row : trend.rows) {
      NRecord rec;
      rec.n = row.n;
      rec.statistic = trend.statistic;
      rec.mean = row.mean_abs;
      rec.se = row.std_error;
      rec.median = row.mean_abs;
      rec.used = config.replications;
      rec.pass = true;
      report.records.push_back(rec);
    }
    report.trend_pass = trend.decreasing;
    report.pass = trend.decreasing;
    report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
  }

  std::optional<double> theta = config.theta ? config.theta : kernel.theta(dist);
  const bool path_experiment = config.experiment == Experiment::kCltT0 || config.experiment == Experiment::kFcltSup;
  if (path_experiment && !theta) throw config_error("theta is unknown for this kernel and distribution; set it");

  std::optional<EllMethod> ell_method;
  if (config.ell != "auto") ell_method = parse_ell_method(config.ell);
  if (config.experiment == Experiment::kArvesen) ell_method = EllMethod::kAnalyticFiniteVar;

  std::string statistic;
  switch (config.experiment) {
    case Experiment::kCltT0:
      statistic = "[n t0] U_[n t0]";
      report.reference = "Phi(x / sqrt(t0))";
      break;
    case Experiment::kFcltSup:
      statistic = "sup path";
      report.reference = "2 Phi(x) - 1";
      break;
    case Experiment::kRaikov:
      statistic = "V_n^2 / (n ell^2)";
      report.reference = "1";
      break;
    case Experiment::kJackRaikov:
      statistic = "jackknife sum / (m^2 ell^2)";
      report.reference = "1";
      break;
    case Experiment::kArvesen:
      statistic = "jackknife sum / m^2";
      report.reference = "E h1^2";
      break;
    case Experiment::kNegligibility: break;
  }

  for (int n : config.n_grid) {
    // Target scale for ratio experiments.
    double ell_sq = 1.0;
    if (detail::needs_ell(config.experiment)) {
      try {
        ell_sq = ell_method ? estimate_ell(dist, kernel, n, *ell_method).ell_sq : estimate_ell(dist, kernel, n).ell_sq;
      } catch (const unsupported_operation& e) {
        const auto second = detail::projection_second_moment(kernel, dist);
        if (second && *second == 0.0) {
          report.degenerate_configuration = true;
          report.notes.push_back(std::string("degenerate configuration: ") + e.what());
          break;
        }
        throw config_error(e.what());
      }
    }

    const auto task = [&, n, ell_sq](int r) -> std::optional<double> {
      const auto data = sample(dist, static_cast<std::size_t>(n), replication_seed(config.base_seed, static_cast<std::uint64_t>(r)));
      try {
        switch (config.experiment) {
          case Experiment::kCltT0:
          case Experiment::kFcltSup: {
            StepProcess path;
            if (config.process == ProcessKind::kStudentized) {
              path = studentized_path(kernel, data, *theta);
            } else {
              const auto proj = detail::projections(kernel, data, dist);
              path = pseudo_selfnormalized_path(kernel, data, *theta, proj);
            }
            return config.experiment == Experiment::kCltT0 ? path.at_time(config.t0) : sup_functional(path);
          }
          case Experiment::kRaikov: {
            const auto proj = detail::projections(kernel, data, dist);
            const double v = pseudo_normalizer(proj);
            return v * v / (static_cast<double>(n) * ell_sq);
          }
          case Experiment::kJackRaikov:
          case Experiment::kArvesen: {
            const auto s = jackknife(kernel, data);
            if (jackknife_is_degenerate(s)) return std::nullopt;
            const double scale = config.experiment == Experiment::kArvesen ? 1.0 : ell_sq;
            return s.sum_sq / (static_cast<double>(m) * m * scale);
          }
          case Experiment::kNegligibility: break;
        }
      } catch (const degenerate_normalizer&) {
        return std::nullopt;
      }
      return std::nullopt;
    };
    auto values = parallel_indexed<std::optional<double>>(config.replications, workers, task);

    std::vector<double> kept;
    kept.reserve(values.size());
    for (const auto& v : values) {
      if (v) kept.push_back(*v);
    }
    NRecord rec;
    rec.n = n;
    rec.statistic = statistic;
    rec.used = static_cast<int>(kept.size());
    rec.dropped = config.replications - rec.used;
    const auto s = detail::summarize(kept);
    rec.mean = s.mean;
    rec.se = s.se;
    rec.median = s.median;
    rec.variance = s.variance;
    const bool drops_ok = rec.dropped <= kMaxDropFraction * config.replications;
    if (kept.empty()) {
      rec.pass = false;
      report.degenerate_configuration = true;
      report.notes.push_back("n = " + std::to_string(n) + ": every replication had a zero normalizer");
    } else if (path_experiment) {
      const double t0 = config.t0;
      rec.ks = config.experiment == Experiment::kCltT0
                   ? ks_distance(kept, [t0](double x) { return normal_cdf(x / std::sqrt(t0)); })
                   : ks_distance(kept, wiener_sup_cdf);
      rec.pass = drops_ok && *rec.ks <= config.tolerances.ks;
    } else {
      const double target = config.experiment == Experiment::kArvesen ? ell_sq : 1.0;
      rec.target = target;
      rec.pass = drops_ok && std::abs(rec.mean - target) <= config.tolerances.relative_mean * target;
    }
    if (!drops_ok) {
      report.notes.push_back("n = " + std::to_string(n) + ": " + std::to_string(rec.dropped) +
                             " replications dropped for a zero normalizer (over 1%)");
    }
    report.records.push_back(rec);
    result.replications.push_back({n, std::move(values)});
  }

  // Trend diagnostics along the grid.
  const auto discrepancy = [](const NRecord& r) {
    if (r.ks) return *r.ks;
    const double t = r.target.value_or(1.0);
    return std::abs(r.mean - t) / t;
  };
  for (std::size_t i = 1; i < report.records.size(); ++i) {
    if (discrepancy(report.records[i]) > discrepancy(report.records[i - 1])) report.trend_pass = false;
    if (report.records[i].variance > report.records[i - 1].variance) report.variance_decreasing = false;
  }
  bool all = !report.records.empty() && !report.degenerate_configuration;
  for (const auto& r : report.records) all = all && r.pass;
  report.pass = all && (!config.require_trend || report.trend_pass);
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

inline ConvergenceReport run_experiment(const ExperimentConfig& config, int workers = 0) {
  return run_experiment_detailed(config, workers).report;
}

}  // namespace ustat
