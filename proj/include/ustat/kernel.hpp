#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <tuple>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ustat/combinatorics.hpp"
#include "ustat/distribution.hpp"
#include "ustat/errors.hpp"
#include "ustat/pairwise_sum.hpp"

namespace ustat {

/// Marks kernels of the form prod(x_i) - shift, which the engine evaluates
/// through elementary symmetric polynomials instead of enumeration.
struct ProductForm {
  int order;
  double shift;
};

/// A real kernel of order m with optional analytic theta = E h and projection
/// h1(x) = E(h - theta | X_1 = x) under a given distribution.
///
/// Built-in kernels are permutation-symmetric; user kernels are taken on
/// trust (no automatic symmetrization). Kernels are immutable and cheap to
/// copy, so they can be shared across threads.
class Kernel {
 public:
  using EvalFn = std::function<double(std::span<const double>)>;
  using ThetaFn = std::function<std::optional<double>(const Distribution&)>;
  using ProjectionFn = std::function<std::optional<double>(double, const Distribution&)>;

  Kernel(int order, std::string name, EvalFn eval, ThetaFn theta = {}, ProjectionFn projection = {})
      : order_(order), name_(std::move(name)), eval_(std::move(eval)), theta_(std::move(theta)),
        projection_(std::move(projection)) {
    if (order_ < 1) throw invalid_argument("kernel order must be positive");
    if (!eval_) throw invalid_argument("kernel needs an evaluation function");
  }

  [[nodiscard]] int order() const { return order_; }
  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] bool symmetric() const { return symmetric_; }
  [[nodiscard]] const std::optional<ProductForm>& product_form() const { return product_; }

  /// Unchecked evaluation; points.size() must equal order().
  double operator()(std::span<const double> points) const { return eval_(points); }

  [[nodiscard]] std::optional<double> theta(const Distribution& dist) const {
    return theta_ ? theta_(dist) : std::nullopt;
  }

  [[nodiscard]] std::optional<double> analytic_projection(double x, const Distribution& dist) const {
    if (projection_) return projection_(x, dist);
    if (order_ == 1) {
      // h1 = h - theta when m = 1.
      if (auto t = theta(dist)) return eval_(std::span<const double>(&x, 1)) - *t;
    }
    return std::nullopt;
  }

  Kernel with_symmetry(bool symmetric) const {
    Kernel k = *this;
    k.symmetric_ = symmetric;
    return k;
  }

  Kernel with_product_form(std::optional<ProductForm> form) const {
    Kernel k = *this;
    k.product_ = form;
    return k;
  }

 private:
  int order_;
  std::string name_;
  EvalFn eval_;
  ThetaFn theta_;
  ProjectionFn projection_;
  bool symmetric_ = true;
  std::optional<ProductForm> product_;
};

/// Checked evaluation.
inline double eval_kernel(const Kernel& kernel, std::span<const double> points) {
  if (static_cast<int>(points.size()) != kernel.order()) {
    throw invalid_argument("kernel '" + kernel.name() + "' has order " + std::to_string(kernel.order()) +
                           " but got " + std::to_string(points.size()) + " points");
  }
  for (double p : points) {
    if (!std::isfinite(p)) throw domain_error("kernel '" + kernel.name() + "' evaluated at a non-finite point");
  }
  return kernel(points);
}

inline double eval_kernel(const Kernel& kernel, std::initializer_list<double> points) {
  return eval_kernel(kernel, std::span<const double>(points.begin(), points.size()));
}

namespace kernels {

inline Kernel identity() {
  return Kernel(
             1, "identity", [](std::span<const double> x) { return x[0]; },
             [](const Distribution& d) { return d.mean(); },
             [](double x, const Distribution& d) -> std::optional<double> {
               if (auto mu = d.mean()) return x - *mu;
               return std::nullopt;
             })
      .with_product_form(ProductForm{1, 0.0});
}

/// prod(x_i). theta = mu^m and h1(x) = x mu^{m-1} - mu^m, where mu is the
/// fixed location `a` when given, else the distribution mean.
inline Kernel product(int m, std::optional<double> a = std::nullopt) {
  if (m < 1) throw invalid_argument("product kernel order must be positive");
  auto location = [a](const Distribution& d) -> std::optional<double> { return a ? a : d.mean(); };
  std::string name = "product:m=" + std::to_string(m);
  if (a) {
    std::ostringstream os;
    os.precision(17);
    os << *a;
    name += ",a=" + os.str();
  }
  return Kernel(
             m, std::move(name),
             [](std::span<const double> x) {
               // Multiply in sorted order so every permutation rounds identically.
               std::array<double, 8> small{};
               std::vector<double> big;
               std::span<double> buf;
               if (x.size() <= small.size()) {
                 buf = std::span<double>(small.data(), x.size());
               } else {
                 big.resize(x.size());
                 buf = big;
               }
               std::copy(x.begin(), x.end(), buf.begin());
               std::sort(buf.begin(), buf.end());
               double p = 1.0;
               for (double v : buf) p *= v;
               return p;
             },
             [m, location](const Distribution& d) -> std::optional<double> {
               if (auto mu = location(d)) return std::pow(*mu, m);
               return std::nullopt;
             },
             [m, location](double x, const Distribution& d) -> std::optional<double> {
               if (auto mu = location(d)) return x * std::pow(*mu, m - 1) - std::pow(*mu, m);
               return std::nullopt;
             })
      .with_product_form(ProductForm{m, 0.0});
}

/// (x - y)^2 / 2; theta = Var X, h1(x) = ((x - mu)^2 - sigma^2) / 2.
inline Kernel variance() {
  return Kernel(
      2, "variance",
      [](std::span<const double> x) {
        const double d = x[0] - x[1];
        return 0.5 * d * d;
      },
      [](const Distribution& d) { return d.variance(); },
      [](double x, const Distribution& d) -> std::optional<double> {
        auto mu = d.mean();
        auto var = d.variance();
        if (!mu || !var) return std::nullopt;
        return 0.5 * ((x - *mu) * (x - *mu) - *var);
      });
}

inline Kernel constant(int m, double c) {
  std::ostringstream os;
  os.precision(17);
  os << c;
  return Kernel(
      m, "constant:m=" + std::to_string(m) + ",c=" + os.str(), [c](std::span<const double>) { return c; },
      [c](const Distribution&) -> std::optional<double> { return c; },
      [](double, const Distribution&) -> std::optional<double> { return 0.0; });
}

/// h - c. The projection is unchanged; theta shifts by c.
inline Kernel centered(const Kernel& base, double c) {
  std::ostringstream os;
  os.precision(17);
  os << c;
  auto b = std::make_shared<const Kernel>(base);
  Kernel k(
      base.order(), base.name() + ",center=" + os.str(),
      [b, c](std::span<const double> x) { return (*b)(x) - c; },
      [b, c](const Distribution& d) -> std::optional<double> {
        if (auto t = b->theta(d)) return *t - c;
        return std::nullopt;
      },
      [b](double x, const Distribution& d) { return b->analytic_projection(x, d); });
  k = k.with_symmetry(base.symmetric());
  if (auto pf = base.product_form()) k = k.with_product_form(ProductForm{pf->order, pf->shift + c});
  return k;
}

/// User kernel; symmetry is the caller's responsibility.
inline Kernel custom(int m, std::string name, Kernel::EvalFn fn, Kernel::ThetaFn theta = {},
                     Kernel::ProjectionFn projection = {}) {
  return Kernel(m, std::move(name), std::move(fn), std::move(theta), std::move(projection));
}

}  // namespace kernels

/// Kernel registry. Accepted forms (any of them may add `center=<c>`):
///   identity | product:m=2 | product:m=2,a=2 | variance | constant:m=2,c=1
inline Kernel parse_kernel(std::string_view spec) {
  const std::string context(spec);
  const auto colon = spec.find(':');
  const std::string family(detail::trim(spec.substr(0, colon)));
  const std::string_view rest = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
  detail::ParamSet p(detail::parse_params(rest, context), context);

  auto integer = [&](double v, const char* what) {
    if (v != std::floor(v) || v < 1 || v > 64) {
      throw invalid_argument(std::string(what) + " must be a positive integer in '" + context + "'");
    }
    return static_cast<int>(v);
  };

  Kernel k = [&]() -> Kernel {
    if (family == "identity") return kernels::identity();
    if (family == "variance") return kernels::variance();
    if (family == "product") {
      const int m = integer(p.get("m", 0).value_or(2), "m");
      return kernels::product(m, p.get("a", 1));
    }
    if (family == "constant") {
      const int m = integer(p.get("m", 0).value_or(2), "m");
      return kernels::constant(m, p.get("c", 1).value_or(1.0));
    }
    throw invalid_argument("unknown kernel '" + family +
                           "'; registry has: identity, product:m=<m>[,a=<a>], variance, constant:m=<m>,c=<c>");
  }();
  if (auto c = p.get("center", detail::ParamSet::kKeyOnly)) k = kernels::centered(k, *c);
  p.finish();
  return k;
}

// ---------------------------------------------------------------------------
// Projection h1

enum class ProjectionMethod { kAnalytic, kExactEnumeration, kMonteCarlo };

struct ProjectionOptions {
  /// Draws of the remaining m - 1 arguments for the Monte Carlo route. Zero
  /// disables that route.
  std::uint64_t mc_budget = 0;
  std::uint64_t seed = 0;
};

struct ProjectionResult {
  double value = 0.0;
  double std_error = 0.0;
  ProjectionMethod method = ProjectionMethod::kAnalytic;
};

/// E h(X_1..X_m) for finite support, by enumeration of support^m.
inline double exact_theta(const Kernel& kernel, const Distribution& dist) {
  const auto& f = dist.finite_support();
  const int s = static_cast<int>(f.support.size());
  const int m = kernel.order();
  check_enumeration_budget(std::pow(static_cast<double>(s), m), "exact theta");
  PairwiseSum acc;
  std::vector<double> pts(static_cast<std::size_t>(m));
  for_each_grid_point(s, m, [&](std::span<const int> idx) {
    double w = 1.0;
    for (int i = 0; i < m; ++i) {
      pts[static_cast<std::size_t>(i)] = f.support[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
      w *= f.probabilities[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    }
    if (w != 0.0) acc.add(w * kernel(pts));
  });
  return acc.total();
}

/// E h(x, X_2..X_m) for finite support (not centred).
inline double exact_conditional_first(const Kernel& kernel, double x, const Distribution& dist) {
  const auto& f = dist.finite_support();
  const int s = static_cast<int>(f.support.size());
  const int m = kernel.order();
  std::vector<double> pts(static_cast<std::size_t>(m));
  pts[0] = x;
  if (m == 1) return kernel(pts);
  check_enumeration_budget(std::pow(static_cast<double>(s), m - 1), "exact projection");
  PairwiseSum acc;
  for_each_grid_point(s, m - 1, [&](std::span<const int> idx) {
    double w = 1.0;
    for (int i = 0; i < m - 1; ++i) {
      const auto j = static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
      pts[static_cast<std::size_t>(i + 1)] = f.support[j];
      w *= f.probabilities[j];
    }
    if (w != 0.0) acc.add(w * kernel(pts));
  });
  return acc.total();
}

/// h1(x) = E(h - theta | X_1 = x). Analytic when the kernel provides it,
/// exact enumeration on finite support, otherwise Monte Carlo with the
/// caller's budget (the standard error is reported).
inline ProjectionResult project_h1(const Kernel& kernel, double x, const Distribution& dist,
                                   const ProjectionOptions& opts) {
  if (!std::isfinite(x)) throw domain_error("projection evaluated at a non-finite point");
  if (auto v = kernel.analytic_projection(x, dist)) return {*v, 0.0, ProjectionMethod::kAnalytic};
  if (dist.is_finite_support()) {
    auto theta = kernel.theta(dist);
    if (!theta) theta = exact_theta(kernel, dist);
    return {exact_conditional_first(kernel, x, dist) - *theta, 0.0, ProjectionMethod::kExactEnumeration};
  }
  if (opts.mc_budget < 2) {
    throw unsupported_operation("projection of '" + kernel.name() + "' under " + dist.name() +
                                " needs a Monte Carlo budget of at least 2 draws");
  }
  const int m = kernel.order();
  Sampler draw(dist, opts.seed);
  std::vector<double> pts(static_cast<std::size_t>(m));

  auto mean_and_se = [&](bool conditional) {
    PairwiseSum s1;
    PairwiseSum s2;
    for (std::uint64_t b = 0; b < opts.mc_budget; ++b) {
      int first = 0;
      if (conditional) {
        pts[0] = x;
        first = 1;
      }
      for (int i = first; i < m; ++i) pts[static_cast<std::size_t>(i)] = draw();
      const double v = kernel(pts);
      s1.add(v);
      s2.add(v * v);
    }
    const double nb = static_cast<double>(opts.mc_budget);
    const double mean = s1.total() / nb;
    const double var = std::max(0.0, (s2.total() - nb * mean * mean) / (nb - 1.0));
    return std::pair{mean, std::sqrt(var / nb)};
  };

  const auto [cond, cond_se] = mean_and_se(true);
  double theta = 0.0;
  double theta_se = 0.0;
  if (auto t = kernel.theta(dist)) {
    theta = *t;
  } else {
    std::tie(theta, theta_se) = mean_and_se(false);
  }
  return {cond - theta, std::hypot(cond_se, theta_se), ProjectionMethod::kMonteCarlo};
}

// ---------------------------------------------------------------------------
// Truncation

enum class TruncationMode { kFullM, kLevelJ, kLog, kProjectionEll };

/// Indicator truncation levels n^{3m/5}, n^{3j/5}, log n and n^{1/2} ell(n).
struct TruncationRule {
  TruncationMode mode = TruncationMode::kFullM;
  std::int64_t n = 1;
  int j = 0;
  double ell_of_n = 0.0;
  /// Evaluator of E(h^(m) | X_1 = x), required by kProjectionEll.
  std::function<double(double)> projection;

  static TruncationRule full_m(std::int64_t n) { return {TruncationMode::kFullM, n, 0, 0.0, {}}; }
  static TruncationRule level_j(int j, std::int64_t n) { return {TruncationMode::kLevelJ, n, j, 0.0, {}}; }
  static TruncationRule log_n(std::int64_t n) { return {TruncationMode::kLog, n, 0, 0.0, {}}; }
  static TruncationRule projection_ell(std::int64_t n, double ell, std::function<double(double)> h1m = {}) {
    return {TruncationMode::kProjectionEll, n, 0, ell, std::move(h1m)};
  }

  /// Threshold for a kernel of order m; always strictly positive.
  [[nodiscard]] double threshold(int m) const {
    if (n < 1) throw invalid_argument("truncation needs n >= 1");
    const auto nd = static_cast<double>(n);
    switch (mode) {
      case TruncationMode::kFullM:
        return std::pow(nd, 3.0 * m / 5.0);
      case TruncationMode::kLevelJ:
        if (j < 1 || j > m - 1) throw invalid_argument("level-j truncation needs 1 <= j <= m-1");
        return std::pow(nd, 3.0 * j / 5.0);
      case TruncationMode::kLog:
        if (n < 2) throw invalid_argument("log truncation needs n >= 2");
        return std::log(nd);
      case TruncationMode::kProjectionEll:
        if (!(ell_of_n > 0.0)) throw invalid_argument("projection truncation needs ell(n) > 0");
        return std::sqrt(nd) * ell_of_n;
    }
    return 0.0;
  }
};

inline std::string to_string(TruncationMode m) {
  switch (m) {
    case TruncationMode::kFullM: return "full_m";
    case TruncationMode::kLevelJ: return "level_j";
    case TruncationMode::kLog: return "log";
    case TruncationMode::kProjectionEll: return "projection_ell";
  }
  return "?";
}

/// h * 1(|h| <= c). For kProjectionEll the indicator is
/// 1(|E(h^(m) | X_1 = x_1)| <= sqrt(n) ell(n)), a function of the first
/// argument only, so the result is no longer symmetric.
inline Kernel truncate_kernel(const Kernel& kernel, const TruncationRule& rule) {
  const double c = rule.threshold(kernel.order());
  auto base = std::make_shared<const Kernel>(kernel);
  std::ostringstream os;
  os.precision(10);
  os << c;
  std::string name = "trunc[" + to_string(rule.mode) + ",c=" + os.str() + "](" + kernel.name() + ")";
  if (rule.mode == TruncationMode::kProjectionEll) {
    if (!rule.projection) {
      throw unsupported_operation("projection truncation needs an evaluator of the truncated projection");
    }
    auto h1m = rule.projection;
    return Kernel(kernel.order(), std::move(name),
                  [base, h1m, c](std::span<const double> x) {
                    return std::abs(h1m(x[0])) <= c ? (*base)(x) : 0.0;
                  })
        .with_symmetry(false);
  }
  return Kernel(kernel.order(), std::move(name),
                [base, c](std::span<const double> x) {
                  const double v = (*base)(x);
                  return std::abs(v) <= c ? v : 0.0;
                })
      .with_symmetry(kernel.symmetric());
}

}  // namespace ustat
