#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ustat/distribution.hpp"
#include "ustat/errors.hpp"
#include "ustat/kernel.hpp"
#include "ustat/pairwise_sum.hpp"
#include "ustat/rng.hpp"

namespace ustat {

enum class EllMethod { kAnalyticFiniteVar, kExampleAsymptotic, kTruncatedFixedPoint };

inline std::string to_string(EllMethod m) {
  switch (m) {
    case EllMethod::kAnalyticFiniteVar: return "analytic_finite_var";
    case EllMethod::kExampleAsymptotic: return "example_asymptotic";
    case EllMethod::kTruncatedFixedPoint: return "truncated_fixed_point";
  }
  return "?";
}

inline EllMethod parse_ell_method(const std::string& s) {
  if (s == "analytic_finite_var" || s == "analytic") return EllMethod::kAnalyticFiniteVar;
  if (s == "example_asymptotic") return EllMethod::kExampleAsymptotic;
  if (s == "truncated_fixed_point" || s == "fixed_point") return EllMethod::kTruncatedFixedPoint;
  throw invalid_argument("unknown ell method '" + s + "'");
}

/// ell^2(n) in the norming B_n = n^{1/2} ell(n) of the projection h1(X).
struct EllEstimate {
  std::int64_t n = 0;
  double ell_sq = 0.0;
  EllMethod method = EllMethod::kAnalyticFiniteVar;
};

/// a^{2(m-1)} ln n: leading term of ell^2(n) for the product kernel of order m
/// under the example density centred at a.
inline double example_asymptotic_ell_sq(double a, int m, double n) { return std::pow(a, 2.0 * (m - 1)) * std::log(n); }

/// E[(X - a)^2 1(|X - a| <= u)] = 2 ln u for the example density (zero below u = 1).
inline double example_truncated_second_moment(double u) { return u <= 1.0 ? 0.0 : 2.0 * std::log(u); }

namespace detail {

/// Gauss-Hermite nodes/weights for the weight exp(-x^2) (Newton on the
/// three-term recurrence). Exact for polynomials of degree < 2 * count.
inline void gauss_hermite(int count, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(static_cast<std::size_t>(count), 0.0);
  weights.assign(static_cast<std::size_t>(count), 0.0);
  const double pim4 = std::pow(std::numbers::pi, -0.25);
  const int half = (count + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < half; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * count + 1.0) - 1.85575 * std::pow(2.0 * count + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(count), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * nodes[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * nodes[1];
    } else {
      z = 2.0 * z - nodes[static_cast<std::size_t>(i - 2)];
    }
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = pim4;
      double p2 = 0.0;
      for (int j = 0; j < count; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * count) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15) break;
    }
    nodes[static_cast<std::size_t>(i)] = z;
    nodes[static_cast<std::size_t>(count - 1 - i)] = -z;
    weights[static_cast<std::size_t>(i)] = 2.0 / (pp * pp);
    weights[static_cast<std::size_t>(count - 1 - i)] = weights[static_cast<std::size_t>(i)];
  }
}

/// E g(X) for X ~ N(mu, sigma^2) by 40-point Gauss-Hermite quadrature.
template <class G>
double normal_expectation(double mu, double sigma, G&& g) {
  static const auto table = [] {
    std::pair<std::vector<double>, std::vector<double>> t;
    gauss_hermite(40, t.first, t.second);
    return t;
  }();
  PairwiseSum acc;
  for (std::size_t i = 0; i < table.first.size(); ++i) {
    acc.add(table.second[i] * g(mu + std::numbers::sqrt2 * sigma * table.first[i]));
  }
  return acc.total() / std::sqrt(std::numbers::pi);
}

/// E h1(X)^2 when it is available without simulation.
inline std::optional<double> projection_second_moment(const Kernel& kernel, const Distribution& dist) {
  if (dist.is_finite_support()) {
    const auto& f = dist.finite_support();
    PairwiseSum acc;
    for (std::size_t i = 0; i < f.support.size(); ++i) {
      const double h1 = project_h1(kernel, f.support[i], dist, {}).value;
      acc.add(f.probabilities[i] * h1 * h1);
    }
    return acc.total();
  }
  if (kernel.product_form()) {
    // h1(x) = mu^{m-1} (x - mu) for the product kernel.
    auto mu = dist.mean();
    auto var = dist.variance();
    if (!mu || !var) return std::nullopt;
    if (auto probe = kernel.analytic_projection(*mu + 1.0, dist)) {
      const double slope = *probe - *kernel.analytic_projection(*mu, dist);
      return slope * slope * *var;
    }
    return std::nullopt;
  }
  if (const auto* nrm = std::get_if<Normal>(&dist.kind())) {
    if (!kernel.analytic_projection(nrm->mu, dist)) return std::nullopt;
    return normal_expectation(nrm->mu, nrm->sigma, [&](double x) {
      const double v = *kernel.analytic_projection(x, dist);
      return v * v;
    });
  }
  return std::nullopt;
}

}  // namespace detail

/// ell^2(n) for the projection of `kernel` under `dist`.
///   analytic_finite_var: Var h1(X) (finite-variance configurations)
///   example_asymptotic:  a^{2(m-1)} ln n for the example density with the product kernel
///   truncated_fixed_point: B^2 = n E[h1^2 1(|h1| <= B)] solved to 1e-6 relative; ell^2 = B^2 / n
inline EllEstimate estimate_ell(const Distribution& dist, const Kernel& kernel, std::int64_t n, EllMethod method) {
  if (n < 1) throw invalid_argument("estimate_ell needs n >= 1");
  const auto* ex = dist.as_example();
  const auto& pf = kernel.product_form();
  switch (method) {
    case EllMethod::kAnalyticFiniteVar: {
      auto v = detail::projection_second_moment(kernel, dist);
      if (!v) {
        throw unsupported_operation("no finite analytic Var h1 for '" + kernel.name() + "' under " + dist.name());
      }
      if (!(*v > 0.0)) throw unsupported_operation("Var h1 = 0: the kernel is degenerate under " + dist.name());
      return {n, *v, method};
    }
    case EllMethod::kExampleAsymptotic: {
      if (ex == nullptr || !pf || pf->order < 1) {
        throw unsupported_operation("example_asymptotic ell needs the example density with the product kernel");
      }
      if (n < 2) throw invalid_argument("example_asymptotic ell needs n >= 2 (ln n > 0)");
      return {n, example_asymptotic_ell_sq(ex->a, pf->order, static_cast<double>(n)), method};
    }
    case EllMethod::kTruncatedFixedPoint: {
      std::function<double(double)> truncated;
      if (ex != nullptr && pf) {
        const double c = std::pow(std::abs(ex->a), pf->order - 1);
        truncated = [c](double b) { return c * c * example_truncated_second_moment(b / c); };
      } else if (dist.is_finite_support()) {
        const auto& f = dist.finite_support();
        std::vector<double> h1(f.support.size());
        for (std::size_t i = 0; i < h1.size(); ++i) h1[i] = project_h1(kernel, f.support[i], dist, {}).value;
        truncated = [h1, &f](double b) {
          PairwiseSum acc;
          for (std::size_t i = 0; i < h1.size(); ++i) {
            if (std::abs(h1[i]) <= b) acc.add(f.probabilities[i] * h1[i] * h1[i]);
          }
          return acc.total();
        };
      } else {
        if (!kernel.analytic_projection(0.0, dist)) {
          throw unsupported_operation("truncated fixed point needs an analytic projection for " + dist.name());
        }
        // Fixed reference sample of projection values.
        auto xs = sample(dist, 200000, 0x5EEDULL);
        std::vector<double> h1(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) h1[i] = *kernel.analytic_projection(xs[i], dist);
        truncated = [h1](double b) {
          PairwiseSum acc;
          for (double v : h1) {
            if (std::abs(v) <= b) acc.add(v * v);
          }
          return acc.total() / static_cast<double>(h1.size());
        };
      }
      const auto nd = static_cast<double>(n);
      double b = std::sqrt(nd);
      for (int iter = 0; iter < 1000; ++iter) {
        const double t = truncated(b);
        if (!(t > 0.0)) {
          b *= 2.0;
          if (b > 1e300) break;
          continue;
        }
        const double next = std::sqrt(nd * t);
        if (std::abs(next - b) <= 1e-6 * 0.5 * next) return {n, next * next / nd, method};
        b = next;
      }
      throw unsupported_operation("truncated fixed point for ell did not converge");
    }
  }
  throw invalid_argument("unknown ell method");
}

/// Default route: analytic when the variance of h1 is finite, else the example-family asymptotic.
inline EllEstimate estimate_ell(const Distribution& dist, const Kernel& kernel, std::int64_t n) {
  if (detail::projection_second_moment(kernel, dist)) return estimate_ell(dist, kernel, n, EllMethod::kAnalyticFiniteVar);
  if (dist.as_example() && kernel.product_form()) return estimate_ell(dist, kernel, n, EllMethod::kExampleAsymptotic);
  throw unsupported_operation("infinite-variance projection of '" + kernel.name() + "' under " + dist.name() +
                              " has no ell(n) route; use truncated_fixed_point explicitly");
}

struct MomentDiagnostic {
  double p = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  /// Estimates on the nested budgets budget/16, budget/8, ..., budget.
  std::vector<std::uint64_t> ladder_budgets;
  std::vector<double> ladder_estimates;
  /// Least-squares growth of the ladder per budget doubling, relative to the full estimate.
  double relative_growth_per_doubling = 0.0;
  bool suspected_infinite = false;
};

/// Growth per doubling above which a moment is reported as suspected infinite.
inline constexpr double kMomentGrowthFlag = 0.04;

/// Monte Carlo E|h|^p from `budget` independent kernel evaluations.
/// A divergent moment shows up as estimates that keep growing along the
/// budget ladder; that growth is reported, not inferred away.
inline MomentDiagnostic moment_diagnostic(const Distribution& dist, const Kernel& kernel, double p,
                                          std::uint64_t budget, std::uint64_t seed) {
  if (!(p > 0.0)) throw invalid_argument("moment order p must be positive");
  if (budget < 16) throw invalid_argument("moment diagnostic needs a budget of at least 16");
  Sampler draw(dist, seed);
  const int m = kernel.order();
  std::vector<double> pts(static_cast<std::size_t>(m));
  MomentDiagnostic out;
  out.p = p;
  PairwiseSum s1;
  PairwiseSum s2;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  std::uint64_t next_rung = budget / 16;
  for (std::uint64_t b = 1; b <= budget; ++b) {
    for (auto& x : pts) x = draw();
    const double v = std::pow(std::abs(kernel(pts)), p);
    s1.add(v);
    s2.add(v * v);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    if (b == next_rung || b == budget) {
      out.ladder_budgets.push_back(b);
      out.ladder_estimates.push_back(lo == hi ? lo : s1.total() / static_cast<double>(b));
      next_rung *= 2;
      if (next_rung > budget) next_rung = budget;
    }
  }
  const auto nb = static_cast<double>(budget);
  out.estimate = out.ladder_estimates.back();
  const double var = std::max(0.0, (s2.total() - nb * out.estimate * out.estimate) / (nb - 1.0));
  out.std_error = lo == hi ? 0.0 : std::sqrt(var / nb);

  // Slope of estimate against log2(budget).
  const auto k = static_cast<double>(out.ladder_budgets.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < out.ladder_budgets.size(); ++i) {
    const double x = std::log2(static_cast<double>(out.ladder_budgets[i]));
    const double y = out.ladder_estimates[i];
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = k * sxx - sx * sx;
  const double slope = denom > 0 ? (k * sxy - sx * sy) / denom : 0.0;
  out.relative_growth_per_doubling = out.estimate != 0.0 ? slope / out.estimate : 0.0;
  out.suspected_infinite = out.relative_growth_per_doubling > kMomentGrowthFlag;
  return out;
}

}  // namespace ustat
