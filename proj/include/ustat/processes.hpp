#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "ustat/errors.hpp"
#include "ustat/jackknife.hpp"
#include "ustat/kernel.hpp"
#include "ustat/pairwise_sum.hpp"
#include "ustat/ustat_engine.hpp"

namespace ustat {

/// Right-continuous step path on [0,1] sampled at t = k/n, k = 0..n.
/// values[k] is zero for k < m.
struct StepProcess {
  int n = 0;
  int m = 0;
  std::vector<double> values;

  [[nodiscard]] double t(int k) const { return static_cast<double>(k) / n; }
  /// Path value at time t, i.e. at grid index floor(n t).
  [[nodiscard]] double at_time(double time) const {
    const auto k = static_cast<int>(std::floor(static_cast<double>(n) * time + 1e-12));
    return values.at(static_cast<std::size_t>(std::clamp(k, 0, n)));
  }
};

struct Normalizers {
  double v_n = 0.0;         // sqrt(sum_i h1(X_i)^2)
  double jack_scale = 0.0;  // sqrt(n (n-1) sum_i (U^i - U_n)^2)
};

/// Where the sqrt(n) of the studentized process lives. Both choices give the same path.
enum class StudentizedNormalization {
  kRootNInDenominator,  // k (U_k - theta) / sqrt(n (n-1) sum (U^i - U_n)^2)
  kRootNInMultiplier,   // (k / sqrt(n)) (U_k - theta) / sqrt((n-1) sum (U^i - U_n)^2)
};

inline double pseudo_normalizer(std::span<const double> projections) {
  std::vector<double> sq(projections.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = projections[i] * projections[i];
  return std::sqrt(pairwise_sum(sq));
}

/// True when every leave-one-out value coincides (up to rounding in their evaluation).
inline bool jackknife_is_degenerate(const JackknifeSummary& s) {
  const auto [lo, hi] = std::minmax_element(s.leave_one_out.begin(), s.leave_one_out.end());
  const double scale = std::max(std::abs(*lo), std::abs(*hi));
  return (*hi - *lo) <= 1e-13 * scale || !(s.sum_sq > 0.0);
}

inline double jackknife_scale(const JackknifeSummary& s) {
  if (jackknife_is_degenerate(s)) {
    throw degenerate_normalizer("all leave-one-out values coincide; the studentizing normalizer is zero");
  }
  return std::sqrt(static_cast<double>(s.n) * s.sum_sq);
}

/// (k/m) (U_k - theta) / V_n with V_n^2 = sum_i h1(X_i)^2.
inline StepProcess pseudo_selfnormalized_path(const Kernel& kernel, std::span<const double> data, double theta,
                                              std::span<const double> projections) {
  if (projections.size() != data.size()) {
    throw invalid_argument("need one projection value per observation");
  }
  const double v_n = pseudo_normalizer(projections);
  if (!(v_n > 0.0)) throw degenerate_normalizer("V_n = 0: every projection value is zero");
  const auto prefix = prefix_values(kernel, data);
  const int n = prefix.n;
  const int m = prefix.m;
  StepProcess p{n, m, std::vector<double>(static_cast<std::size_t>(n) + 1, 0.0)};
  for (int k = m; k <= n; ++k) {
    p.values[static_cast<std::size_t>(k)] = (static_cast<double>(k) / m) * (prefix.at(k) - theta) / v_n;
  }
  return p;
}

/// k (U_k - theta) / jack_scale with the normalizer frozen at the full sample.
inline StepProcess studentized_path(const Kernel& kernel, std::span<const double> data, double theta,
                                    StudentizedNormalization norm = StudentizedNormalization::kRootNInDenominator) {
  const auto summary = jackknife(kernel, data);
  const double scale = jackknife_scale(summary);
  const auto prefix = prefix_values(kernel, data);
  const int n = prefix.n;
  const int m = prefix.m;
  StepProcess p{n, m, std::vector<double>(static_cast<std::size_t>(n) + 1, 0.0)};
  const double root_n = std::sqrt(static_cast<double>(n));
  const double plain = std::sqrt(summary.sum_sq);
  for (int k = m; k <= n; ++k) {
    const double centred = prefix.at(k) - theta;
    p.values[static_cast<std::size_t>(k)] = norm == StudentizedNormalization::kRootNInDenominator
                                                ? static_cast<double>(k) * centred / scale
                                                : (static_cast<double>(k) / root_n) * centred / plain;
  }
  return p;
}

inline Normalizers normalizers(const Kernel& kernel, std::span<const double> data,
                               std::span<const double> projections) {
  const auto s = jackknife(kernel, data);
  return {pseudo_normalizer(projections), std::sqrt(static_cast<double>(s.n) * std::max(0.0, s.sum_sq))};
}

/// Signed supremum over the grid; t = 0 is on the grid, so the result is >= 0.
inline double sup_functional(const StepProcess& path) {
  if (path.values.empty()) throw invalid_argument("empty path");
  return *std::max_element(path.values.begin(), path.values.end());
}

inline double abs_sup_functional(const StepProcess& path) {
  if (path.values.empty()) throw invalid_argument("empty path");
  double best = 0.0;
  for (double v : path.values) best = std::max(best, std::abs(v));
  return best;
}

}  // namespace ustat
