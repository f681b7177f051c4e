#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ustat/combinatorics.hpp"
#include "ustat/errors.hpp"
#include "ustat/kernel.hpp"
#include "ustat/pairwise_sum.hpp"
#include "ustat/ustat_engine.hpp"

namespace ustat {

struct JackknifeSummary {
  int n = 0;
  int m = 0;
  double u_n = 0.0;
  std::vector<double> leave_one_out;  // U^i_{n-1}
  /// q_i = C(n-1,m-1)^{-1} * sum of h over the m-subsets containing i.
  std::vector<double> q;
  /// (n-1) sum_i (U^i - U_n)^2, evaluated as m^2 (n-1)/(n-m)^2 sum_i (q_i - U_n)^2.
  double sum_sq = 0.0;
  /// The same quantity in expanded form m^2 (n-1)/(n-m)^2 [sum q_i^2 - n U_n^2].
  double sum_sq_expanded = 0.0;
  /// sum_sq / m^2.
  double variance_estimator = 0.0;
};

namespace detail {

inline void require_jackknife_sample(std::size_t n, int m) {
  if (static_cast<std::int64_t>(n) <= m) {
    throw insufficient_data("jackknife needs n >= m + 1 (m = " + std::to_string(m) + ", n = " +
                            std::to_string(n) + ")");
  }
}

inline void finish_summary(JackknifeSummary& s) {
  const auto n = static_cast<double>(s.n);
  const auto m = static_cast<double>(s.m);
  const double factor = m * m * (n - 1.0) / ((n - m) * (n - m));
  std::vector<double> centred(s.q.size());
  std::vector<double> squares(s.q.size());
  for (std::size_t i = 0; i < s.q.size(); ++i) {
    centred[i] = (s.q[i] - s.u_n) * (s.q[i] - s.u_n);
    squares[i] = s.q[i] * s.q[i];
  }
  s.sum_sq = factor * pairwise_sum(centred);
  s.sum_sq_expanded = factor * (pairwise_sum(squares) - n * s.u_n * s.u_n);
  s.variance_estimator = s.sum_sq / (m * m);
}

}  // namespace detail

/// U^i_{n-1} by direct enumeration of each leave-one-out sample. O(n C(n-1,m)).
inline std::vector<double> leave_one_out(const Kernel& kernel, std::span<const double> data) {
  const int m = kernel.order();
  detail::require_jackknife_sample(data.size(), m);
  const int n = static_cast<int>(data.size());
  check_enumeration_budget(n * binomial(n - 1, m), "leave_one_out");
  std::vector<double> out(static_cast<std::size_t>(n));
  std::vector<double> rest(static_cast<std::size_t>(n - 1));
  for (int i = 0; i < n; ++i) {
    std::size_t w = 0;
    for (int j = 0; j < n; ++j) {
      if (j != i) rest[w++] = data[static_cast<std::size_t>(j)];
    }
    out[static_cast<std::size_t>(i)] = u_statistic(kernel, rest);
  }
  return out;
}

/// (n-1) sum_i (U^i - U_n)^2 straight from the definition.
inline double naive_jackknife_sum_sq(const Kernel& kernel, std::span<const double> data) {
  const auto loo = leave_one_out(kernel, data);
  const double u = u_statistic(kernel, data);
  std::vector<double> d(loo.size());
  for (std::size_t i = 0; i < loo.size(); ++i) d[i] = (loo[i] - u) * (loo[i] - u);
  return static_cast<double>(data.size() - 1) * pairwise_sum(d);
}

/// One pass over the C(n,m) combinations: each h is added to the running
/// total and to the q-accumulators of its m members.
inline JackknifeSummary jackknife_closed_form(const Kernel& kernel, std::span<const double> data) {
  const int m = kernel.order();
  detail::require_jackknife_sample(data.size(), m);
  const int n = static_cast<int>(data.size());
  const double combos = binomial(n, m);
  check_enumeration_budget(combos, "jackknife_closed_form");

  std::vector<PairwiseSum> member(static_cast<std::size_t>(n));
  PairwiseSum total;
  std::vector<double> pts(static_cast<std::size_t>(m));
  for_each_combination(n, m, [&](std::span<const int> idx) {
    for (int i = 0; i < m; ++i) pts[static_cast<std::size_t>(i)] = data[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    const double v = kernel(pts);
    total.add(v);
    for (int i : idx) member[static_cast<std::size_t>(i)].add(v);
  });

  JackknifeSummary s;
  s.n = n;
  s.m = m;
  const double t = total.total();
  s.u_n = t / combos;
  const double with_i = binomial(n - 1, m - 1);
  const double without_i = binomial(n - 1, m);
  s.q.resize(static_cast<std::size_t>(n));
  s.leave_one_out.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < s.q.size(); ++i) {
    const double a = member[i].total();
    s.q[i] = a / with_i;
    s.leave_one_out[i] = (t - a) / without_i;
  }
  detail::finish_summary(s);
  return s;
}

/// Jackknife summary for prod(x_i) - shift via prefix/suffix elementary
/// symmetric polynomials; O(n m^2) time and O(n m) memory.
inline JackknifeSummary jackknife_fast_product(std::span<const double> data, int m, double shift = 0.0) {
  detail::require_jackknife_sample(data.size(), m);
  const int n = static_cast<int>(data.size());
  const auto width = static_cast<std::size_t>(m) + 1;
  // prefix[i] = e_.(x_0..x_{i-1}), suffix[i] = e_.(x_i..x_{n-1})
  std::vector<double> prefix((static_cast<std::size_t>(n) + 1) * width, 0.0);
  std::vector<double> suffix((static_cast<std::size_t>(n) + 1) * width, 0.0);
  auto pre = [&](int i) { return prefix.data() + static_cast<std::size_t>(i) * width; };
  auto suf = [&](int i) { return suffix.data() + static_cast<std::size_t>(i) * width; };
  pre(0)[0] = 1.0;
  for (int i = 0; i < n; ++i) {
    const double x = data[static_cast<std::size_t>(i)];
    const double* p = pre(i);
    double* q = pre(i + 1);
    q[0] = 1.0;
    for (std::size_t j = 1; j < width; ++j) q[j] = p[j] + x * p[j - 1];
  }
  suf(n)[0] = 1.0;
  for (int i = n - 1; i >= 0; --i) {
    const double x = data[static_cast<std::size_t>(i)];
    const double* p = suf(i + 1);
    double* q = suf(i);
    q[0] = 1.0;
    for (std::size_t j = 1; j < width; ++j) q[j] = p[j] + x * p[j - 1];
  }

  JackknifeSummary s;
  s.n = n;
  s.m = m;
  s.u_n = pre(n)[m] / binomial(n, m) - shift;
  const double with_i = binomial(n - 1, m - 1);
  const double without_i = binomial(n - 1, m);
  s.q.resize(static_cast<std::size_t>(n));
  s.leave_one_out.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    // e_k of the sample without observation i.
    auto drop = [&](int k) {
      double acc = 0.0;
      for (int j = 0; j <= k; ++j) acc += pre(i)[j] * suf(i + 1)[k - j];
      return acc;
    };
    const auto ii = static_cast<std::size_t>(i);
    s.q[ii] = data[ii] * drop(m - 1) / with_i - shift;
    s.leave_one_out[ii] = drop(m) / without_i - shift;
  }
  detail::finish_summary(s);
  return s;
}

/// Jackknife summary through the fastest exact route available for the kernel.
inline JackknifeSummary jackknife(const Kernel& kernel, std::span<const double> data) {
  if (const auto& pf = kernel.product_form()) return jackknife_fast_product(data, pf->order, pf->shift);
  return jackknife_closed_form(kernel, data);
}

/// (n-1)/m^2 sum_i (U^i - U_n)^2, consistent for E h1^2 when E h^2 is finite.
inline double arvesen_estimator(const JackknifeSummary& s) { return s.variance_estimator; }

}  // namespace ustat
