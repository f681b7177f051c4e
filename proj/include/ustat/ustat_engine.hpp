#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ustat/combinatorics.hpp"
#include "ustat/errors.hpp"
#include "ustat/kernel.hpp"
#include "ustat/pairwise_sum.hpp"

namespace ustat {

/// U_k for the first k observations, k = m..n.
struct UPrefixValues {
  int n = 0;
  int m = 0;
  std::vector<double> values;  // values[k - m] = U_k

  [[nodiscard]] double at(int k) const { return values.at(static_cast<std::size_t>(k - m)); }
  [[nodiscard]] double final_value() const { return values.back(); }
};

struct OrderedTupleSum {
  int arity = 0;
  double total = 0.0;
  double count = 0.0;  // n! / (n - arity)!
};

namespace detail {

inline void require_sample(std::size_t n, int m, const char* what) {
  if (static_cast<std::int64_t>(n) < m) {
    throw insufficient_data(std::string(what) + ": need at least " + std::to_string(m) + " observations, got " +
                            std::to_string(n));
  }
}

}  // namespace detail

/// C(n,m)^{-1} sum over i_1 < ... < i_m of h, by full enumeration with
/// pairwise summation. F is any callable taking std::span<const double>.
template <class F>
double u_statistic(F&& h, int m, std::span<const double> data) {
  detail::require_sample(data.size(), m, "u_statistic");
  const int n = static_cast<int>(data.size());
  const double count = binomial(n, m);
  check_enumeration_budget(count, "u_statistic");
  std::vector<double> pts(static_cast<std::size_t>(m));
  PairwiseSum acc;
  for_each_combination(n, m, [&](std::span<const int> idx) {
    for (int i = 0; i < m; ++i) pts[static_cast<std::size_t>(i)] = data[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    acc.add(h(std::span<const double>(pts)));
  });
  return acc.total() / count;
}

inline double u_statistic(const Kernel& kernel, std::span<const double> data) {
  return u_statistic(kernel, kernel.order(), data);
}

/// All prefix values U_m..U_n. Appending observation k adds the C(k-1, m-1)
/// combinations that contain it to a running total; memory is O(n).
template <class F>
UPrefixValues u_prefix_process(F&& h, int m, std::span<const double> data) {
  detail::require_sample(data.size(), m, "u_prefix_process");
  const int n = static_cast<int>(data.size());
  check_enumeration_budget(binomial(n, m), "u_prefix_process");
  UPrefixValues out{n, m, {}};
  out.values.reserve(static_cast<std::size_t>(n - m + 1));
  std::vector<double> pts(static_cast<std::size_t>(m));
  PairwiseSum running;
  for (int k = 1; k <= n; ++k) {
    pts[static_cast<std::size_t>(m - 1)] = data[static_cast<std::size_t>(k - 1)];
    for_each_combination(k - 1, m - 1, [&](std::span<const int> idx) {
      for (int i = 0; i < m - 1; ++i) {
        pts[static_cast<std::size_t>(i)] = data[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
      }
      running.add(h(std::span<const double>(pts)));
    });
    if (k >= m) out.values.push_back(running.total() / binomial(k, m));
  }
  return out;
}

inline UPrefixValues u_prefix_process(const Kernel& kernel, std::span<const double> data) {
  return u_prefix_process(kernel, kernel.order(), data);
}

/// Elementary symmetric polynomials e_0..e_m of the observations pushed so far.
class ElementarySymmetric {
 public:
  explicit ElementarySymmetric(int m) : e_(static_cast<std::size_t>(m) + 1, 0.0) { e_[0] = 1.0; }

  void push(double x) {
    for (std::size_t j = e_.size() - 1; j >= 1; --j) e_[j] += x * e_[j - 1];
  }

  [[nodiscard]] double operator[](int j) const { return e_[static_cast<std::size_t>(j)]; }
  [[nodiscard]] std::span<const double> coefficients() const { return e_; }

 private:
  std::vector<double> e_;
};

/// e_m(data) / C(n, m): the U-statistic of the product kernel in O(n m).
inline double u_statistic_fast_product(std::span<const double> data, int m) {
  detail::require_sample(data.size(), m, "u_statistic_fast_product");
  ElementarySymmetric e(m);
  for (double x : data) e.push(x);
  return e[m] / binomial(static_cast<std::int64_t>(data.size()), m);
}

/// Prefix values of the product kernel prod(x_i) - shift, O(m) per observation.
inline UPrefixValues u_prefix_fast_product(std::span<const double> data, int m, double shift = 0.0) {
  detail::require_sample(data.size(), m, "u_prefix_fast_product");
  const int n = static_cast<int>(data.size());
  UPrefixValues out{n, m, {}};
  out.values.reserve(static_cast<std::size_t>(n - m + 1));
  ElementarySymmetric e(m);
  for (int k = 1; k <= n; ++k) {
    e.push(data[static_cast<std::size_t>(k - 1)]);
    if (k >= m) out.values.push_back(e[m] / binomial(k, m) - shift);
  }
  return out;
}

/// Prefix process through the fastest exact route available for the kernel.
inline UPrefixValues prefix_values(const Kernel& kernel, std::span<const double> data) {
  if (const auto& pf = kernel.product_form()) return u_prefix_fast_product(data, pf->order, pf->shift);
  return u_prefix_process(kernel, data);
}

/// U_n through the fastest exact route available for the kernel.
inline double u_value(const Kernel& kernel, std::span<const double> data) {
  if (const auto& pf = kernel.product_form()) return u_statistic_fast_product(data, pf->order) - pf->shift;
  return u_statistic(kernel, data);
}

/// Sum of f over all ordered r-tuples of distinct indices.
template <class F>
OrderedTupleSum ordered_distinct_sum(F&& f, std::span<const double> data, int r) {
  if (r > 6) throw resource_limit("ordered_distinct_sum supports arity <= 6");
  if (r < 1) throw invalid_argument("ordered_distinct_sum needs arity >= 1");
  detail::require_sample(data.size(), r, "ordered_distinct_sum");
  const int n = static_cast<int>(data.size());
  const double count = falling_factorial(n, r);
  check_enumeration_budget(count, "ordered_distinct_sum");
  std::vector<double> pts(static_cast<std::size_t>(r));
  PairwiseSum acc;
  for_each_distinct_tuple(n, r, [&](std::span<const int> idx) {
    for (int i = 0; i < r; ++i) pts[static_cast<std::size_t>(i)] = data[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    acc.add(f(std::span<const double>(pts)));
  });
  return {r, acc.total(), count};
}

}  // namespace ustat
