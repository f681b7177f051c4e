#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ustat/errors.hpp"

namespace ustat {

/// C(n, k) as a double; exact for every value below 2^53.
inline double binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || n < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::int64_t i = 1; i <= k; ++i) {
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return r;
}

/// n! / (n - r)!, the number of ordered r-tuples of distinct indices.
inline double falling_factorial(std::int64_t n, std::int64_t r) {
  if (r < 0 || r > n) return 0.0;
  double f = 1.0;
  for (std::int64_t i = 0; i < r; ++i) f *= static_cast<double>(n - i);
  return f;
}

/// [n]^{-r} = (n - r)! / n!
inline double inverse_falling_factorial(std::int64_t n, std::int64_t r) {
  return 1.0 / falling_factorial(n, r);
}

inline double factorial(int r) { return falling_factorial(r, r); }

/// Evaluation budget shared by every exact enumeration in the library.
inline constexpr double kMaxEnumeratedTerms = 1.0e8;

inline void check_enumeration_budget(double terms, const char* what) {
  if (terms > kMaxEnumeratedTerms) {
    throw resource_limit(std::string(what) + ": " + std::to_string(terms) +
                         " terms exceeds the enumeration guard of 1e8");
  }
}

/// Calls f(span<const int>) for every k-subset of {0..n-1} in lexicographic order.
template <class F>
void for_each_combination(int n, int k, F&& f) {
  if (k < 0 || k > n) return;
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  if (k == 0) {
    f(std::span<const int>(idx));
    return;
  }
  for (;;) {
    f(std::span<const int>(idx));
    int i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) {
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
}

/// Calls f(span<const int>) for every ordered r-tuple of distinct indices in {0..n-1}.
template <class F>
void for_each_distinct_tuple(int n, int r, F&& f) {
  if (r < 0 || r > n) return;
  std::vector<int> idx(static_cast<std::size_t>(r), 0);
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  // Depth-first over positions.
  auto rec = [&](auto&& self, int pos) -> void {
    if (pos == r) {
      f(std::span<const int>(idx));
      return;
    }
    for (int i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      used[static_cast<std::size_t>(i)] = 1;
      idx[static_cast<std::size_t>(pos)] = i;
      self(self, pos + 1);
      used[static_cast<std::size_t>(i)] = 0;
    }
  };
  rec(rec, 0);
}

/// Calls f(span<const int>) for every tuple in {0..base-1}^len (odometer order, last digit fastest).
template <class F>
void for_each_grid_point(int base, int len, F&& f) {
  std::vector<int> digits(static_cast<std::size_t>(len), 0);
  for (;;) {
    f(std::span<const int>(digits));
    int i = len - 1;
    while (i >= 0 && digits[static_cast<std::size_t>(i)] == base - 1) {
      digits[static_cast<std::size_t>(i)] = 0;
      --i;
    }
    if (i < 0) return;
    ++digits[static_cast<std::size_t>(i)];
  }
}

}  // namespace ustat
