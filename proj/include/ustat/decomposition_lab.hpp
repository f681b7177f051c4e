#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ustat/combinatorics.hpp"
#include "ustat/distribution.hpp"
#include "ustat/errors.hpp"
#include "ustat/kernel.hpp"
#include "ustat/pairwise_sum.hpp"
#include "ustat/rng.hpp"
#include "ustat/ustat_engine.hpp"

namespace ustat {

// ---------------------------------------------------------------------------
// Product statistics h* (one shared argument) and h** (two shared arguments)

/// h(x_1..x_m) * h(x_1..x_s, x_{m+1}..x_{2m-s}) for s shared leading arguments.
class ProductStatistic {
 public:
  ProductStatistic(Kernel base, int shared) : base_(std::move(base)), shared_(shared) {
    if (shared_ < 1 || shared_ > base_.order()) {
      throw invalid_argument("product statistic needs 1 <= shared <= m");
    }
  }

  static ProductStatistic h_star(Kernel base) { return {std::move(base), 1}; }
  static ProductStatistic h_double_star(Kernel base) { return {std::move(base), 2}; }

  [[nodiscard]] const Kernel& base() const { return base_; }
  [[nodiscard]] int m() const { return base_.order(); }
  [[nodiscard]] int shared() const { return shared_; }
  [[nodiscard]] int arity() const { return 2 * m() - shared_; }

  /// 0-based positions feeding the first factor: 0..m-1.
  [[nodiscard]] bool in_first(int pos) const { return pos < m(); }
  /// 0-based positions feeding the second factor: 0..s-1 and m..2m-s-1.
  [[nodiscard]] bool in_second(int pos) const { return pos < shared_ || pos >= m(); }

  double operator()(std::span<const double> x) const {
    const auto m_ = static_cast<std::size_t>(m());
    const auto s = static_cast<std::size_t>(shared_);
    scratch_.resize(m_);
    const double first = base_(x.first(m_));
    for (std::size_t i = 0; i < s; ++i) scratch_[i] = x[i];
    for (std::size_t i = s; i < m_; ++i) scratch_[i] = x[m_ + (i - s)];
    return first * base_(scratch_);
  }

 private:
  Kernel base_;
  int shared_;
  mutable std::vector<double> scratch_;
};

inline double eval_product_statistic(const ProductStatistic& ps, std::span<const double> points) {
  if (static_cast<int>(points.size()) != ps.arity()) {
    throw invalid_argument("product statistic has arity " + std::to_string(ps.arity()) + ", got " +
                           std::to_string(points.size()) + " points");
  }
  return ps(points);
}

// ---------------------------------------------------------------------------
// Exact Hoeffding-type expansion over a finite support

/// One alternating-sum term V_K of the expansion, tabulated on support^|K|.
struct VTerm {
  std::vector<int> conditioning_set;  // 0-based tuple positions k_1 < ... < k_c
  int s = 0;                          // |K intersect first-factor positions|
  int t = 0;                          // |K intersect second-factor positions|
  std::vector<double> support;
  std::vector<double> probabilities;
  std::vector<double> table;  // odometer order over the conditioned coordinates

  [[nodiscard]] int size() const { return static_cast<int>(conditioning_set.size()); }
  [[nodiscard]] bool contains_first_position() const {
    return !conditioning_set.empty() && conditioning_set.front() == 0;
  }

  /// Value from support indices of the conditioned coordinates.
  [[nodiscard]] double at_indices(std::span<const int> idx) const {
    std::size_t flat = 0;
    for (int i : idx) flat = flat * support.size() + static_cast<std::size_t>(i);
    return table[flat];
  }

  /// Value at a full argument tuple (only the conditioned positions are read);
  /// every read coordinate must be a support point.
  [[nodiscard]] double operator()(std::span<const double> tuple) const {
    std::size_t flat = 0;
    for (int pos : conditioning_set) {
      const double x = tuple[static_cast<std::size_t>(pos)];
      const auto it = std::find(support.begin(), support.end(), x);
      if (it == support.end()) throw invalid_argument("VTerm evaluated off the support");
      flat = flat * support.size() + static_cast<std::size_t>(it - support.begin());
    }
    return table[flat];
  }

  [[nodiscard]] std::string id() const {
    std::string out = "V(";
    for (std::size_t i = 0; i < conditioning_set.size(); ++i) {
      out += (i ? "," : "") + std::to_string(conditioning_set[i] + 1);
    }
    return out + ")";
  }
};

struct VExpansion {
  int arity = 0;
  int m = 0;
  int shared = 0;
  double mean = 0.0;  // E h*
  std::vector<VTerm> terms;
};

inline constexpr std::size_t kLabMaxSupport = 6;

namespace detail {

inline std::vector<long double> marginal_weights(const std::vector<double>& probs, int len) {
  const std::size_t s = probs.size();
  std::size_t total = 1;
  for (int i = 0; i < len; ++i) total *= s;
  std::vector<long double> w(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    long double p = 1.0L;
    std::size_t rest = flat;
    for (int i = 0; i < len; ++i) {
      p *= probs[rest % s];
      rest /= s;
    }
    w[flat] = p;
  }
  return w;
}

/// Digit of position `pos` (0 = most significant) in an odometer index of `len` digits.
inline std::size_t digit(std::size_t flat, int pos, int len, std::size_t base) {
  for (int i = len - 1; i > pos; --i) flat /= base;
  return flat % base;
}

/// Projects a full-grid index onto the positions set in `mask` (kept in ascending order).
inline std::size_t restrict_index(std::size_t flat, unsigned mask, int len, std::size_t base) {
  std::size_t out = 0;
  std::vector<std::size_t> digits(static_cast<std::size_t>(len));
  for (int i = len - 1; i >= 0; --i) {
    digits[static_cast<std::size_t>(i)] = flat % base;
    flat /= base;
  }
  for (int i = 0; i < len; ++i) {
    if (mask & (1U << i)) out = out * base + digits[static_cast<std::size_t>(i)];
  }
  return out;
}

inline std::vector<int> mask_positions(unsigned mask, int len) {
  std::vector<int> out;
  for (int i = 0; i < len; ++i) {
    if (mask & (1U << i)) out.push_back(i);
  }
  return out;
}

/// Conditional means E(f | X_J) - E f for every subset J, tabulated on support^|J|,
/// where f is tabulated on the full grid support^len.
inline std::vector<std::vector<long double>> centred_conditional_means(const std::vector<long double>& f,
                                                                       const std::vector<double>& probs, int len) {
  const std::size_t base = probs.size();
  const unsigned subsets = 1U << len;
  const auto weight = marginal_weights(probs, len);
  std::vector<std::vector<long double>> g(subsets);
  long double mean = 0.0L;
  for (std::size_t flat = 0; flat < f.size(); ++flat) mean += weight[flat] * f[flat];
  for (unsigned mask = 0; mask < subsets; ++mask) {
    const int c = std::popcount(mask);
    std::size_t cells = 1;
    for (int i = 0; i < c; ++i) cells *= base;
    std::vector<long double> num(cells, 0.0L);
    std::vector<long double> den(cells, 0.0L);
    for (std::size_t flat = 0; flat < f.size(); ++flat) {
      const std::size_t cell = restrict_index(flat, mask, len, base);
      num[cell] += weight[flat] * f[flat];
      den[cell] += weight[flat];
    }
    for (std::size_t cell = 0; cell < cells; ++cell) num[cell] = den[cell] > 0 ? num[cell] / den[cell] - mean : 0.0L;
    g[mask] = std::move(num);
  }
  return g;
}

}  // namespace detail

/// Builds every V_K, K a nonempty subset of the tuple positions, from exact
/// nested conditional expectations:
///   V_K = sum_{J subset of K} (-1)^{|K|-|J|} [E(h* | X_J) - E h*],
/// so that h* = sum_K V_K + E h* pointwise.
inline VExpansion build_v_expansion(const ProductStatistic& ps, const Distribution& dist) {
  const auto& f = dist.finite_support();
  if (f.support.size() > kLabMaxSupport) throw resource_limit("decomposition lab supports at most 6 support points");
  if (ps.m() > 3) throw resource_limit("decomposition lab supports kernel order m <= 3");
  const int len = ps.arity();
  const std::size_t base = f.support.size();

  std::size_t grid = 1;
  for (int i = 0; i < len; ++i) grid *= base;
  std::vector<long double> values(grid);
  std::vector<double> pts(static_cast<std::size_t>(len));
  std::size_t flat = 0;
  for_each_grid_point(static_cast<int>(base), len, [&](std::span<const int> idx) {
    for (int i = 0; i < len; ++i) pts[static_cast<std::size_t>(i)] = f.support[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    values[flat++] = ps(pts);
  });

  const auto g = detail::centred_conditional_means(values, f.probabilities, len);
  const auto weight = detail::marginal_weights(f.probabilities, len);
  long double mean = 0.0L;
  for (std::size_t i = 0; i < grid; ++i) mean += weight[i] * values[i];

  VExpansion out;
  out.arity = len;
  out.m = ps.m();
  out.shared = ps.shared();
  out.mean = static_cast<double>(mean);
  const unsigned subsets = 1U << len;
  for (unsigned k_mask = 1; k_mask < subsets; ++k_mask) {
    const int c = std::popcount(k_mask);
    VTerm term;
    term.conditioning_set = detail::mask_positions(k_mask, len);
    for (int pos : term.conditioning_set) {
      term.s += ps.in_first(pos) ? 1 : 0;
      term.t += ps.in_second(pos) ? 1 : 0;
    }
    term.support = f.support;
    term.probabilities = f.probabilities;
    std::size_t cells = 1;
    for (int i = 0; i < c; ++i) cells *= base;
    std::vector<long double> table(cells, 0.0L);
    // Sub-subsets J of K expressed as masks relative to K's own c coordinates.
    for (unsigned rel = 0; rel < (1U << c); ++rel) {
      unsigned j_mask = 0;
      for (int i = 0; i < c; ++i) {
        if (rel & (1U << i)) j_mask |= 1U << term.conditioning_set[static_cast<std::size_t>(i)];
      }
      const long double sign = ((c - std::popcount(rel)) % 2 == 0) ? 1.0L : -1.0L;
      const auto& gj = g[j_mask];
      for (std::size_t cell = 0; cell < cells; ++cell) {
        table[cell] += sign * gj[detail::restrict_index(cell, rel, c, base)];
      }
    }
    term.table.assign(table.begin(), table.end());
    out.terms.push_back(std::move(term));
  }
  return out;
}

/// max over support tuples of |h*(tuple) - (sum_K V_K(tuple) + E h*)|.
inline double reconstruction_error(const ProductStatistic& ps, const VExpansion& ex) {
  const auto& terms = ex.terms;
  const auto& support = terms.empty() ? std::vector<double>{} : terms.front().support;
  if (support.empty()) return 0.0;
  double worst = 0.0;
  std::vector<double> pts(static_cast<std::size_t>(ex.arity));
  std::vector<int> sub;
  for_each_grid_point(static_cast<int>(support.size()), ex.arity, [&](std::span<const int> idx) {
    for (int i = 0; i < ex.arity; ++i) pts[static_cast<std::size_t>(i)] = support[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    long double acc = ex.mean;
    for (const auto& t : terms) {
      sub.clear();
      for (int pos : t.conditioning_set) sub.push_back(idx[static_cast<std::size_t>(pos)]);
      acc += t.at_indices(sub);
    }
    worst = std::max(worst, static_cast<double>(std::abs(static_cast<long double>(ps(pts)) - acc)));
  });
  return worst;
}

/// Largest |E(V | X_J)| over proper subsets J of the term's coordinates
/// (J empty included, i.e. the mean) and over positive-probability assignments.
inline double degeneracy_defect(const VTerm& term) {
  const int c = term.size();
  const std::size_t base = term.support.size();
  const auto weight = detail::marginal_weights(term.probabilities, c);
  double worst = 0.0;
  for (unsigned mask = 0; mask + 1 < (1U << c); ++mask) {
    const int kept = std::popcount(mask);
    std::size_t cells = 1;
    for (int i = 0; i < kept; ++i) cells *= base;
    std::vector<long double> num(cells, 0.0L);
    std::vector<long double> den(cells, 0.0L);
    for (std::size_t flat = 0; flat < term.table.size(); ++flat) {
      const std::size_t cell = detail::restrict_index(flat, mask, c, base);
      num[cell] += weight[flat] * term.table[flat];
      den[cell] += weight[flat];
    }
    for (std::size_t cell = 0; cell < cells; ++cell) {
      if (den[cell] > 0) worst = std::max(worst, static_cast<double>(std::abs(num[cell] / den[cell])));
    }
  }
  return worst;
}

inline constexpr double kDegeneracyTolerance = 1e-12;

inline bool check_degeneracy(const VTerm& term) { return degeneracy_defect(term) <= kDegeneracyTolerance; }

/// Same check under the probabilities of `dist`, which must share the term's support.
inline bool check_degeneracy(const VTerm& term, const Distribution& dist) {
  const auto& f = dist.finite_support();
  if (f.support != term.support) throw invalid_argument("distribution support differs from the term's support");
  VTerm copy = term;
  copy.probabilities = f.probabilities;
  return check_degeneracy(copy);
}

/// Degeneracy of an arbitrary L of r arguments with mean mu: E(L - mu | X_J) = 0
/// for every nonempty proper subset J of the positions.
inline double degeneracy_defect(const std::function<double(std::span<const double>)>& fn, int r, double mu,
                                const Distribution& dist) {
  const auto& f = dist.finite_support();
  const std::size_t base = f.support.size();
  std::size_t grid = 1;
  for (int i = 0; i < r; ++i) grid *= base;
  std::vector<long double> values(grid);
  std::vector<double> pts(static_cast<std::size_t>(r));
  std::size_t flat = 0;
  for_each_grid_point(static_cast<int>(base), r, [&](std::span<const int> idx) {
    for (int i = 0; i < r; ++i) pts[static_cast<std::size_t>(i)] = f.support[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    values[flat++] = fn(pts) - mu;
  });
  const auto weight = detail::marginal_weights(f.probabilities, r);
  double worst = 0.0;
  for (unsigned mask = 1; mask + 1 < (1U << r); ++mask) {
    const int kept = std::popcount(mask);
    std::size_t cells = 1;
    for (int i = 0; i < kept; ++i) cells *= base;
    std::vector<long double> num(cells, 0.0L);
    std::vector<long double> den(cells, 0.0L);
    for (std::size_t i = 0; i < grid; ++i) {
      const std::size_t cell = detail::restrict_index(i, mask, r, base);
      num[cell] += weight[i] * values[i];
      den[cell] += weight[i];
    }
    for (std::size_t cell = 0; cell < cells; ++cell) {
      if (den[cell] > 0) worst = std::max(worst, static_cast<double>(std::abs(num[cell] / den[cell])));
    }
  }
  // r = 1 has no nonempty proper subset; fall back to the mean condition.
  if (r == 1) {
    long double mean = 0.0L;
    for (std::size_t i = 0; i < grid; ++i) mean += weight[i] * values[i];
    worst = static_cast<double>(std::abs(mean));
  }
  return worst;
}

inline bool check_degeneracy(const std::function<double(std::span<const double>)>& fn, int r, double mu,
                             const Distribution& dist) {
  return degeneracy_defect(fn, r, mu, dist) <= kDegeneracyTolerance;
}

// ---------------------------------------------------------------------------
// Variance bound for degenerate statistics

struct VarianceBoundResult {
  int r = 0;
  int n = 0;
  double lhs = 0.0;  // E([n]^{-r} sum_{distinct ordered} (L - mu))^2
  double rhs = 0.0;  // [n]^{-r} E(L - mu)^2
  double ratio = 0.0;
  /// Constant in front of rhs as the bound is usually displayed.
  double stated_constant = 1.0;
  /// Constant that holds in general: r!; attained for symmetric L.
  double corrected_constant = 1.0;
  bool within_stated = false;
  bool within_corrected = false;
};

/// Exact left and right sides of the degenerate-statistic variance bound by
/// enumerating all support^n outcomes. Limits: r <= 3, n <= 8, support <= 4.
inline VarianceBoundResult variance_bound(const std::function<double(std::span<const double>)>& fn, int r, double mu,
                                 const Distribution& dist, int n) {
  const auto& f = dist.finite_support();
  if (r < 1 || r > 3) throw resource_limit("variance_bound supports r <= 3");
  if (n > 8) throw resource_limit("variance_bound supports n <= 8");
  if (f.support.size() > 4) throw resource_limit("variance_bound supports at most 4 support points");
  if (n < r) throw insufficient_data("variance_bound needs n >= r");
  if (!check_degeneracy(fn, r, mu, dist)) {
    throw precondition_violation("variance_bound: L is not degenerate with mean mu under " + dist.name());
  }
  const std::size_t base = f.support.size();

  // L - mu on support^r.
  std::size_t cells = 1;
  for (int i = 0; i < r; ++i) cells *= base;
  std::vector<double> table(cells);
  std::vector<double> pts(static_cast<std::size_t>(r));
  std::size_t flat = 0;
  for_each_grid_point(static_cast<int>(base), r, [&](std::span<const int> idx) {
    for (int i = 0; i < r; ++i) pts[static_cast<std::size_t>(i)] = f.support[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    table[flat++] = fn(pts) - mu;
  });
  const auto weight_r = detail::marginal_weights(f.probabilities, r);
  long double second = 0.0L;
  for (std::size_t i = 0; i < cells; ++i) second += weight_r[i] * table[i] * table[i];

  const double scale = inverse_falling_factorial(n, r);
  std::vector<std::vector<int>> tuples;
  for_each_distinct_tuple(n, r, [&](std::span<const int> idx) { tuples.emplace_back(idx.begin(), idx.end()); });

  long double lhs = 0.0L;
  for_each_grid_point(static_cast<int>(base), n, [&](std::span<const int> outcome) {
    long double w = 1.0L;
    for (int v : outcome) w *= f.probabilities[static_cast<std::size_t>(v)];
    if (w == 0.0L) return;
    long double sum = 0.0L;
    for (const auto& tup : tuples) {
      std::size_t cell = 0;
      for (int pos : tup) cell = cell * base + static_cast<std::size_t>(outcome[static_cast<std::size_t>(pos)]);
      sum += table[cell];
    }
    const long double scaled = sum * scale;
    lhs += w * scaled * scaled;
  });

  VarianceBoundResult res;
  res.r = r;
  res.n = n;
  res.lhs = static_cast<double>(lhs);
  res.rhs = static_cast<double>(second * scale);
  res.ratio = res.rhs > 0.0 ? res.lhs / res.rhs : 0.0;
  res.corrected_constant = factorial(r);
  const double slack = 1e-12 * std::max(1.0, res.rhs);
  res.within_stated = res.lhs <= res.stated_constant * res.rhs + slack;
  res.within_corrected = res.lhs <= res.corrected_constant * res.rhs + slack;
  return res;
}

/// A random asymmetric degenerate kernel of two arguments over `dist`'s
/// support: a doubly centred random table plus mu.
inline std::function<double(std::span<const double>)> random_degenerate_kernel2(const Distribution& dist, double mu,
                                                                                 std::uint64_t seed) {
  const auto& f = dist.finite_support();
  const std::size_t s = f.support.size();
  Xoshiro256ss gen(seed);
  std::vector<double> raw(s * s);
  for (auto& v : raw) v = 4.0 * gen.uniform01() - 2.0;
  std::vector<double> row(s, 0.0), col(s, 0.0);
  double grand = 0.0;
  for (std::size_t a = 0; a < s; ++a) {
    for (std::size_t b = 0; b < s; ++b) {
      row[a] += f.probabilities[b] * raw[a * s + b];
      col[b] += f.probabilities[a] * raw[a * s + b];
      grand += f.probabilities[a] * f.probabilities[b] * raw[a * s + b];
    }
  }
  std::vector<double> table(s * s);
  for (std::size_t a = 0; a < s; ++a) {
    for (std::size_t b = 0; b < s; ++b) table[a * s + b] = raw[a * s + b] - row[a] - col[b] + grand + mu;
  }
  auto support = f.support;
  return [table, support](std::span<const double> x) {
    const auto ia = static_cast<std::size_t>(std::find(support.begin(), support.end(), x[0]) - support.begin());
    const auto ib = static_cast<std::size_t>(std::find(support.begin(), support.end(), x[1]) - support.begin());
    return table[ia * support.size() + ib];
  };
}

// ---------------------------------------------------------------------------
// Monte Carlo negligibility trends

enum class NegligibilityStatistic {
  kUnSquared,      // U_n^2 (pass a kernel centred at theta)
  kDiagSquare,     // [n]^{-2m+1} sum over distinct ordered m-tuples of h^2
  kSharedTwoM3,    // [n]^{-5} sum_{distinct i1..i4} h(i1,i2,i3) h(i1,i2,i4), m = 3
};

inline std::string to_string(NegligibilityStatistic s) {
  switch (s) {
    case NegligibilityStatistic::kUnSquared: return "P1_Un_sq";
    case NegligibilityStatistic::kDiagSquare: return "P3_diag_square";
    case NegligibilityStatistic::kSharedTwoM3: return "P4_shared_j";
  }
  return "?";
}

inline NegligibilityStatistic parse_negligibility_statistic(const std::string& s) {
  if (s == "P1_Un_sq") return NegligibilityStatistic::kUnSquared;
  if (s == "P3_diag_square") return NegligibilityStatistic::kDiagSquare;
  if (s == "P4_shared_j") return NegligibilityStatistic::kSharedTwoM3;
  throw invalid_argument("unknown negligibility statistic '" + s + "' (P1_Un_sq, P3_diag_square, P4_shared_j)");
}

/// One realisation of the statistic on `data`.
inline double negligibility_statistic(NegligibilityStatistic id, const Kernel& kernel, std::span<const double> data) {
  const int n = static_cast<int>(data.size());
  const int m = kernel.order();
  switch (id) {
    case NegligibilityStatistic::kUnSquared: {
      const double u = u_value(kernel, data);
      return u * u;
    }
    case NegligibilityStatistic::kDiagSquare: {
      // Symmetric h: the ordered sum is [n]_m times the mean of h^2.
      const auto sq = [&](std::span<const double> x) {
        const double v = kernel(x);
        return v * v;
      };
      return u_statistic(sq, m, data) * (falling_factorial(n, m) / falling_factorial(n, 2 * m - 1));
    }
    case NegligibilityStatistic::kSharedTwoM3: {
      if (m != 3) throw invalid_argument("P4_shared_j is defined for m = 3");
      if (n < 5) throw insufficient_data("P4_shared_j needs n >= 5");
      check_enumeration_budget(std::pow(static_cast<double>(n), 3), "P4_shared_j");
      // sum_{a != b} [ (sum_{c} h(a,b,c))^2 - sum_{c} h(a,b,c)^2 ], c ranging over {a,b}^c.
      PairwiseSum total;
      std::array<double, 3> pts{};
      for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
          if (a == b) continue;
          pts[0] = data[static_cast<std::size_t>(a)];
          pts[1] = data[static_cast<std::size_t>(b)];
          PairwiseSum lin;
          PairwiseSum sq;
          for (int c = 0; c < n; ++c) {
            if (c == a || c == b) continue;
            pts[2] = data[static_cast<std::size_t>(c)];
            const double v = kernel(pts);
            lin.add(v);
            sq.add(v * v);
          }
          const double l = lin.total();
          total.add(l * l - sq.total());
        }
      }
      return total.total() * inverse_falling_factorial(n, 2 * m - 1);
    }
  }
  return 0.0;
}

struct TrendRow {
  int n = 0;
  double mean_abs = 0.0;
  double std_error = 0.0;
};

struct TrendTable {
  std::string statistic;
  std::vector<TrendRow> rows;
  /// Last grid point below half of the first.
  bool decreasing = false;
};

/// Monte Carlo mean of |statistic| at each n over R seeded replications.
inline TrendTable negligibility_trend(NegligibilityStatistic id, const Kernel& kernel, const Distribution& dist,
                                      std::span<const int> n_grid, int replications, std::uint64_t seed) {
  if (n_grid.empty()) throw invalid_argument("empty n grid");
  if (!std::is_sorted(n_grid.begin(), n_grid.end())) throw invalid_argument("n grid must be ascending");
  if (replications < 2) throw invalid_argument("need at least two replications");
  const int m = kernel.order();
  if (m > 3) throw resource_limit("negligibility trends support m <= 3");
  const int cap = m == 3 ? 60 : 400;
  if (n_grid.back() > cap) throw resource_limit("n grid exceeds the lab limit of " + std::to_string(cap));
  TrendTable out;
  out.statistic = to_string(id);
  for (int n : n_grid) {
    PairwiseSum s1;
    PairwiseSum s2;
    for (int r = 0; r < replications; ++r) {
      const auto data = sample(dist, static_cast<std::size_t>(n), replication_seed(seed, static_cast<std::uint64_t>(r)));
      const double v = std::abs(negligibility_statistic(id, kernel, data));
      s1.add(v);
      s2.add(v * v);
    }
    const auto rd = static_cast<double>(replications);
    const double mean = s1.total() / rd;
    const double var = std::max(0.0, (s2.total() - rd * mean * mean) / (rd - 1.0));
    out.rows.push_back({n, mean, std::sqrt(var / rd)});
  }
  out.decreasing = out.rows.back().mean_abs * 2.0 <= out.rows.front().mean_abs && out.rows.size() > 1;
  return out;
}

/// Monte Carlo probability that some m-subset of the sample has |h| > n^{3m/5},
/// i.e. that truncation at the top level changes any evaluated term.
inline std::vector<std::pair<int, double>> truncation_coupling(const Kernel& kernel, const Distribution& dist,
                                                               std::span<const int> n_grid, int replications,
                                                               std::uint64_t seed) {
  std::vector<std::pair<int, double>> out;
  const int m = kernel.order();
  for (int n : n_grid) {
    const double c = TruncationRule::full_m(n).threshold(m);
    int hits = 0;
    for (int r = 0; r < replications; ++r) {
      auto data = sample(dist, static_cast<std::size_t>(n), replication_seed(seed, static_cast<std::uint64_t>(r)));
      double worst = 0.0;
      const auto& pf = kernel.product_form();
      if (pf && pf->shift == 0.0) {
        // max |prod| over m-subsets is the product of the m largest |x|.
        for (auto& x : data) x = std::abs(x);
        std::partial_sort(data.begin(), data.begin() + m, data.end(), std::greater<>());
        worst = 1.0;
        for (int i = 0; i < m; ++i) worst *= data[static_cast<std::size_t>(i)];
      } else {
        check_enumeration_budget(binomial(n, m), "truncation_coupling");
        std::vector<double> pts(static_cast<std::size_t>(m));
        for_each_combination(n, m, [&](std::span<const int> idx) {
          for (int i = 0; i < m; ++i) pts[static_cast<std::size_t>(i)] = data[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
          worst = std::max(worst, std::abs(kernel(pts)));
        });
      }
      if (worst > c) ++hits;
    }
    out.emplace_back(n, static_cast<double>(hits) / replications);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON reports

inline nlohmann::json to_json(const VExpansion& ex, const ProductStatistic& ps) {
  nlohmann::json j;
  j["statistic"] = ps.shared() == 1 ? "h*" : (ps.shared() == 2 ? "h**" : "h_shared" + std::to_string(ps.shared()));
  j["kernel"] = ps.base().name();
  j["m"] = ex.m;
  j["arity"] = ex.arity;
  j["mean"] = ex.mean;
  j["reconstruction_max_error"] = reconstruction_error(ps, ex);
  auto terms = nlohmann::json::array();
  for (const auto& t : ex.terms) {
    std::vector<int> one_based;
    for (int p : t.conditioning_set) one_based.push_back(p + 1);
    const double defect = degeneracy_defect(t);
    terms.push_back({{"term_id", t.id()},
                     {"conditioning_set", one_based},
                     {"shared_counts", {{"s", t.s}, {"t", t.t}}},
                     {"contains_first_position", t.contains_first_position()},
                     {"degeneracy_defect", defect},
                     {"degeneracy_pass", defect <= kDegeneracyTolerance}});
  }
  j["terms"] = std::move(terms);
  return j;
}

inline nlohmann::json to_json(const VarianceBoundResult& r) {
  return {{"r", r.r},
          {"n", r.n},
          {"lhs", r.lhs},
          {"rhs", r.rhs},
          {"ratio", r.ratio},
          {"stated_constant", r.stated_constant},
          {"corrected_constant", r.corrected_constant},
          {"within_stated", r.within_stated},
          {"within_corrected", r.within_corrected}};
}

inline nlohmann::json to_json(const TrendTable& t) {
  auto rows = nlohmann::json::array();
  for (const auto& r : t.rows) rows.push_back({{"n", r.n}, {"mean_abs", r.mean_abs}, {"se", r.std_error}});
  return {{"statistic", t.statistic}, {"rows", rows}, {"decreasing", t.decreasing}};
}

}  // namespace ustat
