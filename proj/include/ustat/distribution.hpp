#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "ustat/errors.hpp"
#include "ustat/pairwise_sum.hpp"
#include "ustat/rng.hpp"

namespace ustat {

/// Density |x - a|^{-3} on |x - a| >= 1. Symmetric about a, so E X = a;
/// P(|X - a| > u) = u^{-2} for u >= 1, hence every moment below 2 is finite
/// and the variance is not.
struct ExampleDensity {
  double a;
};

struct Normal {
  double mu;
  double sigma;
};

/// Pareto type I: P(X > x) = (xm / x)^alpha for x >= xm.
struct Pareto {
  double alpha;
  double xm;
};

/// Finite support with explicit probabilities; the oracle layer enumerates these.
struct Finite {
  std::vector<double> support;
  std::vector<double> probabilities;
};

class Distribution {
 public:
  using Kind = std::variant<ExampleDensity, Normal, Pareto, Finite>;

  static Distribution example_density(double a) {
    if (!std::isfinite(a) || a == 0.0) throw invalid_argument("example density requires a finite a != 0");
    return Distribution(ExampleDensity{a}, "example:a=" + fmt(a));
  }

  static Distribution normal(double mu, double sigma) {
    if (!std::isfinite(mu) || !std::isfinite(sigma) || sigma <= 0.0) {
      throw invalid_argument("normal requires finite mu and sigma > 0");
    }
    return Distribution(Normal{mu, sigma}, "normal:" + fmt(mu) + "," + fmt(sigma));
  }

  static Distribution pareto(double alpha, double xm) {
    if (!(alpha > 0.0) || !(xm > 0.0) || !std::isfinite(alpha) || !std::isfinite(xm)) {
      throw invalid_argument("pareto requires alpha > 0 and xm > 0");
    }
    return Distribution(Pareto{alpha, xm}, "pareto:" + fmt(alpha) + "," + fmt(xm));
  }

  static Distribution finite(std::vector<double> support, std::vector<double> probabilities) {
    if (support.empty() || support.size() != probabilities.size()) {
      throw invalid_argument("finite distribution needs matching, nonempty support and probability lists");
    }
    for (std::size_t i = 0; i < support.size(); ++i) {
      if (!std::isfinite(support[i])) throw invalid_argument("finite support points must be finite");
      if (!(probabilities[i] >= 0.0)) throw invalid_argument("finite probabilities must be nonnegative");
    }
    const double total = pairwise_sum(probabilities);
    if (std::abs(total - 1.0) > 1e-12) {
      throw invalid_argument("finite probabilities must sum to 1 within 1e-12");
    }
    std::string name = "finite:[";
    for (std::size_t i = 0; i < support.size(); ++i) name += (i ? "," : "") + fmt(support[i]);
    name += "];[";
    for (std::size_t i = 0; i < probabilities.size(); ++i) name += (i ? "," : "") + fmt(probabilities[i]);
    name += "]";
    return Distribution(Finite{std::move(support), std::move(probabilities)}, std::move(name));
  }

  /// Equal mass on each point.
  static Distribution uniform_on(std::vector<double> support) {
    const std::size_t k = support.size();
    return finite(std::move(support), std::vector<double>(k, k ? 1.0 / static_cast<double>(k) : 0.0));
  }

  [[nodiscard]] const Kind& kind() const { return kind_; }
  [[nodiscard]] const std::string& name() const { return name_; }

  [[nodiscard]] bool is_finite_support() const { return std::holds_alternative<Finite>(kind_); }
  [[nodiscard]] const Finite& finite_support() const {
    if (!is_finite_support()) throw unsupported_operation(name_ + " is not a finite-support distribution");
    return std::get<Finite>(kind_);
  }
  [[nodiscard]] const ExampleDensity* as_example() const { return std::get_if<ExampleDensity>(&kind_); }

  /// Analytic mean; nullopt when it does not exist.
  [[nodiscard]] std::optional<double> mean() const {
    return std::visit(
        [](const auto& k) -> std::optional<double> {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, ExampleDensity>) {
            return k.a;
          } else if constexpr (std::is_same_v<T, Normal>) {
            return k.mu;
          } else if constexpr (std::is_same_v<T, Pareto>) {
            if (k.alpha <= 1.0) return std::nullopt;
            return k.alpha * k.xm / (k.alpha - 1.0);
          } else {
            std::vector<double> t(k.support.size());
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = k.support[i] * k.probabilities[i];
            return pairwise_sum(t);
          }
        },
        kind_);
  }

  /// Analytic variance; nullopt when infinite or undefined.
  [[nodiscard]] std::optional<double> variance() const {
    return std::visit(
        [this](const auto& k) -> std::optional<double> {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, ExampleDensity>) {
            return std::nullopt;
          } else if constexpr (std::is_same_v<T, Normal>) {
            return k.sigma * k.sigma;
          } else if constexpr (std::is_same_v<T, Pareto>) {
            if (k.alpha <= 2.0) return std::nullopt;
            return k.xm * k.xm * k.alpha / ((k.alpha - 1.0) * (k.alpha - 1.0) * (k.alpha - 2.0));
          } else {
            const double mu = *mean();
            std::vector<double> t(k.support.size());
            for (std::size_t i = 0; i < t.size(); ++i) {
              t[i] = (k.support[i] - mu) * (k.support[i] - mu) * k.probabilities[i];
            }
            return pairwise_sum(t);
          }
        },
        kind_);
  }

 private:
  Distribution(Kind kind, std::string name) : kind_(std::move(kind)), name_(std::move(name)) {}

  static std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  }

  Kind kind_;
  std::string name_;
};

/// Sequential draws from a distribution; draw k of a stream does not depend
/// on how many draws follow it, so samples of different sizes from one seed
/// are prefixes of each other.
class Sampler {
 public:
  Sampler(const Distribution& dist, std::uint64_t seed) : dist_(&dist), gen_(seed) {
    if (dist.is_finite_support()) {
      const auto& f = dist.finite_support();
      cumulative_.resize(f.probabilities.size());
      double c = 0.0;
      for (std::size_t i = 0; i < cumulative_.size(); ++i) {
        c += f.probabilities[i];
        cumulative_[i] = c;
      }
    }
  }

  double operator()() {
    return std::visit(
        [this](const auto& k) -> double {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, ExampleDensity>) {
            // Inverse CDF of |X - a|: u^{-2} = U, sign independent.
            const bool negative = (gen_() >> 63) != 0;
            const double r = 1.0 / std::sqrt(gen_.uniform_open_closed());
            return negative ? k.a - r : k.a + r;
          } else if constexpr (std::is_same_v<T, Normal>) {
            return k.mu + k.sigma * normal_(gen_);
          } else if constexpr (std::is_same_v<T, Pareto>) {
            return k.xm * std::pow(gen_.uniform_open_closed(), -1.0 / k.alpha);
          } else {
            return draw_finite(k);
          }
        },
        dist_->kind());
  }

  /// Support index of the next finite draw.
  std::size_t draw_index() {
    const double u = gen_.uniform01();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    // Skip zero-mass points that share the boundary.
    return static_cast<std::size_t>(it - cumulative_.begin());
  }

  Xoshiro256ss& generator() { return gen_; }

 private:
  double draw_finite(const Finite& f) { return f.support[draw_index()]; }

  const Distribution* dist_;
  Xoshiro256ss gen_;
  NormalStream normal_;
  std::vector<double> cumulative_;
};

/// n seeded draws. Deterministic in (dist, n, seed).
inline std::vector<double> sample(const Distribution& dist, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw invalid_argument("sample size must be at least 1");
  Sampler s(dist, seed);
  std::vector<double> out(n);
  for (auto& x : out) x = s();
  return out;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline double parse_number(std::string_view s, std::string_view context) {
  s = trim(s);
  std::string tmp(s);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tmp, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != tmp.size()) {
    throw invalid_argument("cannot parse number '" + tmp + "' in '" + std::string(context) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

/// "k1=v1,k2=v2" or positional "v1,v2" into (key, value) pairs; positional keys are empty.
inline std::vector<std::pair<std::string, double>> parse_params(std::string_view s, std::string_view context) {
  std::vector<std::pair<std::string, double>> out;
  if (trim(s).empty()) return out;
  for (auto tok : split(s, ',')) {
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) {
      out.emplace_back("", parse_number(tok, context));
    } else {
      out.emplace_back(std::string(trim(tok.substr(0, eq))), parse_number(tok.substr(eq + 1), context));
    }
  }
  return out;
}

inline std::vector<double> parse_bracket_list(std::string_view s, std::string_view context) {
  s = trim(s);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
    throw invalid_argument("expected a [..] list in '" + std::string(context) + "'");
  }
  std::vector<double> out;
  for (auto tok : split(s.substr(1, s.size() - 2), ',')) out.push_back(parse_number(tok, context));
  return out;
}

/// Looks a parameter up by key or by position; positional parameters are consumed in order.
class ParamSet {
 public:
  static constexpr std::size_t kKeyOnly = static_cast<std::size_t>(-1);

  ParamSet(std::vector<std::pair<std::string, double>> p, std::string context)
      : params_(std::move(p)), used_(params_.size(), false), context_(std::move(context)) {}

  std::optional<double> get(std::string_view key, std::size_t position) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].first == key) {
        used_[i] = true;
        return params_[i].second;
      }
    }
    if (position == kKeyOnly) return std::nullopt;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (!params_[i].first.empty()) continue;
      if (pos++ == position) {
        used_[i] = true;
        return params_[i].second;
      }
    }
    return std::nullopt;
  }

  double require(std::string_view key, std::size_t position) {
    auto v = get(key, position);
    if (!v) throw invalid_argument("missing parameter '" + std::string(key) + "' in '" + context_ + "'");
    return *v;
  }

  void finish() const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (!used_[i]) {
        throw invalid_argument("unrecognised parameter '" + params_[i].first + "' in '" + context_ + "'");
      }
    }
  }

 private:
  std::vector<std::pair<std::string, double>> params_;
  std::vector<bool> used_;
  std::string context_;
};

}  // namespace detail

/// Distribution registry. Accepted forms:
///   example:a=2 | normal:1,1 | normal:mu=1,sigma=1 | pareto:3,1 | finite:[-1,1];[0.5,0.5]
inline Distribution parse_distribution(std::string_view spec) {
  const std::string context(spec);
  const auto colon = spec.find(':');
  const std::string family(detail::trim(spec.substr(0, colon)));
  const std::string_view rest = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);

  if (family == "finite") {
    const auto semi = rest.find(';');
    if (semi == std::string_view::npos) {
      throw invalid_argument("finite distribution needs '[support];[probabilities]': '" + context + "'");
    }
    return Distribution::finite(detail::parse_bracket_list(rest.substr(0, semi), context),
                                detail::parse_bracket_list(rest.substr(semi + 1), context));
  }

  detail::ParamSet p(detail::parse_params(rest, context), context);
  Distribution d = [&] {
    if (family == "example") return Distribution::example_density(p.require("a", 0));
    if (family == "normal") {
      const double mu = p.get("mu", 0).value_or(0.0);
      const double sigma = p.get("sigma", 1).value_or(1.0);
      return Distribution::normal(mu, sigma);
    }
    if (family == "pareto") {
      const double alpha = p.require("alpha", 0);
      return Distribution::pareto(alpha, p.get("xm", 1).value_or(1.0));
    }
    throw invalid_argument("unknown distribution '" + family +
                           "'; registry has: example:a=<a>, normal:<mu>,<sigma>, pareto:<alpha>,<xm>, "
                           "finite:[points];[probabilities]");
  }();
  p.finish();
  return d;
}

}  // namespace ustat
