#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ustat/errors.hpp"
#include "ustat/montecarlo.hpp"
#include "ustat/processes.hpp"

namespace ustat::io {

/// Shortest text that parses back to the same double.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline std::string path_csv(const StepProcess& p) {
  std::ostringstream out;
  out << "k,t,value\n";
  for (int k = 0; k <= p.n; ++k) {
    out << k << ',' << format_double(p.t(k)) << ',' << format_double(p.values[static_cast<std::size_t>(k)]) << '\n';
  }
  return out.str();
}

inline std::string summary_csv(const ConvergenceReport& r) {
  std::ostringstream out;
  out << "n,statistic,mean,se,ks,pass\n";
  for (const auto& rec : r.records) {
    out << rec.n << ',' << '"' << rec.statistic << '"' << ',' << format_double(rec.mean) << ','
        << format_double(rec.se) << ',' << (rec.ks ? format_double(*rec.ks) : "") << ',' << (rec.pass ? 1 : 0)
        << '\n';
  }
  return out.str();
}

inline std::string replications_csv(const ReplicationValues& v) {
  std::ostringstream out;
  out << "replication,value\n";
  for (std::size_t i = 0; i < v.values.size(); ++i) {
    out << i << ',' << (v.values[i] ? format_double(*v.values[i]) : "dropped") << '\n';
  }
  return out.str();
}

/// Step path as a single polyline in a fixed 800x400 viewBox with two axes.
inline std::string path_svg(const StepProcess& p) {
  constexpr double kW = 800.0, kH = 400.0, kPad = 40.0;
  double lo = 0.0, hi = 0.0;
  for (double v : p.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-300) hi = lo + 1.0;
  const auto px = [&](double t) { return kPad + t * (kW - 2 * kPad); };
  const auto py = [&](double v) { return kH - kPad - (v - lo) / (hi - lo) * (kH - 2 * kPad); };
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 400\">\n";
  out << "<line x1=\"" << kPad << "\" y1=\"" << py(0.0) << "\" x2=\"" << kW - kPad << "\" y2=\"" << py(0.0)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad << "\" y2=\"" << kH - kPad
      << "\" stroke=\"black\"/>\n";
  out << "<polyline fill=\"none\" stroke=\"steelblue\" points=\"";
  for (int k = 0; k <= p.n; ++k) {
    const double v = p.values[static_cast<std::size_t>(k)];
    if (k > 0) out << ' ' << px(p.t(k)) << ',' << py(p.values[static_cast<std::size_t>(k - 1)]);
    out << (k > 0 ? " " : "") << px(p.t(k)) << ',' << py(v);
  }
  out << "\"/>\n</svg>\n";
  return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw config_error("cannot write " + path.string());
  f << text;
  if (!f) throw config_error("failed writing " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw config_error("cannot read " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

/// report.json, summary.csv and replications_n<N>.csv under `dir`.
inline void write_study(const std::filesystem::path& dir, const ExperimentResult& result) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.json", to_json(result.report).dump(2) + "\n");
  write_text(dir / "summary.csv", summary_csv(result.report));
  for (const auto& v : result.replications) {
    write_text(dir / ("replications_n" + std::to_string(v.n) + ".csv"), replications_csv(v));
  }
}

}  // namespace ustat::io
