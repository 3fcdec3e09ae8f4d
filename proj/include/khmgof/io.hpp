#pragma once

// Text interchange: sample CSV, process-path and edf TSV exports, the
// persisted critical-value table, and the test-report block. All numeric
// output uses %.17g so that write/read round-trips reproduce doubles exactly
// and reruns of a seeded command are byte-identical.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "khmgof/errors.hpp"
#include "khmgof/families.hpp"
#include "khmgof/mc.hpp"
#include "khmgof/process_path.hpp"
#include "khmgof/regression.hpp"
#include "khmgof/stats.hpp"

namespace khmgof {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline double parse_double(const std::string& token, std::size_t line) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v))
    throw ParseError("expected a finite number, got '" + token + "'", line);
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace detail

// Family spec grammar: normal | logistic | laplace[:alpha] | t:k.
inline ErrorFamily parse_family(const std::string& spec) {
  if (spec == "normal") return ErrorFamily::normal();
  if (spec == "logistic") return ErrorFamily::logistic();
  if (spec == "laplace") return ErrorFamily::laplace(1.0);
  if (spec.rfind("laplace:", 0) == 0) {
    const std::string arg = spec.substr(8);
    const double alpha = detail::parse_double(arg, 0);
    if (!(alpha > 0.0)) throw ParseError("laplace rate must be positive in '" + spec + "'");
    return ErrorFamily::laplace(alpha);
  }
  if (spec.rfind("t:", 0) == 0) {
    const std::string arg = spec.substr(2);
    char* end = nullptr;
    const long k = std::strtol(arg.c_str(), &end, 10);
    if (end == arg.c_str() || *end != '\0' || k < 1)
      throw ParseError("t degrees of freedom must be a positive integer in '" + spec + "'");
    return ErrorFamily::student_t(static_cast<int>(k));
  }
  throw ParseError("unknown family spec '" + spec + "'");
}

// CSV: header line `x,y`, one pair per row.
inline void write_sample_csv(std::ostream& os, const Sample& sample) {
  os << "x,y\n";
  for (std::size_t i = 0; i < sample.n(); ++i)
    os << format_double(sample.x[i]) << ',' << format_double(sample.y[i]) << '\n';
}

inline Sample read_sample_csv(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(is, line)) throw ParseError("empty input", 1);
  ++lineno;
  if (detail::strip_cr(line) != "x,y")
    throw ParseError("expected header 'x,y', got '" + line + "'", lineno);
  Sample sample;
  while (std::getline(is, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != 2)
      throw ParseError("expected two comma-separated fields", lineno);
    sample.x.push_back(detail::parse_double(fields[0], lineno));
    sample.y.push_back(detail::parse_double(fields[1], lineno));
  }
  sample.check();
  return sample;
}

// Path export: one left-limit row and one value row per jump point, so the
// full cadlag graph can be plotted from the file.
inline void write_path_tsv(std::ostream& os, const ProcessPath& path,
                           const std::string& family_spec) {
  os << "# process=" << path.name << " n=" << path.n << " family=" << family_spec << '\n';
  for (std::size_t i = 0; i < path.size(); ++i) {
    os << format_double(path.points[i]) << '\t' << format_double(path.left_limits[i]) << '\n';
    os << format_double(path.points[i]) << '\t' << format_double(path.values[i]) << '\n';
  }
}

// Canonical config string: stable key order, enough to re-run the experiment.
inline std::string canonical_experiment_config(const ExperimentConfig& config) {
  std::ostringstream os;
  os << "n=" << config.n << " reps=" << config.reps
     << " bandwidth=" << format_double(config.bandwidth)
     << " family=" << config.null_family.spec_string();
  if (config.alternative)
    os << " alt_weight=" << format_double(config.alternative->weight)
       << " alt_family=" << config.alternative->contaminant.spec_string();
  os << " seed=" << config.master_seed << " levels=";
  for (std::size_t i = 0; i < config.levels.size(); ++i)
    os << (i ? "," : "") << format_double(config.levels[i]);
  return os.str();
}

// Empirical d.f. of a sorted sample as (value, i/m) rows.
inline void write_edf_tsv(std::ostream& os, const std::vector<double>& sorted,
                          const std::string& config) {
  os << "# config=" << config << '\n';
  const double m = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    os << format_double(sorted[i]) << '\t'
       << format_double(static_cast<double>(i + 1) / m) << '\n';
}

inline void write_power_table_tsv(std::ostream& os, const std::vector<PowerRow>& rows,
                                  std::size_t reps, const std::string& config) {
  os << "# config=" << config << '\n';
  os << "# columns: bandwidth level power_V power_W se_V se_W reps\n";
  for (const auto& r : rows)
    os << format_double(r.bandwidth) << '\t' << format_double(r.level) << '\t'
       << format_double(r.power_v) << '\t' << format_double(r.power_w) << '\t'
       << format_double(r.se_v) << '\t' << format_double(r.se_w) << '\t' << reps << '\n';
}

// Persisted empirical critical values, keyed by what they were estimated for.
struct CriticalEntry {
  std::string statistic;  // V_hat | W | W_tilde
  std::string family;
  std::size_t n = 0;
  double bandwidth = 0.0;
  double level = 0.0;
  double value = 0.0;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
};

struct CriticalTable {
  std::vector<CriticalEntry> entries;

  static bool same_key(const CriticalEntry& a, const CriticalEntry& b) {
    return a.statistic == b.statistic && a.family == b.family && a.n == b.n &&
           format_double(a.bandwidth) == format_double(b.bandwidth) &&
           format_double(a.level) == format_double(b.level);
  }

  void upsert(const CriticalEntry& entry) {
    for (auto& e : entries)
      if (same_key(e, entry)) {
        e = entry;
        return;
      }
    entries.push_back(entry);
  }

  const CriticalEntry* lookup(const std::string& statistic, const std::string& family,
                              std::size_t n, double bandwidth, double level) const {
    CriticalEntry probe;
    probe.statistic = statistic;
    probe.family = family;
    probe.n = n;
    probe.bandwidth = bandwidth;
    probe.level = level;
    for (const auto& e : entries)
      if (same_key(e, probe)) return &e;
    return nullptr;
  }
};

inline void write_critical_table(std::ostream& os, CriticalTable table,
                                 const std::string& config) {
  std::sort(table.entries.begin(), table.entries.end(),
            [](const CriticalEntry& a, const CriticalEntry& b) {
              return std::tie(a.statistic, a.family, a.n, a.bandwidth, a.level) <
                     std::tie(b.statistic, b.family, b.n, b.bandwidth, b.level);
            });
  os << "# config=" << config << '\n';
  os << "# columns: statistic family n bandwidth level value reps seed\n";
  for (const auto& e : table.entries)
    os << e.statistic << '\t' << e.family << '\t' << e.n << '\t'
       << format_double(e.bandwidth) << '\t' << format_double(e.level) << '\t'
       << format_double(e.value) << '\t' << e.reps << '\t' << e.seed << '\n';
}

inline CriticalTable read_critical_table(std::istream& is) {
  CriticalTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 8)
      throw ParseError("expected 8 tab-separated fields", lineno);
    CriticalEntry e;
    e.statistic = fields[0];
    e.family = fields[1];
    e.n = static_cast<std::size_t>(detail::parse_double(fields[2], lineno));
    e.bandwidth = detail::parse_double(fields[3], lineno);
    e.level = detail::parse_double(fields[4], lineno);
    e.value = detail::parse_double(fields[5], lineno);
    if (!(e.value > 0.0)) throw ParseError("critical value must be positive", lineno);
    e.reps = static_cast<std::size_t>(detail::parse_double(fields[6], lineno));
    e.seed = static_cast<std::uint64_t>(detail::parse_double(fields[7], lineno));
    table.upsert(e);
  }
  return table;
}

// Flat key=value block in stable key order.
inline std::string report_text(const TestReport& report) {
  std::ostringstream os;
  os << "statistic=" << report.statistic << '\n'
     << "value=" << format_double(report.value) << '\n'
     << "level=" << format_double(report.level) << '\n'
     << "critical_value=" << format_double(report.critical_value) << '\n'
     << "p_value=" << (report.p_value ? format_double(*report.p_value) : std::string("NA"))
     << '\n'
     << "reject=" << (report.reject ? "true" : "false") << '\n'
     << "family=" << report.family << '\n'
     << "n=" << report.n << '\n'
     << "bandwidth=" << format_double(report.bandwidth) << '\n'
     << "seed=" << report.seed << '\n';
  return os.str();
}

}  // namespace khmgof
