#pragma once

// Command layer behind the CLI: test a data file, run seeded simulations,
// or print family diagnostics. Commands throw (ParseError, DomainError,
// ExperimentError); the binary maps exception type to exit code.

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "khmgof/errors.hpp"
#include "khmgof/io.hpp"
#include "khmgof/mc.hpp"
#include "khmgof/transform.hpp"

namespace khmgof {

enum class ScaleMode { kKnown, kEstimate };

struct RunConfig {
  std::string family = "normal";
  std::string input_path;
  std::string output_dir = ".";
  double bandwidth = 0.04;
  double level = 0.05;
  ScaleMode scale_mode = ScaleMode::kKnown;
  std::uint64_t seed = 0;
  // simulate
  std::size_t n = 200;
  std::size_t reps = 2000;
  std::vector<double> bandwidths = {0.04};
  std::vector<double> levels = {0.10, 0.05, 0.025, 0.01};
  double alt_weight = 0.0;
  std::string alt_family;
  // diagnose
  bool bridge_check = false;
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DomainError("cannot open '" + path.string() + "' for writing");
  os << content;
  if (!os) throw DomainError("failed writing '" + path.string() + "'");
}

inline std::filesystem::path ensure_output_dir(const std::string& dir) {
  std::filesystem::path p(dir.empty() ? "." : dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec && !std::filesystem::is_directory(p))
    throw DomainError("cannot create output directory '" + p.string() + "'");
  return p;
}

// Short bandwidth tag for filenames; the config header carries full precision.
inline std::string bandwidth_tag(double a) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", a);
  return buf;
}

}  // namespace detail

inline std::string canonical_test_config(const RunConfig& config) {
  std::ostringstream os;
  os << "command=test input=" << config.input_path << " family=" << config.family
     << " bandwidth=" << format_double(config.bandwidth)
     << " level=" << format_double(config.level)
     << " scale=" << (config.scale_mode == ScaleMode::kEstimate ? "estimate" : "known")
     << " seed=" << config.seed;
  return os.str();
}

inline std::string canonical_simulate_config(const RunConfig& config) {
  std::ostringstream os;
  os << "command=simulate n=" << config.n << " reps=" << config.reps
     << " family=" << config.family << " bandwidths=";
  for (std::size_t i = 0; i < config.bandwidths.size(); ++i)
    os << (i ? "," : "") << format_double(config.bandwidths[i]);
  os << " levels=";
  for (std::size_t i = 0; i < config.levels.size(); ++i)
    os << (i ? "," : "") << format_double(config.levels[i]);
  if (config.alt_weight > 0.0)
    os << " alt_weight=" << format_double(config.alt_weight)
       << " alt_family=" << config.alt_family;
  os << " seed=" << config.seed;
  return os.str();
}

// Runs the configured goodness-of-fit test on a CSV of (x, y) pairs, writes
// report.txt and path.tsv into the output directory, and returns the report.
inline TestReport cmd_test(const RunConfig& config) {
  if (config.input_path.empty()) throw DomainError("test requires --input");
  if (!(config.level > 0.0 && config.level < 1.0))
    throw DomainError("test level must lie in (0, 1)");
  std::ifstream is(config.input_path, std::ios::binary);
  if (!is) throw DomainError("cannot open input file '" + config.input_path + "'");
  const Sample sample = read_sample_csv(is);
  if (sample.n() < 10)
    throw DomainError("refusing to test fewer than 10 observations");
  const ErrorFamily family = parse_family(config.family);
  const ResidualSet rs = compute_residuals(sample, config.bandwidth);

  ProcessPath path;
  TestReport report;
  try {
    if (config.scale_mode == ScaleMode::kEstimate) {
      path = scale_transform_path(rs, scale_estimate(rs, family), family);
      report.statistic = "W_tilde";
    } else {
      path = transform_path(rs, family);
      report.statistic = "W";
    }
  } catch (const TailOverflowError& e) {
    throw TailOverflowError(std::string(e.what()) +
                                "; reduce the extreme residual or use estimate mode",
                            e.point());
  }
  report.value = sup_statistic(path);
  report.level = config.level;
  report.critical_value = critical_value(config.level);
  report.p_value = p_value(report.value);
  report.reject = report.value > report.critical_value;
  report.family = family.spec_string();
  report.n = sample.n();
  report.bandwidth = config.bandwidth;
  report.seed = config.seed;

  const auto dir = detail::ensure_output_dir(config.output_dir);
  detail::write_file(dir / "report.txt", report_text(report));
  std::ostringstream ps;
  ps << "# config=" << canonical_test_config(config) << '\n';
  {
    std::ostringstream body;
    write_path_tsv(body, path, family.spec_string());
    // The process header line leads; the config line follows it.
    const std::string b = body.str();
    const std::size_t eol = b.find('\n');
    detail::write_file(dir / "path.tsv", b.substr(0, eol + 1) + ps.str() + b.substr(eol + 1));
  }
  return report;
}

// Null-distribution runs (and a power study when an alternative is given) for
// every configured bandwidth; persists edfs, power table, and critical values.
inline void cmd_simulate(const RunConfig& config, std::ostream& log) {
  if (config.reps == 0 || config.n == 0) throw DomainError("simulate requires n and reps");
  if (config.bandwidths.empty()) throw DomainError("simulate requires at least one bandwidth");
  const ErrorFamily family = parse_family(config.family);
  std::optional<Mixture> alternative;
  if (config.alt_weight > 0.0) {
    if (config.alt_family.empty())
      throw DomainError("alt-weight given without alt-family");
    alternative = Mixture{config.alt_weight, parse_family(config.alt_family)};
  }
  const auto dir = detail::ensure_output_dir(config.output_dir);
  const std::string run_config = canonical_simulate_config(config);

  CriticalTable table;
  const auto table_path = dir / "critical_table.tsv";
  if (std::filesystem::exists(table_path)) {
    std::ifstream ts(table_path, std::ios::binary);
    table = read_critical_table(ts);
  }

  std::vector<PowerRow> power_rows;
  std::size_t power_reps = 0;
  for (double a : config.bandwidths) {
    ExperimentConfig base;
    base.n = config.n;
    base.reps = config.reps;
    base.bandwidth = a;
    base.null_family = family;
    base.master_seed = config.seed;
    base.levels = config.levels;
    const NullDistributionResult null_run = null_distribution_experiment(base);
    const std::string tag = detail::bandwidth_tag(a);
    {
      std::ostringstream os;
      write_edf_tsv(os, null_run.sup_w, canonical_experiment_config(base));
      detail::write_file(dir / ("edf_w_a" + tag + ".tsv"), os.str());
    }
    {
      std::ostringstream os;
      write_edf_tsv(os, null_run.sup_v, canonical_experiment_config(base));
      detail::write_file(dir / ("edf_v_a" + tag + ".tsv"), os.str());
    }
    for (std::size_t k = 0; k < config.levels.size(); ++k) {
      CriticalEntry e;
      e.family = family.spec_string();
      e.n = config.n;
      e.bandwidth = a;
      e.level = config.levels[k];
      e.reps = config.reps;
      e.seed = config.seed;
      e.statistic = "W";
      e.value = null_run.critical_w[k];
      table.upsert(e);
      e.statistic = "V_hat";
      e.value = null_run.critical_v[k];
      table.upsert(e);
    }
    log << "bandwidth " << tag << ": ks_distance_W_to_limit="
        << format_double(null_run.ks_distance_w_to_limit)
        << " aborted=" << null_run.aborted << '\n';
    if (alternative) {
      ExperimentConfig alt = base;
      alt.alternative = alternative;
      const PowerTable pt = power_experiment(alt, null_run);
      power_rows.insert(power_rows.end(), pt.rows.begin(), pt.rows.end());
      power_reps = pt.reps;
    }
  }
  {
    std::ostringstream os;
    write_critical_table(os, table, run_config);
    detail::write_file(table_path, os.str());
  }
  if (alternative) {
    std::ostringstream os;
    write_power_table_tsv(os, power_rows, power_reps, run_config);
    detail::write_file(dir / "power_table.tsv", os.str());
  }
  log << "wrote " << (dir / "critical_table.tsv").string() << '\n';
}

// Prints measured diagnostics for one family; throws ExperimentError when a
// check fails so the binary exits nonzero.
inline void cmd_diagnose(const RunConfig& config, std::ostream& out) {
  const ErrorFamily family = parse_family(config.family);
  bool all_pass = true;
  out << "family=" << family.spec_string() << '\n';

  // Compensated-identity check on a 50-point quantile grid.
  std::vector<double> xs;
  for (int i = 0; i < 50; ++i)
    xs.push_back(family.quantile(0.001 + (0.995 - 0.001) * i / 49.0));
  double max_err = 0.0;
  for (const Vec2& r : identity_residuals(family, xs))
    max_err = std::max(max_err, std::max(std::abs(r[0]), std::abs(r[1])));
  const bool identity_ok = max_err < 1e-6;
  all_pass = all_pass && identity_ok;
  out << "identity_max_error=" << format_double(max_err) << ' '
      << (identity_ok ? "pass" : "FAIL") << '\n';

  const TailGrowthResult growth = tail_growth_diagnostic(family);
  for (const auto& row : growth.rows) {
    const bool degenerate = gamma_matrix(family, row.t).rank_deficient;
    out << "scaled_norm t=" << format_double(row.t) << " value="
        << format_double(row.scaled_norm) << (degenerate ? " degenerate-branch" : "")
        << '\n';
  }
  all_pass = all_pass && growth.bounded;
  out << "tail_growth_bounded=" << (growth.bounded ? "pass" : "FAIL") << '\n';

  if (config.bridge_check) {
    const auto profile = bridge_divergence_profile({0.99, 0.999, 0.9999}, 1000000, 500,
                                                   config.seed);
    bool monotone = true;
    for (std::size_t k = 0; k + 1 < profile.size(); ++k)
      monotone = monotone && profile[k].median_ratio < profile[k + 1].median_ratio;
    const bool in_band =
        profile.back().median_ratio > 0.8 && profile.back().median_ratio < 1.2;
    for (const auto& p : profile)
      out << "bridge_ratio s=" << format_double(p.s)
          << " median=" << format_double(p.median_ratio)
          << " iqr=" << format_double(p.iqr) << '\n';
    all_pass = all_pass && monotone && in_band;
    out << "bridge_divergence=" << (monotone && in_band ? "pass" : "FAIL") << '\n';
  }
  if (!all_pass) throw ExperimentError("diagnostics failed for " + family.spec_string());
}

}  // namespace khmgof
