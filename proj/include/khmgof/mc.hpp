#pragma once

// Seeded Monte Carlo experiments over the full test pipeline: null-distribution
// studies, power tables against mixture alternatives, a Brownian-bridge
// divergence check, and tail-growth diagnostics for the weighted score norm.
//
// Every experiment is a pure function of its config. Replicate i draws from
// mt19937_64 seeded by mix_seed(master_seed, stream_tag, i), so results do not
// depend on execution order and phases never share a stream.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "khmgof/errors.hpp"
#include "khmgof/families.hpp"
#include "khmgof/gamma.hpp"
#include "khmgof/regression.hpp"
#include "khmgof/rng.hpp"
#include "khmgof/stats.hpp"
#include "khmgof/transform.hpp"

namespace khmgof {

// Stream tags keep the null phase, the alternative phase, and bridge
// simulations on disjoint RNG streams under one master seed.
inline constexpr std::uint64_t kStreamNull = 1;
inline constexpr std::uint64_t kStreamAlternative = 2;
inline constexpr std::uint64_t kStreamBridge = 3;

// Contamination mixture (1 - weight) * null + weight * contaminant.
struct Mixture {
  double weight = 0.0;
  ErrorFamily contaminant = ErrorFamily::normal();
};

// One simulation study: Y = exp(X) + e with X ~ Uniform[0, 2], errors from the
// null family or, when `alternative` is set, from the mixture.
struct ExperimentConfig {
  std::size_t n = 200;
  std::size_t reps = 2000;
  double bandwidth = 0.04;
  ErrorFamily null_family = ErrorFamily::normal();
  std::optional<Mixture> alternative;
  std::uint64_t master_seed = 0;
  std::vector<double> levels = {0.10, 0.05, 0.025, 0.01};

  void check() const {
    if (n == 0) throw DomainError("experiment needs n >= 1");
    if (reps == 0) throw DomainError("experiment needs reps >= 1");
    if (!(bandwidth > 0.0)) throw DomainError("experiment bandwidth must be positive");
    if (alternative && !(alternative->weight >= 0.0 && alternative->weight <= 1.0))
      throw DomainError("mixture weight must lie in [0, 1]");
    for (double a : levels)
      if (!(a > 0.0 && a < 1.0)) throw DomainError("test levels must lie in (0, 1)");
  }
};

namespace detail {

struct SampleDraw {
  Sample sample;
  std::size_t contaminants = 0;
};

// Draw order per replicate is part of the contract: n covariate uniforms
// first, then per error one mixture uniform (only when an alternative is
// configured) followed by the inverse-CDF uniform.
inline SampleDraw sample_model_counted(const ExperimentConfig& config,
                                       std::size_t replicate_index) {
  config.check();
  if (replicate_index >= config.reps)
    throw DomainError("replicate index must be below the configured rep count");
  const std::uint64_t tag = config.alternative ? kStreamAlternative : kStreamNull;
  std::mt19937_64 rng = replicate_rng(config.master_seed, tag, replicate_index);
  SampleDraw out;
  out.sample.x.resize(config.n);
  out.sample.y.resize(config.n);
  for (std::size_t i = 0; i < config.n; ++i) out.sample.x[i] = 2.0 * uniform01(rng);
  for (std::size_t i = 0; i < config.n; ++i) {
    const ErrorFamily* fam = &config.null_family;
    if (config.alternative && uniform01(rng) < config.alternative->weight) {
      fam = &config.alternative->contaminant;
      ++out.contaminants;
    }
    out.sample.y[i] = std::exp(out.sample.x[i]) + fam->quantile(uniform01(rng));
  }
  return out;
}

// Upper order statistic of a sorted ascending sample: the smallest value whose
// empirical tail mass is <= level, so P(stat > value) <= level under the edf.
// Degenerate levels give infinite thresholds (level >= 1 rejects everything).
inline double empirical_critical_value(const std::vector<double>& sorted, double level) {
  if (sorted.empty()) throw DomainError("empirical critical value needs data");
  if (level >= 1.0) return -std::numeric_limits<double>::infinity();
  if (level <= 0.0) return std::numeric_limits<double>::infinity();
  const double m = static_cast<double>(sorted.size());
  const double raw = std::ceil((1.0 - level) * m) - 1.0;
  const std::size_t idx =
      static_cast<std::size_t>(std::clamp(raw, 0.0, m - 1.0));
  return sorted[idx];
}

// Linear-interpolation quantile of a sorted ascending sample (used only for
// summary statistics, not for test thresholds).
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw DomainError("quantile needs data");
  if (sorted.size() == 1) return sorted[0];
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const double lo = std::floor(std::clamp(pos, 0.0, double(sorted.size() - 1)));
  const std::size_t i = static_cast<std::size_t>(lo);
  if (i + 1 >= sorted.size()) return sorted.back();
  const double w = pos - lo;
  return (1.0 - w) * sorted[i] + w * sorted[i + 1];
}

// Kolmogorov distance between the edf of a sorted sample and a continuous CDF.
template <class Cdf>
double ks_distance(const std::vector<double>& sorted, Cdf&& cdf) {
  const double m = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double F = cdf(sorted[i]);
    d = std::max(d, std::max((static_cast<double>(i) + 1.0) / m - F,
                             F - static_cast<double>(i) / m));
  }
  return d;
}

struct ReplicateStats {
  double sup_v = 0.0;
  double sup_w = 0.0;
};

// One full pipeline pass: sample, smooth, residuals, both sup statistics.
// Domain failures (tail overflow, empty smoothing window, degenerate sample)
// abort the replicate; anything else is a bug and propagates.
inline std::optional<ReplicateStats> run_replicate(const ExperimentConfig& config,
                                                   std::size_t replicate_index) {
  try {
    const Sample sample = sample_model_counted(config, replicate_index).sample;
    const ResidualSet rs = compute_residuals(sample, config.bandwidth);
    ReplicateStats out;
    out.sup_v = empirical_process_sup(rs, config.null_family);
    out.sup_w = sup_statistic(transform_path(rs, config.null_family));
    return out;
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

}  // namespace detail

inline Sample sample_model(const ExperimentConfig& config, std::size_t replicate_index) {
  return detail::sample_model_counted(config, replicate_index).sample;
}

// Null-distribution study: edfs of both sup statistics over the replicates
// that completed, the Kolmogorov distance from the transformed statistic's edf
// to its limiting law, and empirical critical values at each configured level.
struct NullDistributionResult {
  std::vector<double> sup_v;  // sorted ascending; the edf support
  std::vector<double> sup_w;  // sorted ascending
  double ks_distance_w_to_limit = 0.0;
  std::vector<double> levels;
  std::vector<double> critical_v;
  std::vector<double> critical_w;
  std::size_t reps = 0;
  std::size_t aborted = 0;
};

inline NullDistributionResult null_distribution_experiment(const ExperimentConfig& config) {
  config.check();
  if (config.alternative)
    throw DomainError("null experiment must not carry an alternative mixture");
  NullDistributionResult out;
  out.reps = config.reps;
  out.levels = config.levels;
  out.sup_v.reserve(config.reps);
  out.sup_w.reserve(config.reps);
  for (std::size_t i = 0; i < config.reps; ++i) {
    if (const auto stats = detail::run_replicate(config, i)) {
      out.sup_v.push_back(stats->sup_v);
      out.sup_w.push_back(stats->sup_w);
    } else {
      ++out.aborted;
    }
  }
  if (out.aborted * 100 > config.reps)
    throw ExperimentError("more than 1% of replicates aborted");
  std::sort(out.sup_v.begin(), out.sup_v.end());
  std::sort(out.sup_w.begin(), out.sup_w.end());
  out.ks_distance_w_to_limit =
      detail::ks_distance(out.sup_w, [](double a) { return sup_abs_bm_cdf(a); });
  for (double level : config.levels) {
    out.critical_v.push_back(detail::empirical_critical_value(out.sup_v, level));
    out.critical_w.push_back(detail::empirical_critical_value(out.sup_w, level));
  }
  return out;
}

struct PowerRow {
  double bandwidth = 0.0;
  double level = 0.0;
  double power_v = 0.0;
  double power_w = 0.0;
  double se_v = 0.0;  // sqrt(p(1-p)/reps)
  double se_w = 0.0;
};

struct PowerTable {
  std::vector<PowerRow> rows;
  std::size_t reps = 0;
  std::size_t aborted = 0;
};

// Power against the configured mixture, thresholded at critical values
// estimated from a null run with the same n, bandwidth, and levels.
inline PowerTable power_experiment(const ExperimentConfig& config,
                                   const NullDistributionResult& null_run) {
  config.check();
  if (!config.alternative)
    throw DomainError("power experiment needs an alternative mixture");
  if (null_run.levels != config.levels)
    throw DomainError("null critical values were estimated at different levels");
  std::vector<double> alt_v;
  std::vector<double> alt_w;
  alt_v.reserve(config.reps);
  alt_w.reserve(config.reps);
  std::size_t aborted = 0;
  for (std::size_t i = 0; i < config.reps; ++i) {
    if (const auto stats = detail::run_replicate(config, i)) {
      alt_v.push_back(stats->sup_v);
      alt_w.push_back(stats->sup_w);
    } else {
      ++aborted;
    }
  }
  if (aborted * 100 > config.reps)
    throw ExperimentError("more than 1% of replicates aborted");
  PowerTable table;
  table.reps = alt_v.size();
  table.aborted = aborted;
  const double m = static_cast<double>(alt_v.size());
  for (std::size_t k = 0; k < config.levels.size(); ++k) {
    PowerRow row;
    row.bandwidth = config.bandwidth;
    row.level = config.levels[k];
    const auto exceed = [](const std::vector<double>& stats, double cv) {
      return static_cast<double>(
                 std::count_if(stats.begin(), stats.end(),
                               [cv](double s) { return s > cv; })) /
             static_cast<double>(stats.size());
    };
    row.power_v = exceed(alt_v, null_run.critical_v[k]);
    row.power_w = exceed(alt_w, null_run.critical_w[k]);
    row.se_v = std::sqrt(row.power_v * (1.0 - row.power_v) / m);
    row.se_w = std::sqrt(row.power_w * (1.0 - row.power_w) / m);
    table.rows.push_back(row);
  }
  return table;
}

// Convenience form: runs the null phase itself (same seed, disjoint stream).
inline PowerTable power_experiment(const ExperimentConfig& config) {
  ExperimentConfig null_config = config;
  null_config.alternative.reset();
  return power_experiment(config, null_distribution_experiment(null_config));
}

// Brownian-bridge divergence check: the normalized tail integral
// (1 / -ln(1-s)) * int_0^s u(t)^2 / (1-t)^2 dt should concentrate near 1 as
// s -> 1. `grid` counts trapezoid intervals on [0, s]; the spacing must
// resolve 1-s by at least 100 points.
struct BridgeCheckConfig {
  double s = 1.0 - 1e-4;
  std::size_t grid = 1000000;
  std::size_t reps = 500;
  std::uint64_t master_seed = 0;

  void check() const {
    if (!(s > 0.0 && s < 1.0)) throw DomainError("bridge cut must lie in (0, 1)");
    if (reps == 0) throw DomainError("bridge check needs reps >= 1");
    if (grid == 0 || s / static_cast<double>(grid) > (1.0 - s) / 100.0)
      throw DomainError("bridge grid too coarse: spacing must be <= (1-s)/100");
  }
};

struct BridgeCheckResult {
  double median_ratio = 0.0;
  double iqr = 0.0;
};

// Fills path[j] with u(times[j]); path[0] corresponds to u(0) = 0. Injectable
// so deterministic paths can exercise the quadrature in isolation.
using BridgeSampler =
    std::function<void(std::mt19937_64&, const std::vector<double>&, std::vector<double>&)>;

namespace detail {

// Standard normal via Box-Muller on our own uniforms: deterministic across
// standard-library implementations, unlike std::normal_distribution.
inline double standard_normal(std::mt19937_64& rng) {
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace detail

// Exact bridge transitions: u(t') | u(t) is Gaussian with mean
// u(t)(1-t')/(1-t) and variance (t'-t)(1-t')/(1-t).
inline BridgeSampler gaussian_bridge_sampler() {
  return [](std::mt19937_64& rng, const std::vector<double>& times,
            std::vector<double>& path) {
    path[0] = 0.0;
    for (std::size_t j = 0; j + 1 < times.size(); ++j) {
      const double shrink = (1.0 - times[j + 1]) / (1.0 - times[j]);
      const double var = (times[j + 1] - times[j]) * shrink;
      path[j + 1] = path[j] * shrink + std::sqrt(var) * detail::standard_normal(rng);
    }
  };
}

struct BridgeProfilePoint {
  double s = 0.0;  // cut snapped to the simulation grid
  double median_ratio = 0.0;
  double iqr = 0.0;
};

// Ratios at several cuts from common bridge paths: one simulation on
// [0, max(s)], the running integral read off at each cut. Cuts snap to the
// nearest grid time from below; integral and normalizer use the snapped time,
// so the ratio is exact for it.
inline std::vector<BridgeProfilePoint> bridge_divergence_profile(
    const std::vector<double>& s_points, std::size_t grid, std::size_t reps,
    std::uint64_t master_seed, const BridgeSampler& sampler = gaussian_bridge_sampler()) {
  if (s_points.empty()) throw DomainError("bridge profile needs at least one cut");
  if (!std::is_sorted(s_points.begin(), s_points.end()))
    throw DomainError("bridge profile cuts must be sorted ascending");
  BridgeCheckConfig probe;
  probe.s = s_points.back();
  probe.grid = grid;
  probe.reps = reps;
  probe.master_seed = master_seed;
  probe.check();
  for (double s : s_points)
    if (!(s > 0.0 && s < 1.0)) throw DomainError("bridge cut must lie in (0, 1)");

  const double delta = s_points.back() / static_cast<double>(grid);
  std::vector<double> times(grid + 1);
  for (std::size_t j = 0; j <= grid; ++j) times[j] = static_cast<double>(j) * delta;
  std::vector<std::size_t> cut(s_points.size());
  for (std::size_t k = 0; k < s_points.size(); ++k) {
    cut[k] = std::min(grid, static_cast<std::size_t>(std::floor(s_points[k] / delta)));
    if (cut[k] == 0) throw DomainError("bridge grid too coarse for the smallest cut");
  }

  std::vector<std::vector<double>> ratios(s_points.size());
  for (auto& r : ratios) r.reserve(reps);
  std::vector<double> path(grid + 1);
  for (std::size_t i = 0; i < reps; ++i) {
    std::mt19937_64 rng = replicate_rng(master_seed, kStreamBridge, i);
    sampler(rng, times, path);
    double integral = 0.0;
    double prev = 0.0;  // integrand at times[0] where u = 0
    std::size_t next_cut = 0;
    for (std::size_t j = 1; j <= grid; ++j) {
      const double denom = 1.0 - times[j];
      const double g = path[j] * path[j] / (denom * denom);
      integral += 0.5 * (prev + g) * (times[j] - times[j - 1]);
      prev = g;
      while (next_cut < cut.size() && cut[next_cut] == j) {
        ratios[next_cut].push_back(integral / -std::log1p(-times[j]));
        ++next_cut;
      }
    }
  }

  std::vector<BridgeProfilePoint> out(s_points.size());
  for (std::size_t k = 0; k < s_points.size(); ++k) {
    std::sort(ratios[k].begin(), ratios[k].end());
    out[k].s = times[cut[k]];
    out[k].median_ratio = detail::sorted_quantile(ratios[k], 0.5);
    out[k].iqr = detail::sorted_quantile(ratios[k], 0.75) -
                 detail::sorted_quantile(ratios[k], 0.25);
  }
  return out;
}

inline BridgeCheckResult bridge_divergence_check(
    const BridgeCheckConfig& config, const BridgeSampler& sampler = gaussian_bridge_sampler()) {
  config.check();
  const auto profile = bridge_divergence_profile({config.s}, config.grid, config.reps,
                                                 config.master_seed, sampler);
  return BridgeCheckResult{profile[0].median_ratio, profile[0].iqr};
}

struct TailGrowthRow {
  double t = 0.0;
  double scaled_norm = 0.0;  // (1-t) * weighted_norm(t)
};

struct TailGrowthResult {
  std::vector<TailGrowthRow> rows;
  bool bounded = false;
};

// Scaled weighted score norm on a ladder of tail times. The norm must grow no
// faster than 1/(1-t) for the transform's tail integrals to converge; we call
// it bounded when the last decade adds under 25%, i.e. growth slower than
// (1-t)^(-0.1).
inline TailGrowthResult tail_growth_diagnostic(const ErrorFamily& family) {
  TailGrowthResult out;
  for (double t : {0.5, 0.9, 0.99, 0.999, 0.9999})
    out.rows.push_back({t, (1.0 - t) * weighted_norm(family, t)});
  const double last = out.rows[out.rows.size() - 1].scaled_norm;
  const double prev = out.rows[out.rows.size() - 2].scaled_norm;
  out.bounded = last < 1.25 * prev;
  return out;
}

}  // namespace khmgof
