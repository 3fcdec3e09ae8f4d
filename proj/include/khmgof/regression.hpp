#pragma once

// Nonparametric regression layer: boxcar Nadaraya-Watson fit, residual
// extraction, the estimated empirical process of the residuals, and a
// quartile-calibrated robust scale estimate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "khmgof/errors.hpp"
#include "khmgof/families.hpp"
#include "khmgof/process_path.hpp"

namespace khmgof {

struct Sample {
  std::vector<double> x;
  std::vector<double> y;

  std::size_t n() const { return x.size(); }

  void check() const {
    if (x.size() != y.size()) throw DomainError("sample coordinate arrays differ in length");
    if (x.empty()) throw DomainError("sample is empty");
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
        throw DomainError("sample contains a non-finite value");
  }
};

// Boxcar Nadaraya-Watson estimate: mean of the responses whose covariate
// falls in [x - bandwidth, x + bandwidth], endpoints included.  Windows poking
// past the covariate range are used as-is (truncated mass, no reflection).
inline double nw_fit(const Sample& sample, double bandwidth, double x) {
  sample.check();
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw DomainError("bandwidth must be a positive finite number");
  if (!std::isfinite(x)) throw DomainError("fit point must be finite");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < sample.n(); ++i) {
    if (std::fabs(sample.x[i] - x) <= bandwidth) {
      sum += sample.y[i];
      ++count;
    }
  }
  if (count == 0)
    throw EmptyWindowError("no design points inside the smoothing window", x, bandwidth);
  return sum / static_cast<double>(count);
}

struct ResidualSet {
  std::vector<double> residuals;         // sample order
  std::vector<double> order_statistics;  // ascending copy
  std::vector<double> fitted;            // empty when built from raw residuals
  double bandwidth = 0.0;

  std::size_t n() const { return residuals.size(); }

  static ResidualSet from_residuals(std::vector<double> values, double bandwidth = 0.0) {
    if (values.empty()) throw DomainError("residual set is empty");
    for (double v : values)
      if (!std::isfinite(v)) throw DomainError("residual set contains a non-finite value");
    ResidualSet rs;
    rs.residuals = std::move(values);
    rs.order_statistics = rs.residuals;
    std::sort(rs.order_statistics.begin(), rs.order_statistics.end());
    rs.bandwidth = bandwidth;
    return rs;
  }
};

// Residuals against the leave-none-out boxcar fit evaluated at the design
// points; every window contains its own point, so it is never empty.
inline ResidualSet compute_residuals(const Sample& sample, double bandwidth) {
  sample.check();
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw DomainError("bandwidth must be a positive finite number");
  const std::size_t n = sample.n();
  ResidualSet rs;
  rs.bandwidth = bandwidth;
  rs.fitted.resize(n);
  rs.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::fabs(sample.x[j] - sample.x[i]) <= bandwidth) {
        sum += sample.y[j];
        ++count;
      }
    }
    rs.fitted[i] = sum / static_cast<double>(count);
    rs.residuals[i] = sample.y[i] - rs.fitted[i];
  }
  rs.order_statistics = rs.residuals;
  std::sort(rs.order_statistics.begin(), rs.order_statistics.end());
  return rs;
}

// sqrt(n) * (empirical cdf of the residuals - F) at an arbitrary point.
inline double empirical_process_value(const ResidualSet& rs, const ErrorFamily& family,
                                      double x) {
  const auto& d = rs.order_statistics;
  const auto count = static_cast<double>(
      std::upper_bound(d.begin(), d.end(), x) - d.begin());
  const double n = static_cast<double>(rs.n());
  return std::sqrt(n) * (count / n - family.cdf(x));
}

// Path of the estimated empirical process v_hat.  Jump points sit at the
// distinct residual order statistics; between consecutive jumps the drift
// -sqrt(n) F is tracked by samples_per_interval points equally spaced on the
// F scale, so the exported path and its sup converge under grid refinement.
inline ProcessPath estimated_empirical_process(const ResidualSet& rs,
                                               const ErrorFamily& family,
                                               int samples_per_interval = 64) {
  if (samples_per_interval < 0) throw DomainError("samples_per_interval must be >= 0");
  const double n = static_cast<double>(rs.n());
  const double root_n = std::sqrt(n);
  ProcessPath path;
  path.name = "v_hat";
  path.kind = ProcessPath::Kind::kWithDrift;
  path.n = rs.n();

  const auto& sorted = rs.order_statistics;
  std::vector<double> jumps;
  std::vector<double> cum;  // cumulative count at each distinct value
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    jumps.push_back(sorted[i]);
    cum.push_back(static_cast<double>(j));
    i = j;
  }

  double prev_cum = 0.0;
  for (std::size_t q = 0; q < jumps.size(); ++q) {
    const double t = family.cdf(jumps[q]);
    path.points.push_back(jumps[q]);
    path.values.push_back(root_n * (cum[q] / n - t));
    path.left_limits.push_back(root_n * (prev_cum / n - t));
    if (samples_per_interval > 0 && q + 1 < jumps.size()) {
      const double t_next = family.cdf(jumps[q + 1]);
      for (int k = 1; k <= samples_per_interval; ++k) {
        const double tk =
            t + (t_next - t) * static_cast<double>(k) /
                    static_cast<double>(samples_per_interval + 1);
        if (!(tk > 0.0 && tk < 1.0)) continue;
        const double xk = family.quantile(tk);
        if (!(xk > path.points.back() && xk < jumps[q + 1])) continue;
        const double v = root_n * (cum[q] / n - tk);
        path.points.push_back(xk);
        path.values.push_back(v);
        path.left_limits.push_back(v);
      }
    }
    prev_cum = cum[q];
  }
  return path;
}

// Exact sup |v_hat| without building a path: between jumps the drift is
// monotone, so the extremes sit at jump values and left limits.
inline double empirical_process_sup(const ResidualSet& rs, const ErrorFamily& family) {
  const auto& sorted = rs.order_statistics;
  const double n = static_cast<double>(rs.n());
  double sup = 0.0;
  double prev_cum = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = family.cdf(sorted[i]);
    const double cum = static_cast<double>(j);
    sup = std::fmax(sup, std::fabs(cum / n - t));
    sup = std::fmax(sup, std::fabs(prev_cum / n - t));
    prev_cum = cum;
    i = j;
  }
  return std::sqrt(n) * sup;
}

namespace detail {

inline double median_of_sorted(const std::vector<double>& v) {
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// Robust scale: median absolute deviation rescaled by the family's upper
// quartile.  Calibrated for symmetric families, where the population MAD of
// scale-sigma errors equals sigma * quantile(0.75).
inline double scale_estimate(const ResidualSet& rs, const ErrorFamily& family) {
  std::vector<double> sorted = rs.order_statistics;
  const double med = detail::median_of_sorted(sorted);
  for (double& v : sorted) v = std::fabs(v - med);
  std::sort(sorted.begin(), sorted.end());
  const double mad = detail::median_of_sorted(sorted);
  if (!(mad > 0.0))
    throw DegenerateSampleError("residuals carry no spread: scale is not identifiable");
  return mad / family.quantile(0.75);
}

}  // namespace khmgof
