#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "khmgof/errors.hpp"
#include "khmgof/families.hpp"
#include "khmgof/process_path.hpp"

namespace khmgof {

// Series terms below this are dropped.
inline constexpr double kSupSeriesTol = 1e-12;
// Below this point the theta-function form of the sup|B| law is used; the
// Gaussian reflection series suffers alternating cancellation for small a,
// while the theta series needs many terms for large a.  The two agree to
// machine precision in a wide band around the crossover.
inline constexpr double kSupCdfCrossover = 0.75;

namespace detail {

inline double std_normal_upper(double x) {
  return 0.5 * std::erfc(x / kSqrt2);
}

// P(sup|B| <= a) by the theta-function (Poisson-summed) series
// (4/pi) sum_{n>=0} (-1)^n/(2n+1) exp(-(2n+1)^2 pi^2 / (8 a^2)).
inline double sup_abs_bm_cdf_theta(double a) {
  const double z = kPi * kPi / (8.0 * a * a);
  double sum = 0.0;
  double sign = 1.0;
  for (int n = 0; n < 64; ++n) {
    const double odd = 2.0 * n + 1.0;
    const double term = std::exp(-odd * odd * z) / odd;
    sum += sign * term;
    sign = -sign;
    if (term < kSupSeriesTol) break;
  }
  return std::clamp((4.0 / kPi) * sum, 0.0, 1.0);
}

// P(sup|B| > a) by the reflection-principle series
// 4 sum_{j>=1} (-1)^{j+1} Pr(N > (2j-1) a), accurate for a away from 0.
inline double sup_abs_bm_survival_gauss(double a) {
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j < 256; ++j) {
    const double term = std_normal_upper((2.0 * j - 1.0) * a);
    sum += sign * term;
    sign = -sign;
    if (term < kSupSeriesTol * 1e-4) break;
  }
  return std::clamp(4.0 * sum, 0.0, 1.0);
}

}  // namespace detail

// Limiting distribution function P(sup_{t in [0,1]} |B(t)| <= a) of the
// transformed statistics under the null.
inline double sup_abs_bm_cdf(double a) {
  if (!(a >= 0.0)) throw DomainError("sup_abs_bm_cdf needs a >= 0");
  if (a == 0.0) return 0.0;
  if (a < kSupCdfCrossover) return detail::sup_abs_bm_cdf_theta(a);
  return std::clamp(1.0 - detail::sup_abs_bm_survival_gauss(a), 0.0, 1.0);
}

// P(sup|B| > a), computed on whichever side of the crossover keeps the
// series free of cancellation.
inline double sup_abs_bm_survival(double a) {
  if (!(a >= 0.0)) throw DomainError("sup_abs_bm_survival needs a >= 0");
  if (a == 0.0) return 1.0;
  if (a < kSupCdfCrossover)
    return std::clamp(1.0 - detail::sup_abs_bm_cdf_theta(a), 0.0, 1.0);
  return detail::sup_abs_bm_survival_gauss(a);
}

// Limiting-law p-value for a transformed sup statistic.
inline double p_value(double stat) { return sup_abs_bm_survival(stat); }

// a with P(sup|B| > a) = level, by bisection to 1e-9.
inline double critical_value(double level) {
  if (!(level > 0.0 && level < 1.0))
    throw DomainError("critical_value level must lie in (0, 1)");
  double lo = 0.0;
  double hi = 10.0;  // survival(10) ~ 6e-23, below any admissible level
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    if (sup_abs_bm_survival(mid) > level)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// sup_x |path(x)|.  Transformed paths are read at their jump values only;
// paths with drift between jumps also attain the sup at left limits.
inline double sup_statistic(const ProcessPath& path) {
  if (path.points.empty())
    throw DomainError("sup_statistic needs a nonempty path");
  double sup = 0.0;
  for (double v : path.values) sup = std::fmax(sup, std::fabs(v));
  if (path.kind == ProcessPath::Kind::kWithDrift)
    for (double v : path.left_limits) sup = std::fmax(sup, std::fabs(v));
  return sup;
}

// One test outcome.  p_value is absent for V_hat: its null law depends on the
// regression estimator, so only simulation-based critical values apply.
struct TestReport {
  std::string statistic;  // "V_hat" | "W" | "W_tilde"
  double value = 0.0;
  double level = 0.0;
  double critical_value = 0.0;
  std::optional<double> p_value;
  bool reject = false;
  std::string family;
  std::size_t n = 0;
  double bandwidth = 0.0;
  std::uint64_t seed = 0;
};

}  // namespace khmgof
