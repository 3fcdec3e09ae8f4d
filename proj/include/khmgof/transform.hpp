#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "khmgof/errors.hpp"
#include "khmgof/families.hpp"
#include "khmgof/gamma.hpp"
#include "khmgof/process_path.hpp"
#include "khmgof/quadrature.hpp"
#include "khmgof/regression.hpp"

namespace khmgof {

// Cumulative score kernel G tabulated at sorted evaluation points,
// G(x) = int_{y <= x} Gamma_{F(y)}^{-1} h(y) dF(y), in the time scale
// s = F(y).  For a family with a constant upper-tail score the raw kernel
// diverges at the score kink; the table then stores, per point, exactly the
// component every consumer pairing reads (see cumulant_table).
struct CumulantTable {
  std::vector<double> points;
  std::vector<double> times;  // clamped time coordinate F(point)
  std::vector<Vec2> values;
};

// Scale-augmented analogue with 3-vector values over standardized points.
struct CumulantTableScale {
  double sigma = 1.0;
  std::vector<double> points;  // standardized scale
  std::vector<double> times;
  std::vector<Vec3> values;
};

namespace detail {

inline constexpr double kSegAbsTol = 1e-13;
inline constexpr double kSegRelTol = 1e-10;

// Clamped time coordinate of an evaluation point.  Rejects points so deep in
// the upper tail that the kernel integral is no longer representable.
inline double eval_time(const ErrorFamily& family, double p) {
  if (!std::isfinite(p))
    throw DomainError("evaluation points must be finite");
  if (family.survival(p) < kTailFloor)
    throw TailOverflowError("evaluation point too deep in the upper tail", p);
  return std::min(family.cdf(p), 1.0 - kTailClamp);
}

// Score assigned to a point mass.  At the kink of a constant-upper-tail-score
// family the score is taken as its upper-tail limit: only that choice keeps
// the kernel contraction of an atom sitting exactly on the kink finite (the
// atom then pairs orthogonally to the divergent kernel direction).
inline double atom_score(const ErrorFamily& family, double p) {
  if (family.upper_tail_score_constant(p)) return family.tail(p).cond_mean;
  return family.score(p);
}

// Gamma_s^{-1} gamma(s) as a function of time, one quantile evaluation per
// abscissa.  The rank-one branch returns the image-restricted solution
// (1, a) / ((1 - s)(1 + a^2)).
inline Vec2 location_integrand(const ErrorFamily& family, double s) {
  const double x = family.quantile(s);
  const TailFunctionals tf = family.tail(x);
  const double one_minus_s = 1.0 - s;
  const double mu = tf.cond_mean;
  const double cv = tf.cond_var;
  const double e2 = cv + mu * mu;
  if (family.upper_tail_score_constant(x) || normalized_rank_drop(e2, cv)) {
    const double c = 1.0 / (one_minus_s * (1.0 + mu * mu));
    return Vec2{c, mu * c};
  }
  const double psi = family.score(x);
  return Vec2{(e2 - mu * psi) / (cv * one_minus_s),
              (psi - mu) / (cv * one_minus_s)};
}

// gamma(s)' Gamma_s^{-1} b for a fixed vector b.
inline double location_contraction(const ErrorFamily& family, double s,
                                   const Vec2& b) {
  const double x = family.quantile(s);
  const TailFunctionals tf = family.tail(x);
  const double one_minus_s = 1.0 - s;
  const double mu = tf.cond_mean;
  const double cv = tf.cond_var;
  const double e2 = cv + mu * mu;
  if (family.upper_tail_score_constant(x) || normalized_rank_drop(e2, cv)) {
    return (b[0] + mu * b[1]) / (one_minus_s * (1.0 + mu * mu));
  }
  const double psi = family.score(x);
  const double y0 = (e2 * b[0] - mu * b[1]) / cv;
  const double y1 = (b[1] - mu * b[0]) / cv;
  return (y0 + psi * y1) / one_minus_s;
}

// pinv(Gamma_{s,sigma}) gamma_sigma(s) in the time scale.
inline Vec3 scale_integrand(const ErrorFamily& family, double sigma, double s) {
  const double z = family.quantile(s);
  GammaMatrixScale g = gamma_scale_entries(family, z, sigma);
  g.t = s;
  return pinv_apply_scale(g, scale_score(family, z, sigma));
}

// gamma_sigma(s)' pinv(Gamma_{s,sigma}) b for a fixed vector b.
inline double scale_contraction(const ErrorFamily& family, double sigma,
                                double s, const Vec3& b) {
  const double z = family.quantile(s);
  GammaMatrixScale g = gamma_scale_entries(family, z, sigma);
  g.t = s;
  const Vec3 y = pinv_apply_scale(g, b);
  const Vec3 gam = scale_score(family, z, sigma);
  return gam[0] * y[0] + gam[1] * y[1] + gam[2] * y[2];
}

// Families whose upper-tail score is constant have a score kink at 0.
inline bool has_score_kink(const ErrorFamily& family) {
  return family.upper_tail_score_constant(0.0);
}

// Null direction of the scale-augmented Gamma above the kink: orthogonal to
// every (1, a/sigma, (1 + z a)/sigma), hence (a, -sigma, 0) normalized.
inline Vec3 scale_kernel_direction(const ErrorFamily& family, double sigma) {
  const double a = family.tail(0.0).cond_mean;
  const double norm = std::sqrt(a * a + sigma * sigma);
  return Vec3{a / norm, -sigma / norm, 0.0};
}

struct AtomSet {
  std::vector<double> points;  // distinct, ascending
  std::vector<double> counts;  // multiplicities
};

inline AtomSet distinct_atoms(const std::vector<double>& sorted_values) {
  AtomSet atoms;
  for (double v : sorted_values) {
    if (!atoms.points.empty() && v == atoms.points.back()) {
      atoms.counts.back() += 1.0;
    } else {
      atoms.points.push_back(v);
      atoms.counts.push_back(1.0);
    }
  }
  return atoms;
}

}  // namespace detail

// Builds the cumulative kernel over sorted points.  Below the kink of a
// constant-upper-tail-score family the raw integrand grows like
// 1 / (kink_time - s) along the fixed direction (1, -1/a), which every
// super-kink score (1, a) annihilates exactly; values for super-kink points
// therefore restart the accumulation at the kink and carry only the
// rank-one-region integral, which is the entire contraction any consumer of
// those entries sees.  Sub-kink points keep the raw (finite) accumulation.
inline CumulantTable cumulant_table(const ErrorFamily& family,
                                    const std::vector<double>& points) {
  CumulantTable table;
  table.points = points;
  const std::size_t m = points.size();
  table.times.resize(m);
  table.values.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (i > 0 && !(points[i] >= points[i - 1]))
      throw DomainError("cumulant_table points must be sorted ascending");
    table.times[i] = detail::eval_time(family, points[i]);
  }
  if (m == 0) return table;

  const bool kink = detail::has_score_kink(family);
  const double kink_time = kink ? family.cdf(0.0) : 2.0;
  Vec2 acc{0.0, 0.0};        // raw accumulation, read below the kink
  Vec2 acc_super{0.0, 0.0};  // restarted accumulation, read from the kink up
  bool crossed = false;
  double prev = 0.0;
  auto integrand = [&family](double s) {
    return detail::location_integrand(family, s);
  };
  for (std::size_t i = 0; i < m; ++i) {
    const double t = table.times[i];
    if (kink && family.upper_tail_score_constant(points[i])) {
      if (!crossed) {
        crossed = true;
        prev = kink_time;  // the raw kernel is not read past this point
      }
      const auto seg = integrate_array<2>(integrand, prev, t,
                                          detail::kSegAbsTol, detail::kSegRelTol);
      acc_super[0] += seg.value[0];
      acc_super[1] += seg.value[1];
      table.values[i] = acc_super;
    } else {
      const auto seg = integrate_array<2>(integrand, prev, t,
                                          detail::kSegAbsTol, detail::kSegRelTol);
      acc[0] += seg.value[0];
      acc[1] += seg.value[1];
      table.values[i] = acc;
    }
    prev = t;
  }
  return table;
}

// Scale-augmented kernel table over standardized points.  The kink handling
// projects the kernel off its null direction instead of restarting: below the
// kink both the raw kernel (read by sub-kink points) and its projection (read
// by super-kink points) accumulate side by side from one evaluation per
// abscissa, since the projected integrand stays bounded through the kink
// while the raw one diverges along the null direction that super-kink scores
// cannot see.
inline CumulantTableScale cumulant_table_scale(const ErrorFamily& family,
                                               double sigma,
                                               const std::vector<double>& points) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw DomainError("cumulant_table_scale needs a positive finite sigma");
  CumulantTableScale table;
  table.sigma = sigma;
  table.points = points;
  const std::size_t m = points.size();
  table.times.resize(m);
  table.values.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (i > 0 && !(points[i] >= points[i - 1]))
      throw DomainError("cumulant_table_scale points must be sorted ascending");
    table.times[i] = detail::eval_time(family, points[i]);
  }
  if (m == 0) return table;

  if (!detail::has_score_kink(family)) {
    Vec3 acc{0.0, 0.0, 0.0};
    double prev = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const auto seg = integrate_array<3>(
          [&](double s) { return detail::scale_integrand(family, sigma, s); },
          prev, table.times[i], detail::kSegAbsTol, detail::kSegRelTol);
      for (int c = 0; c < 3; ++c) acc[c] += seg.value[c];
      table.values[i] = acc;
      prev = table.times[i];
    }
    return table;
  }

  const double kink_time = family.cdf(0.0);
  const Vec3 v = detail::scale_kernel_direction(family, sigma);
  auto project = [&v](const Vec3& w) {
    const double d = v[0] * w[0] + v[1] * w[1] + v[2] * w[2];
    return Vec3{w[0] - d * v[0], w[1] - d * v[1], w[2] - d * v[2]};
  };
  Vec3 acc_raw{0.0, 0.0, 0.0};
  Vec3 acc_proj{0.0, 0.0, 0.0};
  bool crossed = false;
  double prev = 0.0;
  auto projected = [&](double s) {
    return project(detail::scale_integrand(family, sigma, s));
  };
  for (std::size_t i = 0; i < m; ++i) {
    const double t = table.times[i];
    if (family.upper_tail_score_constant(points[i])) {
      if (!crossed) {
        crossed = true;
        const auto seg = integrate_array<3>(projected, prev, kink_time,
                                            detail::kSegAbsTol, detail::kSegRelTol);
        for (int c = 0; c < 3; ++c) acc_proj[c] += seg.value[c];
        prev = kink_time;
      }
      const auto seg = integrate_array<3>(projected, prev, t,
                                          detail::kSegAbsTol, detail::kSegRelTol);
      for (int c = 0; c < 3; ++c) acc_proj[c] += seg.value[c];
      table.values[i] = acc_proj;
    } else {
      const auto seg = integrate_array<6>(
          [&](double s) {
            const Vec3 r = detail::scale_integrand(family, sigma, s);
            const Vec3 p = project(r);
            return std::array<double, 6>{r[0], r[1], r[2], p[0], p[1], p[2]};
          },
          prev, t, detail::kSegAbsTol, detail::kSegRelTol);
      for (int c = 0; c < 3; ++c) {
        acc_raw[c] += seg.value[c];
        acc_proj[c] += seg.value[c + 3];
      }
      table.values[i] = acc_raw;
    }
    prev = t;
  }
  return table;
}

// w_n(x) = n^{-1/2} sum_i [ I(e_i <= x) - h(e_i)' G(x ^ e_i) ] as a step path
// over the residual order statistics.  One kernel table over the distinct
// order statistics serves every term; ties collapse into jump mass.
inline ProcessPath transform_path(const ResidualSet& rs,
                                  const ErrorFamily& family) {
  const std::size_t n = rs.n();
  if (n == 0) throw DomainError("transform_path needs at least one residual");
  const detail::AtomSet atoms = detail::distinct_atoms(rs.order_statistics);
  const std::size_t m = atoms.points.size();
  const CumulantTable table = cumulant_table(family, atoms.points);
  const double root_n = std::sqrt(static_cast<double>(n));

  std::vector<Vec2> scores(m);
  Vec2 hsuf{0.0, 0.0};  // running sum of count-weighted scores above d_q
  for (std::size_t j = 0; j < m; ++j) {
    scores[j] = Vec2{1.0, detail::atom_score(family, atoms.points[j])};
    hsuf[0] += atoms.counts[j] * scores[j][0];
    hsuf[1] += atoms.counts[j] * scores[j][1];
  }

  ProcessPath path;
  path.name = "w";
  path.kind = ProcessPath::Kind::kJumpsOnly;
  path.n = n;
  path.points = atoms.points;
  path.values.resize(m);
  path.left_limits.resize(m);
  double cum = 0.0;  // residual count at or below d_q
  double bs = 0.0;   // sum of c_j h_j' G(d_j) over atoms at or below d_q
  for (std::size_t q = 0; q < m; ++q) {
    const double cq = atoms.counts[q];
    const Vec2& g = table.values[q];
    hsuf[0] -= cq * scores[q][0];
    hsuf[1] -= cq * scores[q][1];
    cum += cq;
    bs += cq * (scores[q][0] * g[0] + scores[q][1] * g[1]);
    const double value = (cum - bs - (hsuf[0] * g[0] + hsuf[1] * g[1])) / root_n;
    path.values[q] = value;
    // G is continuous, so only the indicator mass jumps at d_q.
    path.left_limits[q] = value - cq / root_n;
  }
  return path;
}

// Exact w_n at arbitrary finite points: the same prefix/suffix walk as
// transform_path over the union of atoms and query points.
inline std::vector<double> transform_values_at(const ResidualSet& rs,
                                               const ErrorFamily& family,
                                               const std::vector<double>& xs) {
  const std::size_t n = rs.n();
  if (n == 0) throw DomainError("transform_values_at needs residuals");
  const detail::AtomSet atoms = detail::distinct_atoms(rs.order_statistics);
  const std::size_t m = atoms.points.size();

  std::vector<double> uni = atoms.points;
  uni.insert(uni.end(), xs.begin(), xs.end());
  std::sort(uni.begin(), uni.end());
  uni.erase(std::unique(uni.begin(), uni.end()), uni.end());
  const CumulantTable table = cumulant_table(family, uni);
  const double root_n = std::sqrt(static_cast<double>(n));

  std::vector<Vec2> scores(m);
  Vec2 hsuf{0.0, 0.0};
  for (std::size_t j = 0; j < m; ++j) {
    scores[j] = Vec2{1.0, detail::atom_score(family, atoms.points[j])};
    hsuf[0] += atoms.counts[j] * scores[j][0];
    hsuf[1] += atoms.counts[j] * scores[j][1];
  }

  std::vector<double> at_uni(uni.size());
  double cum = 0.0;
  double bs = 0.0;
  std::size_t j = 0;
  for (std::size_t k = 0; k < uni.size(); ++k) {
    // atoms are members of the union, so atom j is consumed at its own slot
    while (j < m && atoms.points[j] <= uni[k]) {
      const double cj = atoms.counts[j];
      const Vec2& g = table.values[k];
      hsuf[0] -= cj * scores[j][0];
      hsuf[1] -= cj * scores[j][1];
      cum += cj;
      bs += cj * (scores[j][0] * g[0] + scores[j][1] * g[1]);
      ++j;
    }
    const Vec2& g = table.values[k];
    at_uni[k] = (cum - bs - (hsuf[0] * g[0] + hsuf[1] * g[1])) / root_n;
  }

  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) {
    const auto it = std::lower_bound(uni.begin(), uni.end(), x);
    out.push_back(at_uni[static_cast<std::size_t>(it - uni.begin())]);
  }
  return out;
}

// Direct evaluation of K(x, nu) = int_{-inf}^x h'(y) Gamma_{F(y)}^{-1}
// [ sum_i w_i h(a_i) I(a_i >= y) ] dF(y) for a finite signed point measure
// nu = sum w_i delta_{a_i}, by adaptive quadrature in the time scale over
// pieces on which the inner sum is constant.  Slow path, kept as the oracle
// for transform_path.
inline double K_direct(const ErrorFamily& family, double x,
                       const std::vector<double>& atom_points,
                       const std::vector<double>& atom_weights) {
  if (atom_points.size() != atom_weights.size())
    throw DomainError("K_direct needs one weight per atom");
  const double upper = detail::eval_time(family, x);
  const std::size_t m = atom_points.size();

  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::isfinite(atom_points[i]))
      throw DomainError("K_direct atoms must be finite");
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return atom_points[a] < atom_points[b];
  });
  std::vector<double> atom_times(m);
  std::vector<Vec2> suffix(m + 1, Vec2{0.0, 0.0});
  for (std::size_t r = m; r-- > 0;) {
    const std::size_t i = order[r];
    atom_times[r] = std::min(family.cdf(atom_points[i]), 1.0 - kTailClamp);
    const double w = atom_weights[i];
    const double psi = detail::atom_score(family, atom_points[i]);
    suffix[r][0] = suffix[r + 1][0] + w;
    suffix[r][1] = suffix[r + 1][1] + w * psi;
  }

  std::vector<double> breaks;
  breaks.push_back(0.0);
  for (double t : atom_times)
    if (t > 0.0 && t < upper) breaks.push_back(t);
  if (detail::has_score_kink(family)) {
    const double kt = family.cdf(0.0);
    if (kt > 0.0 && kt < upper) breaks.push_back(kt);
  }
  breaks.push_back(upper);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  double total = 0.0;
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const double lo = breaks[p];
    const double hi = breaks[p + 1];
    // atoms with time >= hi are exactly those in the inner sum on (lo, hi)
    const std::size_t first =
        static_cast<std::size_t>(std::lower_bound(atom_times.begin(),
                                                  atom_times.end(), hi) -
                                 atom_times.begin());
    const Vec2 b = suffix[first];
    if (b[0] == 0.0 && b[1] == 0.0) continue;
    total += integrate(
                 [&](double s) {
                   return detail::location_contraction(family, s, b);
                 },
                 lo, hi, detail::kSegAbsTol, detail::kSegRelTol)
                 .value;
  }
  return total;
}

// Scale-augmented analogue of K_direct over standardized atoms and
// evaluation point.
inline double K_direct_scale(const ErrorFamily& family, double sigma, double x,
                             const std::vector<double>& atom_points,
                             const std::vector<double>& atom_weights) {
  if (atom_points.size() != atom_weights.size())
    throw DomainError("K_direct_scale needs one weight per atom");
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw DomainError("K_direct_scale needs a positive finite sigma");
  const double upper = detail::eval_time(family, x);
  const std::size_t m = atom_points.size();

  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::isfinite(atom_points[i]))
      throw DomainError("K_direct_scale atoms must be finite");
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return atom_points[a] < atom_points[b];
  });
  std::vector<double> atom_times(m);
  std::vector<Vec3> suffix(m + 1, Vec3{0.0, 0.0, 0.0});
  for (std::size_t r = m; r-- > 0;) {
    const std::size_t i = order[r];
    const double z = atom_points[i];
    atom_times[r] = std::min(family.cdf(z), 1.0 - kTailClamp);
    const double w = atom_weights[i];
    const double psi = detail::atom_score(family, z);
    suffix[r][0] = suffix[r + 1][0] + w;
    suffix[r][1] = suffix[r + 1][1] + w * psi / sigma;
    suffix[r][2] = suffix[r + 1][2] + w * (1.0 + z * psi) / sigma;
  }

  std::vector<double> breaks;
  breaks.push_back(0.0);
  for (double t : atom_times)
    if (t > 0.0 && t < upper) breaks.push_back(t);
  if (detail::has_score_kink(family)) {
    const double kt = family.cdf(0.0);
    if (kt > 0.0 && kt < upper) breaks.push_back(kt);
  }
  breaks.push_back(upper);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  double total = 0.0;
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const double lo = breaks[p];
    const double hi = breaks[p + 1];
    const std::size_t first =
        static_cast<std::size_t>(std::lower_bound(atom_times.begin(),
                                                  atom_times.end(), hi) -
                                 atom_times.begin());
    const Vec3 b = suffix[first];
    if (b[0] == 0.0 && b[1] == 0.0 && b[2] == 0.0) continue;
    total += integrate(
                 [&](double s) {
                   return detail::scale_contraction(family, sigma, s, b);
                 },
                 lo, hi, detail::kSegAbsTol, detail::kSegRelTol)
                 .value;
  }
  return total;
}

// w~_n over standardized residuals e_i / sigma_hat with the 3-vector scores
// h_sigma and the scale-augmented kernel.
inline ProcessPath scale_transform_path(const ResidualSet& rs, double sigma_hat,
                                        const ErrorFamily& family) {
  const std::size_t n = rs.n();
  if (n == 0)
    throw DomainError("scale_transform_path needs at least one residual");
  if (!(sigma_hat > 0.0) || !std::isfinite(sigma_hat))
    throw DomainError("scale_transform_path needs a positive sigma_hat");

  std::vector<double> standardized = rs.order_statistics;
  for (double& z : standardized) z /= sigma_hat;
  const detail::AtomSet atoms = detail::distinct_atoms(standardized);
  const std::size_t m = atoms.points.size();
  const CumulantTableScale table =
      cumulant_table_scale(family, sigma_hat, atoms.points);
  const double root_n = std::sqrt(static_cast<double>(n));

  std::vector<Vec3> scores(m);
  Vec3 hsuf{0.0, 0.0, 0.0};
  for (std::size_t j = 0; j < m; ++j) {
    const double z = atoms.points[j];
    const double psi = detail::atom_score(family, z);
    scores[j] = Vec3{1.0, psi / sigma_hat, (1.0 + z * psi) / sigma_hat};
    for (int c = 0; c < 3; ++c) hsuf[c] += atoms.counts[j] * scores[j][c];
  }

  ProcessPath path;
  path.name = "w_tilde";
  path.kind = ProcessPath::Kind::kJumpsOnly;
  path.n = n;
  path.points = atoms.points;
  path.values.resize(m);
  path.left_limits.resize(m);
  double cum = 0.0;
  double bs = 0.0;
  for (std::size_t q = 0; q < m; ++q) {
    const double cq = atoms.counts[q];
    const Vec3& g = table.values[q];
    for (int c = 0; c < 3; ++c) hsuf[c] -= cq * scores[q][c];
    cum += cq;
    bs += cq * (scores[q][0] * g[0] + scores[q][1] * g[1] + scores[q][2] * g[2]);
    const double value =
        (cum - bs - (hsuf[0] * g[0] + hsuf[1] * g[1] + hsuf[2] * g[2])) / root_n;
    path.values[q] = value;
    path.left_limits[q] = value - cq / root_n;
  }
  return path;
}

// Residuals of the population identity K(x, H') = H(x) with
// H(x) = (F(x), -f(x)): returns H(x) minus the cumulative kernel contraction
// against the columns of Gamma_s, which vanishes identically in exact
// arithmetic for every family.
inline std::vector<Vec2> identity_residuals(const ErrorFamily& family,
                                            const std::vector<double>& xs) {
  auto integrand = [&family](double s) -> std::array<double, 2> {
    const double x = family.quantile(s);
    const TailFunctionals tf = family.tail(x);
    const double one_minus_s = 1.0 - s;
    const double mu = tf.cond_mean;
    const double cv = tf.cond_var;
    const double e2 = cv + mu * mu;
    const Vec2 col0{tf.survival, tf.density};
    const Vec2 col1{tf.density, tf.sigma2};
    if (family.upper_tail_score_constant(x) ||
        detail::normalized_rank_drop(e2, cv)) {
      const double den = one_minus_s * (1.0 + mu * mu);
      return {(col0[0] + mu * col0[1]) / den, (col1[0] + mu * col1[1]) / den};
    }
    const double psi = family.score(x);
    auto contract = [&](const Vec2& b) {
      const double y0 = (e2 * b[0] - mu * b[1]) / cv;
      const double y1 = (b[1] - mu * b[0]) / cv;
      return (y0 + psi * y1) / one_minus_s;
    };
    return {contract(col0), contract(col1)};
  };

  const std::size_t m = xs.size();
  std::vector<Vec2> out(m);
  const bool kink = detail::has_score_kink(family);
  const double kink_time = kink ? family.cdf(0.0) : 2.0;
  Vec2 acc{0.0, 0.0};
  double prev = 0.0;
  bool crossed = false;
  for (std::size_t i = 0; i < m; ++i) {
    if (i > 0 && !(xs[i] >= xs[i - 1]))
      throw DomainError("identity_residuals grid must be sorted ascending");
    const double t = detail::eval_time(family, xs[i]);
    if (kink && !crossed && t > kink_time) {
      crossed = true;
      const auto seg = integrate_array<2>(integrand, prev, kink_time,
                                          detail::kSegAbsTol, detail::kSegRelTol);
      acc[0] += seg.value[0];
      acc[1] += seg.value[1];
      prev = kink_time;
    }
    const auto seg = integrate_array<2>(integrand, prev, t, detail::kSegAbsTol,
                                        detail::kSegRelTol);
    acc[0] += seg.value[0];
    acc[1] += seg.value[1];
    prev = t;
    const FamilyEval ev = family.eval(xs[i]);
    out[i] = Vec2{ev.cdf - acc[0], -ev.density - acc[1]};
  }
  return out;
}

// Scalar scale-augmented identity: K(x, first column of Gamma) = F(x).
inline std::vector<double> identity_residuals_scale(const ErrorFamily& family,
                                                    double sigma,
                                                    const std::vector<double>& xs) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw DomainError("identity_residuals_scale needs a positive sigma");
  auto integrand = [&family, sigma](double s) -> double {
    const double z = family.quantile(s);
    GammaMatrixScale g = detail::gamma_scale_entries(family, z, sigma);
    g.t = s;
    const Vec3 col0{g.m[0][0], g.m[0][1], g.m[0][2]};
    const Vec3 y = pinv_apply_scale(g, col0);
    const Vec3 gam = scale_score(family, z, sigma);
    return gam[0] * y[0] + gam[1] * y[1] + gam[2] * y[2];
  };

  const std::size_t m = xs.size();
  std::vector<double> out(m);
  const bool kink = detail::has_score_kink(family);
  const double kink_time = kink ? family.cdf(0.0) : 2.0;
  double acc = 0.0;
  double prev = 0.0;
  bool crossed = false;
  for (std::size_t i = 0; i < m; ++i) {
    if (i > 0 && !(xs[i] >= xs[i - 1]))
      throw DomainError("identity_residuals_scale grid must be sorted ascending");
    const double t = detail::eval_time(family, xs[i]);
    if (kink && !crossed && t > kink_time) {
      crossed = true;
      acc += integrate(integrand, prev, kink_time, detail::kSegAbsTol,
                       detail::kSegRelTol)
                 .value;
      prev = kink_time;
    }
    acc += integrate(integrand, prev, t, detail::kSegAbsTol, detail::kSegRelTol)
               .value;
    prev = t;
    out[i] = family.cdf(xs[i]) - acc;
  }
  return out;
}

}  // namespace khmgof
