#pragma once

// Tail information matrices of the augmented score and the inner products
// gamma' Gamma^{-1} b the transform is built from.
//
// Location case (2x2), t = F(x):
//   Gamma_t = [[1-t, f(x)], [f(x), sigma2(x)]]
// Normalizing by (1-t) gives M = [[1, mu], [mu, E2]] with mu = cond_mean,
// E2 = cond_var + mu^2, det(M) = cond_var.  When the upper-tail score is
// constant (double exponential from the kink up) Gamma_t collapses to rank
// one with image spanned by (1, alpha); contractions against image vectors
// reduce to gamma'b / ((1-t)(1+alpha^2)) and need no inverse at all.
//
// Scale-augmented case (3x3): score (1, psi/sigma, phi/sigma) with
// phi(x) = 1 + x psi(x); rank drops are handled by an eigenvalue-thresholded
// pseudo-inverse.

#include <array>
#include <cmath>

#include "khmgof/errors.hpp"
#include "khmgof/families.hpp"

namespace khmgof {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;

// Condition cap on the normalized 2x2 matrix; past it the rank-one branch
// takes over.
// Relative determinant floor below which the normalized tail matrix
// [[1, mu],[mu, e2]] counts as rank one.  Families with a constant upper tail
// score reach exact zero; every other family keeps cond_var accurate to near
// machine precision through its cancellation-free closed form, so the solve
// stays reliable even when the matrix is ill conditioned.  Diverting merely
// ill-conditioned solves to the rank-one shortcut would inject O(1) errors,
// hence the floor sits at effective zero rather than at a condition cap.
inline constexpr double kDegenerateRel = 1e-28;
// Relative eigenvalue floor for the 3x3 pseudo-inverse.
inline constexpr double kEigenFloor = 1e-12;

namespace detail {

// Shared rank test for the normalized matrix M = [[1, mu],[mu, e2]] with
// det(M) = cv: rank one when cv is an effective zero next to lam_max^2.
inline bool normalized_rank_drop(double e2, double cv) {
  const double tr = 1.0 + e2;
  const double disc = std::sqrt(std::fmax(tr * tr - 4.0 * cv, 0.0));
  const double lam_max = 0.5 * (tr + disc);
  return !(cv > lam_max * lam_max * kDegenerateRel);
}

}  // namespace detail

struct GammaMatrix {
  double t = 0.0;
  double m00 = 0.0, m01 = 0.0, m11 = 0.0;  // symmetric entries
  double mu = 0.0;                         // cond_mean at F^{-1}(t)
  double e2 = 0.0;                         // E[psi^2 | e > x] = cond_var + mu^2
  double cv = 0.0;                         // cond_var = det of normalized matrix
  bool rank_deficient = false;
  double alpha = 0.0;  // constant tail score when rank_deficient

  double det() const { return m00 * m11 - m01 * m01; }
};

inline GammaMatrix gamma_matrix(const ErrorFamily& family, double t) {
  if (!(t >= 0.0 && t <= 1.0 - kTailFloor))
    throw DomainError("gamma_matrix time must lie in [0, 1 - 1e-12]");
  GammaMatrix g;
  g.t = t;
  if (t == 0.0) {
    g.m00 = 1.0;
    g.m01 = 0.0;
    g.m11 = family.fisher_information();
    g.mu = 0.0;
    g.e2 = g.m11;
    g.cv = g.m11;
    return g;
  }
  const double x = family.quantile(t);
  const TailFunctionals tf = family.tail(x);
  g.m00 = tf.survival;
  g.m01 = tf.density;
  g.m11 = tf.sigma2;
  g.mu = tf.cond_mean;
  g.cv = tf.cond_var;
  g.e2 = tf.cond_var + tf.cond_mean * tf.cond_mean;
  if (family.upper_tail_score_constant(x)) {
    g.rank_deficient = true;
    g.alpha = tf.cond_mean;
    return g;
  }
  if (detail::normalized_rank_drop(g.e2, g.cv)) {
    g.rank_deficient = true;
    g.alpha = g.mu;
  }
  return g;
}

// gamma' Gamma_t^{-1} b.  In the rank-deficient branch b must lie in the
// image of Gamma_t (true for every measure the transform integrates); the
// result is then the unique image-restricted solution.
inline double gamma_inner_solve(const GammaMatrix& g, const Vec2& gamma, const Vec2& b) {
  const double one_minus_t = 1.0 - g.t;
  if (g.rank_deficient) {
    const double dot = gamma[0] * b[0] + gamma[1] * b[1];
    return dot / (one_minus_t * (1.0 + g.alpha * g.alpha));
  }
  // M^{-1} = (1/cv) [[e2, -mu], [-mu, 1]] on the normalized scale.
  const double y0 = (g.e2 * b[0] - g.mu * b[1]) / g.cv;
  const double y1 = (b[1] - g.mu * b[0]) / g.cv;
  return (gamma[0] * y0 + gamma[1] * y1) / one_minus_t;
}

// gamma(t)' Gamma_t^{-1} gamma(t): the integrand whose tail growth governs
// the transform.  Closed forms: 1/(1-t) on a constant-score tail, otherwise
// (1/(1-t)) * (1 + (psi - mu)^2 / cond_var).
inline double weighted_norm(const ErrorFamily& family, double t) {
  if (!(t >= 0.0 && t <= 1.0 - kTailFloor))
    throw DomainError("weighted_norm time must lie in [0, 1 - 1e-12]");
  const GammaMatrix g = gamma_matrix(family, t);
  const double one_minus_t = 1.0 - t;
  if (g.rank_deficient) return 1.0 / one_minus_t;
  // t = 0 takes the limit through a representable time; quantile(0) itself
  // is -inf.
  const double psi = family.score(family.quantile(std::fmax(t, 1e-300)));
  const double dev = psi - g.mu;
  return (1.0 + dev * dev / g.cv) / one_minus_t;
}

// ---- scale-augmented (3x3) machinery ----

struct GammaMatrixScale {
  double t = 0.0;
  double sigma = 1.0;
  double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
};

// Score vector (1, psi(x)/sigma, phi(x)/sigma) at a standardized point.
inline Vec3 scale_score(const ErrorFamily& family, double x, double sigma) {
  const double psi = family.score(x);
  return Vec3{1.0, psi / sigma, (1.0 + x * psi) / sigma};
}

namespace detail {

inline GammaMatrixScale gamma_scale_entries(const ErrorFamily& family, double z,
                                            double sigma) {
  const TailFunctionals tf = family.tail(z);
  const double s = tf.survival;
  const double f = tf.density;
  const double j1 = family.tail_moment_xpsi2(z);
  const double j2 = family.tail_moment_x2psi2(z);
  const double inv_s1 = 1.0 / sigma;
  const double inv_s2 = inv_s1 * inv_s1;
  GammaMatrixScale g;
  g.sigma = sigma;
  g.m[0][0] = s;
  g.m[0][1] = g.m[1][0] = f * inv_s1;
  g.m[0][2] = g.m[2][0] = (2.0 * s + z * f) * inv_s1;
  g.m[1][1] = tf.sigma2 * inv_s2;
  g.m[1][2] = g.m[2][1] = (f + j1) * inv_s2;
  g.m[2][2] = (3.0 * s + 2.0 * z * f + j2) * inv_s2;
  return g;
}

}  // namespace detail

inline GammaMatrixScale gamma_matrix_scale(const ErrorFamily& family, double t,
                                           double sigma) {
  if (!(t > 0.0 && t <= 1.0 - kTailFloor))
    throw DomainError("gamma_matrix_scale time must lie in (0, 1 - 1e-12]");
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw DomainError("gamma_matrix_scale needs a positive finite sigma");
  GammaMatrixScale g = detail::gamma_scale_entries(family, family.quantile(t), sigma);
  g.t = t;
  return g;
}

namespace detail {

// Cyclic Jacobi eigensolver for a symmetric 3x3; eigvec columns hold the
// eigenvectors.
inline void jacobi_eigen3(const double a_in[3][3], double eigval[3],
                          double eigvec[3][3]) {
  double a[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      a[i][j] = a_in[i][j];
      eigvec[i][j] = (i == j) ? 1.0 : 0.0;
    }
  for (int sweep = 0; sweep < 64; ++sweep) {
    const double off = std::fabs(a[0][1]) + std::fabs(a[0][2]) + std::fabs(a[1][2]);
    const double diag = std::fabs(a[0][0]) + std::fabs(a[1][1]) + std::fabs(a[2][2]);
    if (off <= 1e-300 || off <= 1e-16 * diag) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
        const double sign = theta >= 0.0 ? 1.0 : -1.0;
        const double t = sign / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double app = a[p][p];
        const double aqq = a[q][q];
        const double apq = a[p][q];
        a[p][p] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
        a[q][q] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
        a[p][q] = a[q][p] = 0.0;
        const int r = 3 - p - q;
        const double arp = a[r][p];
        const double arq = a[r][q];
        a[r][p] = a[p][r] = c * arp - s * arq;
        a[r][q] = a[q][r] = s * arp + c * arq;
        for (int i = 0; i < 3; ++i) {
          const double vip = eigvec[i][p];
          const double viq = eigvec[i][q];
          eigvec[i][p] = c * vip - s * viq;
          eigvec[i][q] = s * vip + c * viq;
        }
      }
    }
  }
  for (int i = 0; i < 3; ++i) eigval[i] = a[i][i];
}

}  // namespace detail

// pinv(Gamma_{t,sigma}) b with eigenvalues below kEigenFloor times the
// largest zeroed out.  For b in the image this is the image-restricted
// inverse, matching the 2x2 rank-one rule.
inline Vec3 pinv_apply_scale(const GammaMatrixScale& g, const Vec3& b) {
  double eigval[3];
  double eigvec[3][3];
  detail::jacobi_eigen3(g.m, eigval, eigvec);
  double lam_max = 0.0;
  for (double lam : eigval) lam_max = std::fmax(lam_max, lam);
  Vec3 out{0.0, 0.0, 0.0};
  if (lam_max <= 0.0) return out;
  const double floor = kEigenFloor * lam_max;
  for (int i = 0; i < 3; ++i) {
    if (eigval[i] <= floor) continue;
    const double vb =
        eigvec[0][i] * b[0] + eigvec[1][i] * b[1] + eigvec[2][i] * b[2];
    const double coef = vb / eigval[i];
    out[0] += coef * eigvec[0][i];
    out[1] += coef * eigvec[1][i];
    out[2] += coef * eigvec[2][i];
  }
  return out;
}

inline double gamma_inner_solve_scale(const GammaMatrixScale& g, const Vec3& gamma,
                                      const Vec3& b) {
  const Vec3 y = pinv_apply_scale(g, b);
  return gamma[0] * y[0] + gamma[1] * y[1] + gamma[2] * y[2];
}

}  // namespace khmgof
