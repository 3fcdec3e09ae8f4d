#pragma once

// Adaptive Gauss-Kronrod (G7,K15) quadrature on a finite interval.
// Subdivision keeps going until the K15-vs-G7 discrepancy meets the mixed
// absolute/relative tolerance or the depth cap is hit; the result carries the
// accumulated error estimate either way.

#include <array>
#include <cmath>
#include <cstddef>

namespace khmgof {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = true;
  std::size_t evaluations = 0;
};

namespace detail {

// Kronrod-15 abscissae (positive half) and weights; Gauss-7 shares the
// odd-indexed abscissae.
inline constexpr double kK15Nodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};

inline constexpr double kK15Weights[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};

inline constexpr double kG7Weights[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

template <class F>
void gk15(F&& f, double a, double b, double* kronrod, double* gauss) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double fk = 0.0;
  double fg = 0.0;
  const double f_mid = f(mid);
  fk += kK15Weights[7] * f_mid;
  fg += kG7Weights[3] * f_mid;
  for (int i = 0; i < 7; ++i) {
    const double dx = half * kK15Nodes[i];
    const double f_lo = f(mid - dx);
    const double f_hi = f(mid + dx);
    fk += kK15Weights[i] * (f_lo + f_hi);
    if (i % 2 == 1) fg += kG7Weights[i / 2] * (f_lo + f_hi);
  }
  *kronrod = fk * half;
  *gauss = fg * half;
}

template <class F>
void integrate_segment(F&& f, double a, double b, double abs_tol, double rel_tol,
                       int depth, int max_depth, QuadratureResult* out) {
  double k15 = 0.0;
  double g7 = 0.0;
  gk15(f, a, b, &k15, &g7);
  out->evaluations += 15;
  const double diff = std::fabs(k15 - g7);
  // QUADPACK-style sharpened estimate for smooth integrands.
  double err = diff;
  const double scaled = 200.0 * diff;
  if (scaled < 1.0) err = scaled * std::sqrt(scaled) * 0.005;
  const double tol = std::fmax(abs_tol, rel_tol * std::fabs(k15));
  if (err <= tol || depth >= max_depth) {
    out->value += k15;
    out->error += err;
    if (err > tol) out->converged = false;
    return;
  }
  const double mid = 0.5 * (a + b);
  integrate_segment(f, a, mid, 0.5 * abs_tol, rel_tol, depth + 1, max_depth, out);
  integrate_segment(f, mid, b, 0.5 * abs_tol, rel_tol, depth + 1, max_depth, out);
}

}  // namespace detail

template <class F>
QuadratureResult integrate(F&& f, double a, double b, double abs_tol = 1e-12,
                           double rel_tol = 1e-10, int max_depth = 60) {
  QuadratureResult result;
  if (a == b) return result;
  detail::integrate_segment(f, a, b, abs_tol, rel_tol, 0, max_depth, &result);
  return result;
}

// Array-valued variant: one set of abscissae serves every component, which
// matters when the integrand shares an expensive quantile evaluation.
template <std::size_t N>
struct ArrayQuadratureResult {
  std::array<double, N> value{};
  double error = 0.0;
  bool converged = true;
  std::size_t evaluations = 0;
};

namespace detail {

template <std::size_t N, class F>
void gk15_array(F&& f, double a, double b, std::array<double, N>* kronrod,
                std::array<double, N>* gauss) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  std::array<double, N> fk{};
  std::array<double, N> fg{};
  const std::array<double, N> f_mid = f(mid);
  for (std::size_t c = 0; c < N; ++c) {
    fk[c] += kK15Weights[7] * f_mid[c];
    fg[c] += kG7Weights[3] * f_mid[c];
  }
  for (int i = 0; i < 7; ++i) {
    const double dx = half * kK15Nodes[i];
    const std::array<double, N> f_lo = f(mid - dx);
    const std::array<double, N> f_hi = f(mid + dx);
    for (std::size_t c = 0; c < N; ++c) {
      fk[c] += kK15Weights[i] * (f_lo[c] + f_hi[c]);
      if (i % 2 == 1) fg[c] += kG7Weights[i / 2] * (f_lo[c] + f_hi[c]);
    }
  }
  for (std::size_t c = 0; c < N; ++c) {
    (*kronrod)[c] = fk[c] * half;
    (*gauss)[c] = fg[c] * half;
  }
}

template <std::size_t N, class F>
void integrate_array_segment(F&& f, double a, double b, double abs_tol,
                             double rel_tol, int depth, int max_depth,
                             ArrayQuadratureResult<N>* out) {
  std::array<double, N> k15{};
  std::array<double, N> g7{};
  gk15_array<N>(f, a, b, &k15, &g7);
  out->evaluations += 15;
  double err = 0.0;
  double scale = 0.0;
  for (std::size_t c = 0; c < N; ++c) {
    err = std::fmax(err, std::fabs(k15[c] - g7[c]));
    scale = std::fmax(scale, std::fabs(k15[c]));
  }
  const double scaled = 200.0 * err;
  if (scaled < 1.0) err = scaled * std::sqrt(scaled) * 0.005;
  const double tol = std::fmax(abs_tol, rel_tol * scale);
  if (err <= tol || depth >= max_depth) {
    for (std::size_t c = 0; c < N; ++c) out->value[c] += k15[c];
    out->error += err;
    if (err > tol) out->converged = false;
    return;
  }
  const double mid = 0.5 * (a + b);
  integrate_array_segment<N>(f, a, mid, 0.5 * abs_tol, rel_tol, depth + 1,
                             max_depth, out);
  integrate_array_segment<N>(f, mid, b, 0.5 * abs_tol, rel_tol, depth + 1,
                             max_depth, out);
}

}  // namespace detail

template <std::size_t N, class F>
ArrayQuadratureResult<N> integrate_array(F&& f, double a, double b,
                                         double abs_tol = 1e-12,
                                         double rel_tol = 1e-10,
                                         int max_depth = 60) {
  ArrayQuadratureResult<N> result;
  if (a == b) return result;
  detail::integrate_array_segment<N>(f, a, b, abs_tol, rel_tol, 0, max_depth,
                                     &result);
  return result;
}

}  // namespace khmgof
