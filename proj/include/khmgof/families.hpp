#pragma once

// Error distribution families and the tail functionals the martingale
// transform consumes.  Supported: standard normal, standard logistic,
// double exponential with rate alpha, Student-t with integer dof.
//
// Everything is expressed through the location score psi(x) = -f'(x)/f(x)
// and tail integrals of it:
//   survival   S(x)      = 1 - F(x)
//   sigma2     s2(x)     = int_x^inf psi^2 dF
//   cond_mean  mu(x)     = E[psi | e > x] = f(x)/S(x)
//   cond_var   v(x)      = s2(x)/S(x) - mu(x)^2
// mu(x) = f(x)/S(x) holds for every family because psi*f = -f'.

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <string_view>

#include "khmgof/errors.hpp"
#include "khmgof/quadrature.hpp"

namespace khmgof {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrtPi = 1.77245385090551602730;
inline constexpr double kSqrt2 = 1.41421356237309504880;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
// Points with S(x) <= kTailFloor are too deep in the upper tail for the
// time-scale integrals; kTailClamp caps integration limits short of 1.
inline constexpr double kTailFloor = 1e-12;
inline constexpr double kTailClamp = 1e-10;

enum class FamilyKind { kNormal, kLogistic, kLaplace, kStudentT };

struct FamilyEval {
  double density = 0.0;
  double cdf = 0.0;
  double score = 0.0;
};

struct TailFunctionals {
  double survival = 0.0;
  double density = 0.0;
  double sigma2 = 0.0;
  double cond_mean = 0.0;
  double cond_var = 0.0;
};

namespace detail {

// exp(z^2) * erfc(z) for z >= 0 without overflow.
inline double erfcx_positive(double z) {
  if (z < 25.0) return std::exp(z * z) * std::erfc(z);
  const double iz2 = 1.0 / (2.0 * z * z);
  const double series = 1.0 + iz2 * (-1.0 + iz2 * (3.0 - iz2 * 15.0));
  return series / (z * kSqrtPi);
}

inline const boost::math::normal_distribution<double>& std_normal() {
  static const boost::math::normal_distribution<double> dist(0.0, 1.0);
  return dist;
}

}  // namespace detail

class ErrorFamily {
 public:
  static ErrorFamily normal() { return ErrorFamily(FamilyKind::kNormal, 0.0, 0); }
  static ErrorFamily logistic() { return ErrorFamily(FamilyKind::kLogistic, 0.0, 0); }
  static ErrorFamily laplace(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
      throw DomainError("laplace rate must be a positive finite number");
    return ErrorFamily(FamilyKind::kLaplace, alpha, 0);
  }
  static ErrorFamily student_t(int dof) {
    if (dof < 1) throw DomainError("student-t dof must be an integer >= 1");
    return ErrorFamily(FamilyKind::kStudentT, 0.0, dof);
  }

  FamilyKind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  int dof() const { return dof_; }

  double density(double x) const {
    require_finite(x);
    switch (kind_) {
      case FamilyKind::kNormal:
        return kInvSqrt2Pi * std::exp(-0.5 * x * x);
      case FamilyKind::kLogistic: {
        const double e = std::exp(-std::fabs(x));
        const double denom = 1.0 + e;
        return e / (denom * denom);
      }
      case FamilyKind::kLaplace:
        return 0.5 * alpha_ * std::exp(-alpha_ * std::fabs(x));
      case FamilyKind::kStudentT: {
        const double k = dof_;
        return t_norm_const() * std::exp(-0.5 * (k + 1.0) * std::log1p(x * x / k));
      }
    }
    return 0.0;
  }

  double cdf(double x) const {
    require_finite(x);
    switch (kind_) {
      case FamilyKind::kNormal:
        return 0.5 * std::erfc(-x / kSqrt2);
      case FamilyKind::kLogistic:
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                        : std::exp(x) / (1.0 + std::exp(x));
      case FamilyKind::kLaplace:
        return x < 0.0 ? 0.5 * std::exp(alpha_ * x)
                       : 1.0 - 0.5 * std::exp(-alpha_ * x);
      case FamilyKind::kStudentT:
        return t_cdf(x);
    }
    return 0.0;
  }

  // 1 - F(x) evaluated without subtractive cancellation in the upper tail.
  double survival(double x) const {
    require_finite(x);
    switch (kind_) {
      case FamilyKind::kNormal:
        return 0.5 * std::erfc(x / kSqrt2);
      case FamilyKind::kLogistic:
        return cdf(-x);
      case FamilyKind::kLaplace:
        return cdf(-x);
      case FamilyKind::kStudentT:
        return t_cdf(-x);
    }
    return 0.0;
  }

  double quantile(double t) const {
    if (!(t > 0.0 && t < 1.0))
      throw DomainError("quantile argument must lie strictly inside (0,1)");
    switch (kind_) {
      case FamilyKind::kNormal:
        return boost::math::quantile(detail::std_normal(), t);
      case FamilyKind::kLogistic:
        return std::log(t) - std::log1p(-t);
      case FamilyKind::kLaplace:
        return t < 0.5 ? std::log(2.0 * t) / alpha_
                       : -(std::log(2.0) + std::log1p(-t)) / alpha_;
      case FamilyKind::kStudentT: {
        if (dof_ == 1) return std::tan(kPi * (t - 0.5));
        if (dof_ == 2) {
          const double u = 2.0 * t - 1.0;
          return u * std::sqrt(2.0 / (1.0 - u * u));
        }
        return boost::math::quantile(
            boost::math::students_t_distribution<double>(dof_), t);
      }
    }
    return 0.0;
  }

  // Location score psi(x) = -f'(x)/f(x).  At the double exponential kink the
  // convention is psi(0) = 0.
  double score(double x) const {
    require_finite(x);
    switch (kind_) {
      case FamilyKind::kNormal:
        return x;
      case FamilyKind::kLogistic:
        return std::tanh(0.5 * x);
      case FamilyKind::kLaplace:
        return x > 0.0 ? alpha_ : (x < 0.0 ? -alpha_ : 0.0);
      case FamilyKind::kStudentT:
        return (dof_ + 1.0) * x / (dof_ + x * x);
    }
    return 0.0;
  }

  FamilyEval eval(double x) const { return FamilyEval{density(x), cdf(x), score(x)}; }

  // int_x^inf psi^2 dF.
  double tail_sigma2(double x) const {
    require_finite(x);
    switch (kind_) {
      case FamilyKind::kNormal:
        return x * density(x) + survival(x);
      case FamilyKind::kLogistic: {
        const double u = std::tanh(0.5 * x);
        return survival(x) * (1.0 + u + u * u) / 3.0;
      }
      case FamilyKind::kLaplace:
        return alpha_ * alpha_ * survival(x);
      case FamilyKind::kStudentT: {
        const double t = cdf(x);
        return time_scale_moment(t, [this](double y) {
          const double s = score(y);
          return s * s;
        });
      }
    }
    return 0.0;
  }

  // int_x^inf y * psi(y)^2 dF(y); feeds the scale-augmented information matrix.
  double tail_moment_xpsi2(double x) const {
    require_finite(x);
    switch (kind_) {
      case FamilyKind::kNormal:
        return (x * x + 2.0) * density(x);
      case FamilyKind::kLaplace: {
        const double a = alpha_;
        if (x >= 0.0) return survival(x) * (a * a * x + a);
        return a * cdf(x) * (1.0 - a * x);
      }
      default:
        return time_scale_moment(cdf(x), [this](double y) {
          const double s = score(y);
          return y * s * s;
        });
    }
  }

  // int_x^inf y^2 * psi(y)^2 dF(y).
  double tail_moment_x2psi2(double x) const {
    require_finite(x);
    switch (kind_) {
      case FamilyKind::kNormal:
        return (x * x * x + 3.0 * x) * density(x) + 3.0 * survival(x);
      case FamilyKind::kLaplace: {
        const double a = alpha_;
        if (x >= 0.0) return survival(x) * (a * a * x * x + 2.0 * a * x + 2.0);
        return 2.0 - cdf(x) * (a * a * x * x - 2.0 * a * x + 2.0);
      }
      default:
        return time_scale_moment(cdf(x), [this](double y) {
          const double s = y * score(y);
          return s * s;
        });
    }
  }

  // int psi^2 dF over the whole line.
  double fisher_information() const {
    switch (kind_) {
      case FamilyKind::kNormal:
        return 1.0;
      case FamilyKind::kLogistic:
        return 1.0 / 3.0;
      case FamilyKind::kLaplace:
        return alpha_ * alpha_;
      case FamilyKind::kStudentT:
        return (dof_ + 1.0) / (dof_ + 3.0);
    }
    return 0.0;
  }

  // True when psi is constant on (x, inf), which makes the tail information
  // matrix rank one (double exponential upper half).
  bool upper_tail_score_constant(double x) const {
    return kind_ == FamilyKind::kLaplace && x >= 0.0;
  }

  TailFunctionals tail(double x) const {
    require_finite(x);
    const double s = survival(x);
    if (s < kTailFloor)
      throw TailOverflowError("tail functionals requested past the supported "
                              "upper tail (survival <= 1e-12)",
                              x);
    TailFunctionals out;
    out.survival = s;
    out.density = density(x);
    switch (kind_) {
      case FamilyKind::kNormal: {
        out.sigma2 = x * out.density + s;
        out.cond_mean = x >= 0.0
                            ? 2.0 * kInvSqrt2Pi / detail::erfcx_positive(x / kSqrt2)
                            : out.density / s;
        out.cond_var = x * out.cond_mean + 1.0 - out.cond_mean * out.cond_mean;
        break;
      }
      case FamilyKind::kLogistic: {
        const double u = std::tanh(0.5 * x);
        out.sigma2 = s * (1.0 + u + u * u) / 3.0;
        out.cond_mean = cdf(x);
        out.cond_var = s * s / 3.0;
        break;
      }
      case FamilyKind::kLaplace: {
        const double a = alpha_;
        out.sigma2 = a * a * s;
        if (x >= 0.0) {
          out.cond_mean = a;
          out.cond_var = 0.0;
        } else {
          const double t = cdf(x);
          out.cond_mean = a * t / s;
          out.cond_var = -a * a * std::expm1(alpha_ * x) / (s * s);
        }
        break;
      }
      case FamilyKind::kStudentT: {
        out.sigma2 = tail_sigma2(x);
        out.cond_mean = out.density / s;
        out.cond_var = out.sigma2 / s - out.cond_mean * out.cond_mean;
        break;
      }
    }
    return out;
  }

  std::string spec_string() const {
    char buf[64];
    switch (kind_) {
      case FamilyKind::kNormal:
        return "normal";
      case FamilyKind::kLogistic:
        return "logistic";
      case FamilyKind::kLaplace:
        std::snprintf(buf, sizeof(buf), "laplace:%.17g", alpha_);
        return buf;
      case FamilyKind::kStudentT:
        std::snprintf(buf, sizeof(buf), "t:%d", dof_);
        return buf;
    }
    return "";
  }

 private:
  ErrorFamily(FamilyKind kind, double alpha, int dof)
      : kind_(kind), alpha_(alpha), dof_(dof) {}

  static void require_finite(double x) {
    if (!std::isfinite(x)) throw DomainError("family evaluation at non-finite point");
  }

  double t_norm_const() const {
    const double k = dof_;
    return std::exp(std::lgamma(0.5 * (k + 1.0)) - std::lgamma(0.5 * k)) /
           std::sqrt(k * kPi);
  }

  double t_cdf(double x) const {
    if (dof_ == 1) return 0.5 + std::atan(x) / kPi;
    if (dof_ == 2) return 0.5 * (1.0 + x / std::sqrt(x * x + 2.0));
    const boost::math::students_t_distribution<double> dist(dof_);
    return x <= 0.0 ? boost::math::cdf(dist, x)
                    : boost::math::cdf(boost::math::complement(dist, -x));
  }

  // Tail moments as time-scale integrals int_t^1 g(F^{-1}(s)) ds; the
  // substitution keeps integrands integrable for every family and bounded for
  // student_t even at dof 1.  Deep adaptive bisection toward 1 can produce
  // abscissae that round to 1 exactly, so the argument is clamped to the
  // largest representable time; the discarded sliver is O(1e-16) wide with at
  // most logarithmic integrand growth.
  template <class G>
  double time_scale_moment(double t, G&& g) const {
    if (t >= 1.0) return 0.0;
    const double top = std::nextafter(1.0, 0.0);
    const auto integrand = [this, &g, top](double s) {
      return g(quantile(std::min(s, top)));
    };
    return integrate(integrand, t, 1.0, 1e-13, 1e-9).value;
  }

  FamilyKind kind_;
  double alpha_;
  int dof_;
};

}  // namespace khmgof
