#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <khmgof/errors.hpp>
#include <khmgof/families.hpp>
#include <khmgof/quadrature.hpp>

using khmgof::DomainError;
using khmgof::ErrorFamily;
using khmgof::integrate;
using khmgof::TailFunctionals;
using khmgof::TailOverflowError;

namespace {

std::vector<ErrorFamily> all_families() {
  return {ErrorFamily::normal(),        ErrorFamily::logistic(),
          ErrorFamily::laplace(1.0),    ErrorFamily::laplace(std::sqrt(2.0)),
          ErrorFamily::student_t(3),    ErrorFamily::student_t(1)};
}

// Head integral of a tail-score moment in the time scale, immune to the
// support-miss failure mode of x-space quadrature on heavy-tailed families.
template <class G>
double time_integral(const ErrorFamily& family, double t_lo, double t_hi, G&& g) {
  return integrate([&](double s) { return g(family.quantile(s)); }, t_lo, t_hi,
                   1e-13, 1e-11)
      .value;
}

}  // namespace

TEST_CASE("location scores match their closed forms", "[families]") {
  REQUIRE(ErrorFamily::logistic().score(0.0) == 0.0);
  REQUIRE(std::fabs(ErrorFamily::normal().score(1.5) - 1.5) < 1e-15);
  REQUIRE(ErrorFamily::laplace(1.0).score(2.0) == 1.0);
  REQUIRE(ErrorFamily::laplace(1.0).score(-2.0) == -1.0);
  const double t3_expected = (4.0 / 3.0) * 10.0 / (1.0 + 100.0 / 3.0);
  REQUIRE(std::fabs(ErrorFamily::student_t(3).score(10.0) - t3_expected) < 1e-12);
}

TEST_CASE("quantiles match closed forms and a bisection oracle", "[families]") {
  REQUIRE(std::fabs(ErrorFamily::normal().quantile(0.5)) < 1e-15);
  REQUIRE(std::fabs(ErrorFamily::logistic().quantile(0.75) - std::log(3.0)) < 1e-12);

  // Student-t with two degrees of freedom has the closed inverse
  // (2p-1) sqrt(2 / (4 p (1-p))).
  const ErrorFamily t2 = ErrorFamily::student_t(2);
  const double closed = 0.8 * std::sqrt(2.0 / (4.0 * 0.9 * 0.1));
  REQUIRE(std::fabs(t2.quantile(0.9) - closed) < 1e-10);

  // Independent root-finding oracle: bisect the CDF.
  double lo = 0.0;
  double hi = 20.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (t2.cdf(mid) < 0.9 ? lo : hi) = mid;
  }
  REQUIRE(std::fabs(t2.quantile(0.9) - 0.5 * (lo + hi)) < 1e-9);
}

TEST_CASE("quantile rejects arguments outside (0,1)", "[families]") {
  const ErrorFamily normal = ErrorFamily::normal();
  REQUIRE_THROWS_AS(normal.quantile(0.0), DomainError);
  REQUIRE_THROWS_AS(normal.quantile(1.0), DomainError);
  REQUIRE_THROWS_AS(normal.quantile(-0.3), DomainError);
}

TEST_CASE("cdf inverts quantile across the usable range", "[families]") {
  for (const auto& family : all_families()) {
    for (double t : {1e-6, 1e-4, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0 - 1e-4,
                     1.0 - 1e-6}) {
      REQUIRE(std::fabs(family.cdf(family.quantile(t)) - t) < 1e-10);
    }
  }
}

TEST_CASE("density is the derivative of the cdf in integral form", "[families]") {
  for (const auto& family : all_families()) {
    const double a = family.quantile(1e-4);
    const double b = family.quantile(1.0 - 1e-4);
    const double mass = integrate([&](double x) { return family.density(x); }, a, b,
                                  1e-12, 1e-10)
                            .value;
    REQUIRE(std::fabs(mass - (1.0 - 2e-4)) < 1e-8);
    for (double x : {a, -1.3, 0.0, 0.7, b}) {
      REQUIRE(std::fabs(family.cdf(x) + family.survival(x) - 1.0) < 1e-14);
      REQUIRE(family.density(x) >= 0.0);
    }
  }
}

TEST_CASE("tail functionals match their pinned values", "[families]") {
  const TailFunctionals lap = ErrorFamily::laplace(1.0).tail(2.0);
  REQUIRE(lap.cond_mean == 1.0);
  REQUIRE(lap.cond_var == 0.0);

  const ErrorFamily normal = ErrorFamily::normal();
  REQUIRE(std::fabs(normal.tail(0.0).cond_mean - 2.0 * normal.density(0.0)) < 1e-13);

  // In the time scale the logistic score is 2s - 1, so at x = 0 the tail
  // second moment is int_{1/2}^{1} (2s-1)^2 ds = 1/6 and the conditional
  // variance is 1/3 - 1/4 = 1/12.
  const TailFunctionals lg = ErrorFamily::logistic().tail(0.0);
  REQUIRE(std::fabs(lg.sigma2 - 1.0 / 6.0) < 1e-12);
  REQUIRE(std::fabs(lg.cond_var - 1.0 / 12.0) < 1e-12);
  REQUIRE(std::fabs(lg.cond_mean - 0.5) < 1e-12);

  const auto oracle = integrate(
      [&](double x) {
        const double s = ErrorFamily::logistic().score(x);
        return s * s * ErrorFamily::logistic().density(x);
      },
      0.0, 60.0);
  REQUIRE(std::fabs(lg.sigma2 - oracle.value) < 1e-10);
}

TEST_CASE("tail moments satisfy the conditional decomposition", "[families]") {
  for (const auto& family : all_families()) {
    for (double t : {0.05, 0.3, 0.5, 0.8, 0.97}) {
      const TailFunctionals tf = family.tail(family.quantile(t));
      REQUIRE(tf.survival >= 0.0);
      REQUIRE(tf.survival <= 1.0);
      REQUIRE(tf.sigma2 >= 0.0);
      REQUIRE(tf.cond_var >= -1e-15);
      const double recomposed = tf.survival * (tf.cond_var + tf.cond_mean * tf.cond_mean);
      REQUIRE(std::fabs(tf.sigma2 - recomposed) < 1e-9);
    }
  }
}

TEST_CASE("tail and head score moments add up to the total information", "[families]") {
  for (const auto& family : all_families()) {
    const double total = family.fisher_information();
    for (double t : {0.001, 0.25, 0.5, 0.9, 0.999}) {
      const double x = family.quantile(t);
      const double head = time_integral(family, 0.0, t, [&](double y) {
        const double s = family.score(y);
        return s * s;
      });
      REQUIRE(std::fabs(family.tail(x).sigma2 + head - total) < 1e-7);
    }
  }
}

TEST_CASE("scores are centered and reproduce the density", "[families]") {
  for (const auto& family : all_families()) {
    const double mean =
        time_integral(family, 0.0, 1.0, [&](double y) { return family.score(y); });
    REQUIRE(std::fabs(mean) < 1e-8);

    // Integrating the score over the upper tail recovers the density:
    // int_x^inf psi f dy = f(x).
    for (double t : {0.1, 0.5, 0.9}) {
      const double x = family.quantile(t);
      const double tail_score =
          time_integral(family, t, 1.0, [&](double y) { return family.score(y); });
      REQUIRE(std::fabs(tail_score - family.density(x)) < 1e-7);
    }
  }
}

TEST_CASE("fisher information closed forms", "[families]") {
  REQUIRE(ErrorFamily::normal().fisher_information() == 1.0);
  REQUIRE(std::fabs(ErrorFamily::logistic().fisher_information() - 1.0 / 3.0) < 1e-15);
  REQUIRE(std::fabs(ErrorFamily::laplace(std::sqrt(2.0)).fisher_information() - 2.0) <
          1e-15);
  REQUIRE(std::fabs(ErrorFamily::student_t(3).fisher_information() - 4.0 / 6.0) < 1e-15);
  REQUIRE(std::fabs(ErrorFamily::student_t(1).fisher_information() - 0.5) < 1e-15);
}

TEST_CASE("double exponential degeneracy detector", "[families]") {
  const ErrorFamily lap = ErrorFamily::laplace(1.0);
  REQUIRE(lap.upper_tail_score_constant(0.0));
  REQUIRE(lap.upper_tail_score_constant(2.0));
  REQUIRE_FALSE(lap.upper_tail_score_constant(-0.1));
  REQUIRE(lap.tail(0.5).cond_var == 0.0);
  REQUIRE(lap.tail(-0.5).cond_var > 0.0);
  REQUIRE_FALSE(ErrorFamily::normal().upper_tail_score_constant(3.0));
  REQUIRE_FALSE(ErrorFamily::logistic().upper_tail_score_constant(0.0));
}

TEST_CASE("eval bundles the pointwise fields", "[families]") {
  for (const auto& family : all_families()) {
    for (double x : {-1.4, 0.0, 2.3}) {
      const auto ev = family.eval(x);
      REQUIRE(ev.density == family.density(x));
      REQUIRE(ev.cdf == family.cdf(x));
      REQUIRE(ev.score == family.score(x));
    }
  }
}

TEST_CASE("factories reject invalid parameters", "[families]") {
  REQUIRE_THROWS_AS(ErrorFamily::laplace(0.0), DomainError);
  REQUIRE_THROWS_AS(ErrorFamily::laplace(-2.0), DomainError);
  REQUIRE_THROWS_AS(ErrorFamily::student_t(0), DomainError);
}

TEST_CASE("tail functionals refuse the unrepresentable deep tail", "[families]") {
  REQUIRE_THROWS_AS(ErrorFamily::normal().tail(10.0), TailOverflowError);
  try {
    ErrorFamily::normal().tail(10.0);
  } catch (const TailOverflowError& e) {
    REQUIRE(e.point() == 10.0);
  }
}

TEST_CASE("family spec strings are canonical", "[families]") {
  REQUIRE(ErrorFamily::normal().spec_string() == "normal");
  REQUIRE(ErrorFamily::logistic().spec_string() == "logistic");
  REQUIRE(ErrorFamily::laplace(1.0).spec_string() == "laplace:1");
  REQUIRE(ErrorFamily::student_t(3).spec_string() == "t:3");
}
