#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <khmgof/families.hpp>
#include <khmgof/mc.hpp>
#include <khmgof/regression.hpp>
#include <khmgof/rng.hpp>

using namespace khmgof;

namespace {

Sample seeded_model_sample(std::uint64_t master, std::size_t rep, std::size_t n) {
  auto rng = replicate_rng(master, 7, rep);
  Sample s;
  s.x.resize(n);
  s.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.x[i] = 2.0 * uniform01(rng);
  for (std::size_t i = 0; i < n; ++i)
    s.y[i] = std::exp(s.x[i]) + detail::standard_normal(rng);
  return s;
}

}  // namespace

TEST_CASE("boxcar fit averages the window and includes its endpoints", "[regression]") {
  Sample s;
  s.x = {0.0, 0.5, 1.0, 2.0};
  s.y = {3.0, 3.0, 3.0, 3.0};
  REQUIRE(nw_fit(s, 0.6, 0.5) == 3.0);

  s.y = {1.0, 2.0, 5.0, 9.0};
  // Window [0, 2] with half-width exactly 1 around x=1 keeps the endpoints.
  REQUIRE(nw_fit(s, 1.0, 1.0) == (1.0 + 2.0 + 5.0 + 9.0) / 4.0);
  // A window holding only the point itself returns its response.
  REQUIRE(nw_fit(s, 0.2, 2.0) == 9.0);
}

TEST_CASE("boxcar fit rejects empty windows and bad bandwidths", "[regression]") {
  Sample s;
  s.x = {0.0};
  s.y = {1.0};
  REQUIRE_THROWS_AS(nw_fit(s, 0.1, 5.0), EmptyWindowError);
  try {
    nw_fit(s, 0.1, 5.0);
  } catch (const EmptyWindowError& e) {
    REQUIRE(e.point() == 5.0);
    REQUIRE(e.bandwidth() == 0.1);
  }
  REQUIRE_THROWS_AS(nw_fit(s, 0.0, 0.0), DomainError);
  REQUIRE_THROWS_AS(nw_fit(s, -1.0, 0.0), DomainError);
}

TEST_CASE("boxcar fit is consistent at the exponential-model scale", "[regression]") {
  // n=2000, a=0.04: the window around x=1 holds about 80 points, so the fit
  // has standard deviation near sqrt(1/80) = 0.112 and lands within 0.15 of
  // exp(1) in roughly four out of five replications.
  int hits = 0;
  for (std::size_t rep = 0; rep < 200; ++rep) {
    const Sample s = seeded_model_sample(101, rep, 2000);
    if (std::fabs(nw_fit(s, 0.04, 1.0) - std::exp(1.0)) < 0.15) ++hits;
  }
  REQUIRE(hits >= 150);
}

TEST_CASE("residuals vanish for self-windows and exact constant models", "[regression]") {
  Sample single;
  single.x = {0.7};
  single.y = {4.2};
  const ResidualSet one = compute_residuals(single, 0.1);
  REQUIRE(one.residuals.size() == 1);
  REQUIRE(one.residuals[0] == 0.0);
  REQUIRE(one.fitted[0] == 4.2);

  Sample flat;
  flat.x = {0.1, 0.4, 0.9, 1.3, 1.9};
  flat.y = {7.0, 7.0, 7.0, 7.0, 7.0};
  for (double r : compute_residuals(flat, 0.5).residuals) REQUIRE(r == 0.0);
}

TEST_CASE("residuals are invariant under response translation", "[regression]") {
  const Sample s = seeded_model_sample(11, 0, 60);
  Sample shifted = s;
  for (double& y : shifted.y) y += 5.0;
  const ResidualSet base = compute_residuals(s, 0.2);
  const ResidualSet moved = compute_residuals(shifted, 0.2);
  for (std::size_t i = 0; i < base.residuals.size(); ++i)
    REQUIRE(std::fabs(base.residuals[i] - moved.residuals[i]) < 1e-10);
}

TEST_CASE("residual means are tightly centered at n=200, a=0.04", "[regression]") {
  int hits = 0;
  for (std::size_t rep = 0; rep < 200; ++rep) {
    const Sample s = seeded_model_sample(202, rep, 200);
    const ResidualSet rs = compute_residuals(s, 0.04);
    double mean = 0.0;
    for (double r : rs.residuals) mean += r;
    mean /= static_cast<double>(rs.n());
    if (std::fabs(mean) < 0.1) ++hits;
  }
  REQUIRE(hits >= 190);
}

TEST_CASE("order statistics mirror the residual multiset", "[regression]") {
  const Sample s = seeded_model_sample(13, 1, 40);
  const ResidualSet rs = compute_residuals(s, 0.3);
  std::vector<double> sorted = rs.residuals;
  std::sort(sorted.begin(), sorted.end());
  REQUIRE(rs.order_statistics == sorted);
  for (std::size_t i = 0; i < rs.n(); ++i)
    REQUIRE(rs.residuals[i] == s.y[i] - rs.fitted[i]);
}

TEST_CASE("single-residual empirical process has the textbook shape", "[regression]") {
  const auto rs = ResidualSet::from_residuals({0.0});
  const ErrorFamily normal = ErrorFamily::normal();
  const ProcessPath path = estimated_empirical_process(rs, normal);
  REQUIRE(path.kind == ProcessPath::Kind::kWithDrift);
  REQUIRE(path.n == 1);
  REQUIRE(path.points[0] == 0.0);
  REQUIRE(std::fabs(path.values[0] - 0.5) < 1e-15);
  REQUIRE(std::fabs(path.left_limits[0] + 0.5) < 1e-15);
}

TEST_CASE("ideal lattice residuals reach the minimal sup deviation", "[regression]") {
  const ErrorFamily normal = ErrorFamily::normal();
  std::vector<double> lattice(100);
  for (int i = 1; i <= 100; ++i)
    lattice[i - 1] = normal.quantile((i - 0.5) / 100.0);
  const auto rs = ResidualSet::from_residuals(std::move(lattice));
  const double sup = empirical_process_sup(rs, normal);
  REQUIRE(sup <= 0.05 + 1e-9);
  REQUIRE(sup >= 0.05 - 1e-9);
}

TEST_CASE("every distinct residual jumps by exactly sqrt(n)/n", "[regression]") {
  const Sample s = seeded_model_sample(17, 2, 25);
  const ResidualSet rs = compute_residuals(s, 0.3);
  const ErrorFamily normal = ErrorFamily::normal();
  const ProcessPath path = estimated_empirical_process(rs, normal);
  std::size_t jumps_seen = 0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double jump = path.values[i] - path.left_limits[i];
    if (jump != 0.0) {
      REQUIRE(std::fabs(jump - std::sqrt(25.0) / 25.0) < 1e-13);
      ++jumps_seen;
    }
  }
  REQUIRE(jumps_seen == 25);
}

TEST_CASE("empirical process vanishes at the extremes", "[regression]") {
  const auto rs = ResidualSet::from_residuals({-0.4, 0.2, 1.1});
  const ErrorFamily normal = ErrorFamily::normal();
  REQUIRE(empirical_process_value(rs, normal, -40.0) == 0.0);
  REQUIRE(empirical_process_value(rs, normal, 40.0) == 0.0);
}

TEST_CASE("closed-form sup matches a dense-grid scan", "[regression]") {
  const Sample s = seeded_model_sample(19, 3, 25);
  const ResidualSet rs = compute_residuals(s, 0.3);
  const ErrorFamily normal = ErrorFamily::normal();
  const double sup = empirical_process_sup(rs, normal);

  const double lo = rs.order_statistics.front() - 0.5;
  const double hi = rs.order_statistics.back() + 0.5;
  double grid_max = 0.0;
  for (int i = 0; i <= 200000; ++i) {
    const double x = lo + (hi - lo) * i / 200000.0;
    grid_max = std::fmax(grid_max, std::fabs(empirical_process_value(rs, normal, x)));
  }
  REQUIRE(sup >= grid_max - 1e-12);
  REQUIRE(sup <= grid_max + 1e-3);
}

TEST_CASE("sup computation refines consistently under grid growth", "[regression]") {
  // The exported path's sup converges: a 64-point inter-jump grid already
  // sits within 1e-4 of a 1024-point one for n >= 20.
  const Sample s = seeded_model_sample(23, 4, 30);
  const ResidualSet rs = compute_residuals(s, 0.3);
  const ErrorFamily normal = ErrorFamily::normal();
  const ProcessPath coarse = estimated_empirical_process(rs, normal, 64);
  const ProcessPath fine = estimated_empirical_process(rs, normal, 1024);
  double sup_coarse = 0.0;
  double sup_fine = 0.0;
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    sup_coarse = std::fmax(sup_coarse, std::fabs(coarse.values[i]));
    sup_coarse = std::fmax(sup_coarse, std::fabs(coarse.left_limits[i]));
  }
  for (std::size_t i = 0; i < fine.size(); ++i) {
    sup_fine = std::fmax(sup_fine, std::fabs(fine.values[i]));
    sup_fine = std::fmax(sup_fine, std::fabs(fine.left_limits[i]));
  }
  REQUIRE(sup_fine >= sup_coarse - 1e-12);
  REQUIRE(sup_fine - sup_coarse < 1e-4);
  REQUIRE(std::fabs(empirical_process_sup(rs, normal) - sup_fine) < 1e-4);
}

TEST_CASE("robust scale estimate matches its definition", "[regression]") {
  const auto rs = ResidualSet::from_residuals({-1.0, -1.0, 1.0, 1.0});
  const ErrorFamily normal = ErrorFamily::normal();
  const double expected = 1.0 / normal.quantile(0.75);
  REQUIRE(std::fabs(scale_estimate(rs, normal) - expected) < 1e-12);
  REQUIRE(std::fabs(expected - 1.48260) < 1e-5);
}

TEST_CASE("scale estimate rejects spreadless residuals", "[regression]") {
  const auto rs = ResidualSet::from_residuals({2.5, 2.5, 2.5});
  REQUIRE_THROWS_AS(scale_estimate(rs, ErrorFamily::normal()), DegenerateSampleError);
}

TEST_CASE("scale estimate is scale-equivariant", "[regression]") {
  auto rng = replicate_rng(29, 7, 0);
  std::vector<double> base(101);
  for (auto& v : base) v = detail::standard_normal(rng);
  const double s1 = scale_estimate(ResidualSet::from_residuals(base), ErrorFamily::normal());
  for (auto& v : base) v *= -3.5;
  const double s2 = scale_estimate(ResidualSet::from_residuals(base), ErrorFamily::normal());
  REQUIRE(std::fabs(s2 - 3.5 * s1) < 1e-13 * s2);
}

TEST_CASE("scale estimate is root-n consistent at sigma=2", "[regression]") {
  int hits = 0;
  const ErrorFamily normal = ErrorFamily::normal();
  for (std::size_t rep = 0; rep < 200; ++rep) {
    auto rng = replicate_rng(303, 7, rep);
    std::vector<double> e(500);
    for (auto& v : e) v = 2.0 * detail::standard_normal(rng);
    if (std::fabs(scale_estimate(ResidualSet::from_residuals(std::move(e)), normal) -
                  2.0) < 0.25)
      ++hits;
  }
  REQUIRE(hits >= 190);
}

TEST_CASE("pipeline is bit-reproducible for a fixed seed", "[regression]") {
  const ErrorFamily normal = ErrorFamily::normal();
  const Sample a = seeded_model_sample(31, 5, 50);
  const Sample b = seeded_model_sample(31, 5, 50);
  REQUIRE(a.x == b.x);
  REQUIRE(a.y == b.y);
  const ResidualSet ra = compute_residuals(a, 0.1);
  const ResidualSet rb = compute_residuals(b, 0.1);
  REQUIRE(ra.order_statistics == rb.order_statistics);
  REQUIRE(empirical_process_sup(ra, normal) == empirical_process_sup(rb, normal));
}

TEST_CASE("empty and malformed samples are rejected", "[regression]") {
  REQUIRE_THROWS_AS(ResidualSet::from_residuals({}), DomainError);
  Sample bad;
  bad.x = {0.0, 1.0};
  bad.y = {1.0};
  REQUIRE_THROWS_AS(bad.check(), DomainError);
  Sample nan_sample;
  nan_sample.x = {0.0};
  nan_sample.y = {std::nan("")};
  REQUIRE_THROWS_AS(compute_residuals(nan_sample, 0.1), DomainError);
}
