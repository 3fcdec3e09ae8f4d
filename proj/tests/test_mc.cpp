// Tests for the simulation harness: model sampling, null-distribution and
// power experiments, the bridge divergence probe, and tail-growth diagnostics.

#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

using Catch::Approx;

#include "khmgof/errors.hpp"
#include "khmgof/families.hpp"
#include "khmgof/mc.hpp"
#include "khmgof/rng.hpp"

namespace {
using namespace khmgof;

ExperimentConfig small_null_config(std::uint64_t seed) {
  ExperimentConfig config;
  config.n = 50;
  config.reps = 20;
  config.bandwidth = 0.3;
  config.null_family = ErrorFamily::normal();
  config.master_seed = seed;
  return config;
}
}  // namespace

TEST_CASE("seed mixing separates streams and replicates", "[mc]") {
  std::set<std::uint64_t> seen{
      mix_seed(1, 2, 3), mix_seed(1, 2, 4), mix_seed(1, 3, 3),
      mix_seed(2, 2, 3), mix_seed(0, 0, 0)};
  REQUIRE(seen.size() == 5);
  auto a = replicate_rng(7, 1, 0);
  auto b = replicate_rng(7, 1, 0);
  REQUIRE(uniform01(a) == uniform01(b));
  for (int i = 0; i < 10000; ++i) {
    const double u = uniform01(a);
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("model samples are deterministic in seed and replicate", "[mc]") {
  ExperimentConfig config = small_null_config(99);
  const Sample s1 = sample_model(config, 3);
  const Sample s2 = sample_model(config, 3);
  REQUIRE(s1.x == s2.x);
  REQUIRE(s1.y == s2.y);
  const Sample s3 = sample_model(config, 4);
  REQUIRE(s1.y != s3.y);
  for (double x : s1.x) {
    REQUIRE(x > 0.0);
    REQUIRE(x < 2.0);
  }
  REQUIRE_THROWS_AS(sample_model(config, config.reps), DomainError);
}

TEST_CASE("zero-weight mixtures never contaminate", "[mc]") {
  ExperimentConfig config = small_null_config(11);
  config.alternative = Mixture{0.0, ErrorFamily::laplace(1.0)};
  for (std::size_t rep = 0; rep < 5; ++rep)
    REQUIRE(detail::sample_model_counted(config, rep).contaminants == 0);
}

TEST_CASE("contaminant counts are binomial on average", "[mc]") {
  ExperimentConfig config;
  config.n = 200;
  config.reps = 500;
  config.null_family = ErrorFamily::normal();
  config.alternative = Mixture{0.2, ErrorFamily::laplace(std::sqrt(2.0))};
  config.master_seed = 0;
  double total = 0.0;
  for (std::size_t rep = 0; rep < config.reps; ++rep)
    total += static_cast<double>(
        detail::sample_model_counted(config, rep).contaminants);
  const double mean = total / static_cast<double>(config.reps);
  // three sigma around n * weight: sqrt(200 * 0.2 * 0.8 / 500) = 0.253
  REQUIRE(std::abs(mean - 40.0) < 0.759);
}

TEST_CASE("experiment configs validate their fields", "[mc]") {
  ExperimentConfig config = small_null_config(1);
  config.n = 0;
  REQUIRE_THROWS_AS(config.check(), DomainError);
  config = small_null_config(1);
  config.reps = 0;
  REQUIRE_THROWS_AS(config.check(), DomainError);
  config = small_null_config(1);
  config.bandwidth = 0.0;
  REQUIRE_THROWS_AS(config.check(), DomainError);
  config = small_null_config(1);
  config.alternative = Mixture{1.5, ErrorFamily::normal()};
  REQUIRE_THROWS_AS(config.check(), DomainError);
  config = small_null_config(1);
  config.levels = {0.05, 1.0};
  REQUIRE_THROWS_AS(config.check(), DomainError);
}

TEST_CASE("empirical critical values use the upper order statistic", "[mc]") {
  const std::vector<double> sorted{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  REQUIRE(detail::empirical_critical_value(sorted, 0.05) == 10.0);
  REQUIRE(detail::empirical_critical_value(sorted, 0.25) == 8.0);
  const double inf = std::numeric_limits<double>::infinity();
  // degenerate levels: everything rejects at 1, nothing rejects at 0
  REQUIRE(detail::empirical_critical_value(sorted, 1.0) == -inf);
  REQUIRE(detail::empirical_critical_value(sorted, 0.0) == inf);
  REQUIRE_THROWS_AS(detail::empirical_critical_value({}, 0.5), DomainError);
}

TEST_CASE("null experiments sort statistics and reuse their own edf", "[mc]") {
  ExperimentConfig config = small_null_config(505);
  config.reps = 1;
  const NullDistributionResult one = null_distribution_experiment(config);
  REQUIRE(one.sup_v.size() == 1);
  REQUIRE(one.sup_w.size() == 1);
  for (std::size_t k = 0; k < one.levels.size(); ++k) {
    REQUIRE(one.critical_v[k] == one.sup_v[0]);
    REQUIRE(one.critical_w[k] == one.sup_w[0]);
  }
  REQUIRE(one.ks_distance_w_to_limit >= 0.0);
  REQUIRE(one.ks_distance_w_to_limit <= 1.0);

  config.reps = 20;
  const NullDistributionResult a = null_distribution_experiment(config);
  const NullDistributionResult b = null_distribution_experiment(config);
  REQUIRE(a.sup_v == b.sup_v);
  REQUIRE(a.sup_w == b.sup_w);
  REQUIRE(std::is_sorted(a.sup_w.begin(), a.sup_w.end()));
  REQUIRE(a.aborted == 0);

  config.alternative = Mixture{0.2, ErrorFamily::laplace(1.0)};
  REQUIRE_THROWS_AS(null_distribution_experiment(config), DomainError);
}

TEST_CASE("power experiments threshold against the null edf", "[mc]") {
  ExperimentConfig null_config = small_null_config(606);
  null_config.reps = 30;
  const NullDistributionResult null_run =
      null_distribution_experiment(null_config);

  ExperimentConfig alt_config = null_config;
  alt_config.alternative = Mixture{0.5, ErrorFamily::laplace(std::sqrt(2.0))};
  const PowerTable table = power_experiment(alt_config, null_run);
  REQUIRE(table.rows.size() == alt_config.levels.size());
  for (const PowerRow& row : table.rows) {
    REQUIRE(row.bandwidth == alt_config.bandwidth);
    REQUIRE(row.power_v >= 0.0);
    REQUIRE(row.power_v <= 1.0);
    REQUIRE(row.power_w >= 0.0);
    REQUIRE(row.power_w <= 1.0);
    REQUIRE(row.se_v >= 0.0);
    REQUIRE(row.se_w >= 0.0);
  }
  // larger level, smaller threshold, at least as many rejections
  REQUIRE(table.rows[0].level == 0.10);
  REQUIRE(table.rows[1].level == 0.05);
  REQUIRE(table.rows[0].power_w >= table.rows[1].power_w);
  REQUIRE(table.rows[0].power_v >= table.rows[1].power_v);

  // without a mixture there is no alternative to measure
  REQUIRE_THROWS_AS(power_experiment(null_config, null_run), DomainError);

  // critical values estimated at other levels must be rejected
  NullDistributionResult other = null_run;
  other.levels = {0.5};
  other.critical_v = {1.0};
  other.critical_w = {1.0};
  REQUIRE_THROWS_AS(power_experiment(alt_config, other), DomainError);
}

TEST_CASE("experiments abort when too many replicates fail", "[mc]") {
  // Cauchy contamination evaluated under the normal null pushes residuals
  // past the tail floor in most replicates, so the run must refuse.
  ExperimentConfig null_config = small_null_config(707);
  null_config.reps = 30;
  const NullDistributionResult null_run =
      null_distribution_experiment(null_config);
  ExperimentConfig alt_config = null_config;
  alt_config.alternative = Mixture{1.0, ErrorFamily::student_t(1)};
  REQUIRE_THROWS_AS(power_experiment(alt_config, null_run), ExperimentError);
}

TEST_CASE("bridge divergence config rejects coarse grids", "[mc]") {
  BridgeCheckConfig config;
  config.s = 1.0 - 1e-4;
  config.grid = 1000;
  REQUIRE_THROWS_AS(config.check(), DomainError);
  config.grid = 0;
  REQUIRE_THROWS_AS(config.check(), DomainError);
  config = BridgeCheckConfig{};
  config.s = 0.0;
  REQUIRE_THROWS_AS(config.check(), DomainError);
  config.s = 1.0;
  REQUIRE_THROWS_AS(config.check(), DomainError);
  config = BridgeCheckConfig{};
  config.reps = 0;
  REQUIRE_THROWS_AS(config.check(), DomainError);
}

TEST_CASE("bridge ratio quadrature is exact on injected paths", "[mc]") {
  BridgeCheckConfig config;
  config.s = 0.5;
  config.grid = 20000;
  config.reps = 5;
  config.master_seed = 42;

  const BridgeSampler zero = [](std::mt19937_64&,
                                const std::vector<double>& times,
                                std::vector<double>& path) {
    std::fill(path.begin(), path.end(), 0.0);
    (void)times;
  };
  const BridgeCheckResult flat = bridge_divergence_check(config, zero);
  REQUIRE(flat.median_ratio == 0.0);
  REQUIRE(flat.iqr == 0.0);

  // u(t) = t gives integral 1/(1-s) - 1 + 2 log(1-s) + s in closed form
  const BridgeSampler ramp = [](std::mt19937_64&,
                                const std::vector<double>& times,
                                std::vector<double>& path) {
    path = times;
  };
  const double s = config.s;
  const double expected =
      (1.0 / (1.0 - s) - 1.0 + 2.0 * std::log(1.0 - s) + s) /
      -std::log(1.0 - s);
  const BridgeCheckResult line = bridge_divergence_check(config, ramp);
  REQUIRE(line.median_ratio == Approx(expected).margin(1e-6));
  REQUIRE(line.iqr == 0.0);
}

TEST_CASE("bridge profiles snap cuts and stay deterministic", "[mc]") {
  const std::vector<double> cuts{0.3, 0.5};
  const auto p1 = bridge_divergence_profile(cuts, 50000, 20, 1234);
  const auto p2 = bridge_divergence_profile(cuts, 50000, 20, 1234);
  REQUIRE(p1.size() == 2);
  for (std::size_t k = 0; k < p1.size(); ++k) {
    REQUIRE(p1[k].median_ratio == p2[k].median_ratio);
    REQUIRE(p1[k].iqr == p2[k].iqr);
    REQUIRE(p1[k].median_ratio > 0.0);
    REQUIRE(p1[k].s == Approx(cuts[k]).margin(1e-4));
  }

  REQUIRE_THROWS_AS(bridge_divergence_profile({}, 50000, 20, 1), DomainError);
  REQUIRE_THROWS_AS(
      bridge_divergence_profile({0.5, 0.3}, 50000, 20, 1), DomainError);

  // the single-cut check is the tail point of the profile
  BridgeCheckConfig config;
  config.s = 0.5;
  config.grid = 50000;
  config.reps = 20;
  config.master_seed = 1234;
  const BridgeCheckResult check = bridge_divergence_check(config);
  REQUIRE(check.median_ratio == p1[1].median_ratio);
  REQUIRE(check.iqr == p1[1].iqr);
}

TEST_CASE("tail growth stays bounded for the built-in families", "[mc]") {
  const TailGrowthResult logistic =
      tail_growth_diagnostic(ErrorFamily::logistic());
  REQUIRE(logistic.bounded);
  for (const TailGrowthRow& row : logistic.rows)
    REQUIRE(row.scaled_norm == Approx(4.0).margin(1e-6));

  const TailGrowthResult lap = tail_growth_diagnostic(ErrorFamily::laplace(1.0));
  REQUIRE(lap.bounded);
  for (const TailGrowthRow& row : lap.rows)
    REQUIRE(row.scaled_norm == Approx(1.0).margin(1e-12));

  const TailGrowthResult t3 = tail_growth_diagnostic(ErrorFamily::student_t(3));
  REQUIRE(t3.bounded);
  REQUIRE(t3.rows.back().t == 0.9999);
  REQUIRE(std::abs(t3.rows.back().scaled_norm - 8.0 / 3.0) <
          0.05 * (8.0 / 3.0));

  const TailGrowthResult normal = tail_growth_diagnostic(ErrorFamily::normal());
  REQUIRE(normal.bounded);
  for (std::size_t i = 1; i < normal.rows.size(); ++i)
    REQUIRE(normal.rows[i].scaled_norm < normal.rows[i - 1].scaled_norm);
  REQUIRE(normal.rows.back().scaled_norm == Approx(2.100840221).margin(1e-4));
}
