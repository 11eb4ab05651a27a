#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hlab/coupling/coupling.hpp"

using namespace hlab;
using namespace hlab::coupling;

namespace {

// Plain Euler scheme for dZ = −aZ dt + √2 dB with a Brownian-bridge hit test,
// kept separate from the library stepper.
double euler_first_passage_frequency(double a, double z0, double horizon, double dt, std::size_t trials,
                                     std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> N;
  std::uniform_real_distribution<double> U;
  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    double z = z0;
    for (std::size_t k = 0; k < steps; ++k) {
      const double z1 = z - a * z * dt + std::sqrt(2.0 * dt) * N(gen);
      if (z1 <= 0.0 || U(gen) < std::exp(-z * z1 / dt)) {
        ++hits;
        break;
      }
      z = z1;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

}  // namespace

TEST(CoordinatePair, IdenticalStarts) {
  Engine rng(3);
  const auto r = simulate_coordinate_pair(1.0, 0.2, 0.2, 1e-3, 1.0, rng);
  ASSERT_TRUE(r.T);
  EXPECT_EQ(*r.T, 0.0);
}

TEST(CoordinatePair, MergedPathsAreIdentical) {
  Engine rng(4);
  int merged = 0;
  for (int i = 0; i < 50; ++i) {
    const auto r = simulate_coordinate_pair(1.0, 0.5, -0.5, 1e-3, 2.0, rng, true);
    ASSERT_EQ(r.x_path.size(), r.times.size());
    if (!r.T) continue;
    ++merged;
    for (std::size_t k = 0; k < r.times.size(); ++k)
      if (r.times[k] >= *r.T) EXPECT_EQ(r.x_path[k], r.y_path[k]);
  }
  EXPECT_GT(merged, 30);
}

TEST(CoordinatePair, MatchesDifferenceProcessOracle) {
  // horizon 5 as in the reference configuration, and a short horizon where the law is far from 0 or 1
  for (double horizon : {5.0, 0.3}) {
    const std::size_t trials = 10000;
    Engine rng(horizon > 1 ? 21 : 22);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < trials; ++i)
      if (simulate_coordinate_pair(1.0, 0.5, -0.5, 1e-4, horizon, rng).T) ++hits;
    const auto ci = wilson_interval(hits, trials);
    const double p = static_cast<double>(hits) / trials;
    const double exact = difference_first_passage_probability(1.0, 1.0, horizon);
    EXPECT_LE(std::abs(p - exact), 2.0 * ci.width()) << horizon;
    const double euler = euler_first_passage_frequency(1.0, 1.0, horizon, 1e-4, horizon > 1 ? 2000 : trials, 5);
    EXPECT_LE(std::abs(p - euler), 2.0 * ci.width() + 0.01) << horizon;
  }
}

TEST(CoordinatePair, QuadraticVariationOfDifference) {
  Engine rng(8);
  double qv = 0.0, elapsed = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto r = simulate_coordinate_pair(1.0, 0.5, -0.5, 1e-4, 1.0, rng, true);
    for (std::size_t k = 1; k < r.times.size(); ++k) {
      if (r.T && r.times[k] > *r.T) break;
      const double dz = (r.x_path[k] - r.y_path[k]) - (r.x_path[k - 1] - r.y_path[k - 1]);
      qv += dz * dz;
      elapsed += r.times[k] - r.times[k - 1];
    }
  }
  EXPECT_NEAR(qv / (2.0 * elapsed), 1.0, 0.05);
}

TEST(FirstPassage, Limits) {
  EXPECT_NEAR(difference_first_passage_probability(1.0, 1.0, 50.0), 1.0, 1e-10);
  EXPECT_LT(difference_first_passage_probability(1.0, 1.0, 1e-3), 1e-100);
  // small a reduces to √2 Brownian motion: erfc(z/(2√t))
  EXPECT_NEAR(difference_first_passage_probability(1e-9, 1.0, 0.5), std::erfc(1.0 / (2.0 * std::sqrt(0.5))), 1e-8);
}

TEST(Coupling, IdenticalStartsCoupleAtZero) {
  CouplingConfig cfg;
  cfg.y0 = cfg.x0;
  const auto o = simulate_coupling(cfg);
  EXPECT_TRUE(o.coupled);
  EXPECT_EQ(*o.T_C, 0.0);
  EXPECT_TRUE(o.success());
  const auto est = estimate_coupling_probability(cfg, 100);
  EXPECT_EQ(est.estimate, 1.0);
}

TEST(Coupling, OutcomeInvariants) {
  CouplingConfig cfg;
  cfg.dt = 1e-3;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto o = simulate_coupling(cfg, i);
    if (!o.coupled) continue;
    double tc = 0.0;
    for (const auto& tj : o.per_coordinate_T) {
      ASSERT_TRUE(tj);
      tc = std::max(tc, *tj);
    }
    EXPECT_EQ(*o.T_C, tc);
  }
}

TEST(Coupling, Deterministic) {
  CouplingConfig cfg;
  cfg.dt = 1e-3;
  const auto a = simulate_coupling(cfg, 12), b = simulate_coupling(cfg, 12);
  EXPECT_EQ(a.T_C, b.T_C);
  EXPECT_EQ(a.per_coordinate_T, b.per_coordinate_T);
  cfg.threads = 3;
  const auto e1 = estimate_coupling_probability(cfg, 300);
  cfg.threads = 1;
  const auto e2 = estimate_coupling_probability(cfg, 300);
  EXPECT_EQ(e1.successes, e2.successes);
  EXPECT_EQ(e1.per_coordinate[0].median_T, e2.per_coordinate[0].median_T);
}

TEST(Coupling, ConfigValidation) {
  CouplingConfig cfg;
  cfg.x0 = {1.0, 0, 0, 0, 0};
  EXPECT_THROW(simulate_coupling(cfg), DomainError);
  cfg = {};
  cfg.x0 = {0.5};
  EXPECT_THROW(simulate_coupling(cfg), DomainError);
  cfg = {};
  cfg.dt = 0.0;
  EXPECT_THROW(simulate_coupling(cfg), DomainError);
  cfg = {};
  EXPECT_THROW(estimate_coupling_probability(cfg, 50), DomainError);
}

TEST(Coupling, FewerCoordinatesCoupleMoreOften) {
  CouplingConfig one, three;
  one.model = SpectralModel::power_law(6.0, 1);
  one.x0 = {0.5};
  one.y0 = {-0.5};
  three.model = SpectralModel::power_law(6.0, 3);
  three.x0 = {0.5, 0.3, -0.2};
  three.y0 = {-0.5, -0.3, 0.2};
  one.dt = three.dt = 1e-3;
  const auto e1 = estimate_coupling_probability(one, 2000);
  const auto e3 = estimate_coupling_probability(three, 2000);
  EXPECT_GE(e1.estimate + e1.ci.width(), e3.estimate);
}

TEST(Coupling, HighCoordinatesCoupleFaster) {
  CouplingConfig cfg;
  cfg.x0.assign(5, 0.4);
  cfg.y0.assign(5, -0.4);
  cfg.dt = 1e-5;
  cfg.t_horizon = 0.2;
  const auto est = estimate_coupling_probability(cfg, 400);
  for (std::size_t j = 1; j < 5; ++j)
    EXPECT_LT(est.per_coordinate[j].median_T, est.per_coordinate[j - 1].median_T) << j;
}

TEST(Coupling, MarginalsMatchClosedForm) {
  CouplingConfig cfg;
  cfg.dt = 1e-3;
  cfg.x0 = {0.5, 0.2, 0, 0, 0};
  cfg.y0 = {-0.5, 0.1, 0, 0, 0};
  const double t = cfg.t_horizon / 2.0;
  const auto m = coupling_marginals(cfg, t, 4000);
  for (std::size_t j = 0; j < m.size(); ++j) {
    EXPECT_LE(std::abs(m[j].mean_x - m[j].exact_mean_x), 3.0 * m[j].se_mean_x) << j;
    EXPECT_LE(std::abs(m[j].mean_y - m[j].exact_mean_y), 3.0 * m[j].se_mean_y) << j;
    EXPECT_LE(std::abs(m[j].var_x - m[j].exact_var), 3.0 * m[j].se_var_x) << j;
    EXPECT_LE(std::abs(m[j].var_y - m[j].exact_var), 3.0 * m[j].se_var_y) << j;
  }
}

TEST(ExitBound, NormalisationAndSummability) {
  const auto model = SpectralModel::power_law(6.0, 10);
  ExitBoundOptions opt;
  opt.trials = 2000;
  opt.simulated_coordinates = 3;
  const auto tab = exit_time_bound(model, 0.05, 2.0, 1.0, 0.5, 0.0, opt);
  EXPECT_NEAR(tab.C, std::sqrt(6.0) / M_PI, 1e-14);
  EXPECT_NEAR(tab.normalisation, 1.0, 1e-10);
  EXPECT_LT(tab.tail_ratio(), 1e-3);
  EXPECT_GT(tab.c_fit, 0.0);
}

TEST(ExitBound, EmpiricalBelowBound) {
  const auto model = SpectralModel::power_law(6.0, 10);
  const auto tab = exit_time_bound(model, 0.05, 2.0, 1.0, 0.5, 0.0);
  ASSERT_EQ(tab.rows.size(), 10u);
  for (const auto& row : tab.rows) EXPECT_LE(*row.empirical, row.bound) << row.n;
}

TEST(ExitBound, RejectsBadDelta) {
  const auto model = SpectralModel::power_law(6.0, 10);
  EXPECT_THROW(exit_time_bound(model, 0.05, 2.0, 1.0, 1.5, 0.0), DomainError);
  EXPECT_THROW(exit_time_bound(model, 0.05, 2.0, 1.0, 0.0, 0.0), DomainError);
  EXPECT_THROW(exit_time_bound(model, 0.05, 1.0, 2.0, 0.5, 0.0), DomainError);
  EXPECT_THROW(exit_time_bound(SpectralModel({1.0, 2.0}), 0.05, 2.0, 1.0, 0.5, 0.0), DomainError);
}
