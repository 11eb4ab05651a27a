#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "hlab/core/quadrature.hpp"
#include "hlab/counterexamples/green.hpp"
#include "hlab/counterexamples/killed_ou.hpp"
#include "hlab/counterexamples/newtonian.hpp"

using namespace hlab;
using namespace hlab::cx;

namespace {

double scale_integral(double a, double lo, double hi) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [a](double y) { return std::exp(a * y * y); }, lo, hi, 20, 1e-14);
}

std::shared_ptr<const KilledOUEigensystem> shared_system() {
  static auto sys = std::make_shared<const KilledOUEigensystem>(1.0, 400, 2400);
  return sys;
}

}  // namespace

TEST(Newtonian, Values) {
  std::vector<double> x(3, 0.0), z{1.0, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(newtonian_green(3, x, z), 1.0);
  std::vector<double> x20(20, 0.0), z20(20, 0.0);
  x20[0] = 0.25;
  z20[0] = 1.0;
  EXPECT_NEAR(newtonian_green(20, x20, z20) / std::pow(0.75, -18.0), 1.0, 1e-14);
  EXPECT_THROW(newtonian_green(3, z, z), PoleError);
  EXPECT_THROW(newtonian_green(2, std::vector<double>(2), std::vector<double>{1, 0}), DomainError);
}

TEST(Newtonian, DiscreteHarmonicity) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int draw = 0; draw < 50; ++draw) {
    const int n = 3 + draw % 5;
    std::vector<double> x(n), z(n, 0.0);
    double r2 = 0.0;
    do {
      r2 = 0.0;
      for (auto& v : x) {
        v = U(gen);
        r2 += v * v;
      }
    } while (r2 < 0.25);
    const double scale = newtonian_green(n, x, z) / r2;
    EXPECT_LE(std::abs(newtonian_laplacian_fd(n, x, z, 1e-3)), 1e-4 * scale) << draw;
  }
}

TEST(BrownianRatio, ClosedForm) {
  EXPECT_NEAR(bm_harnack_ratio(3), 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(bm_harnack_ratio(4), 16.0 / 9.0, 1e-15);
  for (int n = 3; n < 64; ++n) {
    EXPECT_GT(bm_harnack_ratio(n + 1), bm_harnack_ratio(n));
    EXPECT_NEAR(bm_harnack_ratio(n + 1) / bm_harnack_ratio(n), 4.0 / 3.0, 4e-16 * 4);
  }
  EXPECT_THROW(bm_harnack_ratio(2), DomainError);
}

TEST(KilledOU, MeshRefinement) {
  const auto s1 = killed_ou_eigensystem(1.0, 3, 2000);
  const auto s2 = killed_ou_eigensystem(1.0, 3, 4000);
  EXPECT_GT(s1.beta(0), 0.0);
  EXPECT_NEAR(s1.beta(0) / s2.beta(0), 1.0, 1e-4);
  EXPECT_LE(s1.beta1_lower(), s1.beta(0));
  EXPECT_GE(s1.beta1_upper(), s1.beta(0));
}

TEST(KilledOU, PureLaplacianLimit) {
  const auto s = killed_ou_eigensystem(1e-6, 3, 2400);
  for (std::size_t i = 0; i < 3; ++i) {
    const double target = 0.5 * std::pow((i + 1) * M_PI / 12.0, 2);
    EXPECT_NEAR(s.beta(i) / target, 1.0, 0.01) << i;
  }
}

TEST(KilledOU, OrthonormalSortedDirichlet) {
  const auto s = killed_ou_eigensystem(1.0, 5, 2400);
  EXPECT_LT(s.orthonormality_defect(5), 1e-6);
  for (std::size_t i = 1; i < 5; ++i) EXPECT_GT(s.beta(i), s.beta(i - 1));
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(s.node_value(i, 0), 0.0);
    EXPECT_EQ(s.node_value(i, s.grid_cells()), 0.0);
    EXPECT_EQ(s.eigenfunction(i, 6.0), 0.0);
  }
  // full-line OU spectrum k·a for the low excited modes
  EXPECT_NEAR(s.beta(1), 1.0, 1e-4);
  EXPECT_NEAR(s.beta(2), 2.0, 1e-4);
}

TEST(KilledOU, GroundStateRateDecreasesWithConfinement) {
  double prev = INFINITY;
  for (double a : {0.5, 1.0, 2.0, 4.0}) {
    const double b = killed_ou_eigensystem(a, 1, 2400).beta(0);
    EXPECT_GT(b, 0.0);
    EXPECT_LT(b, prev);
    prev = b;
  }
}

TEST(KilledOU, Errors) {
  EXPECT_THROW(killed_ou_eigensystem(0.0, 3, 2400), DomainError);
  EXPECT_THROW(killed_ou_eigensystem(1.0, 0, 2400), DomainError);
  EXPECT_THROW(killed_ou_eigensystem(1.0, 3, 100), DomainError);
}

TEST(KilledOU, GroundStateIncrementMatchesSubtraction) {
  // with a small rate the ground state varies visibly and direct subtraction is accurate
  const auto s = killed_ou_eigensystem(0.05, 2, 2400);
  const double direct = s.eigenfunction(0, 1.0) - s.eigenfunction(0, 0.0);
  EXPECT_NEAR(s.ground_state_increment(0.0, 1.0) / direct, 1.0, 1e-4);
}

TEST(KilledDensity, LongTimeDecay) {
  const auto& sys = *shared_system();
  const double c = killed_decay_constant(sys, 0.0, 0.0, 1.0);
  const auto d = killed_density_1d(sys, 5.0, 0.0, 0.0);
  EXPECT_GT(d.value, 0.0);
  EXPECT_LE(d.value, c * std::exp(-sys.beta(0) * 5.0) * (1 + 1e-12));
  EXPECT_TRUE(d.accurate);
}

TEST(KilledDensity, ShortTimeMatchesFree) {
  const double r = killed_to_free_ratio(1.0, 0.01, 0.0, 2400, 400);
  EXPECT_GE(r, 0.99);
  EXPECT_LE(r, 1.0);
}

TEST(KilledDensity, WeightedSymmetry) {
  const auto& sys = *shared_system();
  for (double t : {0.05, 0.5, 3.0})
    for (auto [x, y] : {std::pair{0.3, -1.2}, std::pair{2.5, 0.1}, std::pair{-4.0, 3.3}}) {
      const double lhs = killed_density_1d(sys, t, x, y).value * sys.weight(x);
      const double rhs = killed_density_1d(sys, t, y, x).value * sys.weight(y);
      EXPECT_NEAR(lhs, rhs, 1e-8);
      if (t >= 3.0) EXPECT_NEAR(lhs / rhs, 1.0, 1e-10);
    }
}

TEST(KilledDensity, FlagsTinyTimes) {
  const auto d = killed_density_1d(*shared_system(), 1e-6, 0.0, 0.0);
  EXPECT_FALSE(d.accurate);
  EXPECT_THROW(killed_density_1d(*shared_system(), 0.1, 6.0, 0.0), DomainError);
}

TEST(ProductDensity, Values) {
  ProductDensitySpec s{ou::SpectralModel({1.0}), {0.0}, {0.0}};
  const double expected = std::sqrt(1.0 / (2 * M_PI) * 2.0 / (1.0 - std::exp(-2.0)));
  EXPECT_NEAR(product_density(s, 1.0), expected, 1e-14);
  EXPECT_NEAR(product_density(s, 1.0), 0.606738, 1e-6);
  EXPECT_THROW(product_density(s, 0.0), DomainError);
}

TEST(ProductDensity, Normalised) {
  const auto rule = gauss_hermite(40);
  for (std::size_t n = 1; n <= 3; ++n) {
    const auto model = ou::SpectralModel::power_law(2.0, n);
    ProductDensitySpec s{model, std::vector<double>(n, 0.3), std::vector<double>(n, 0.0)};
    const double t = 0.7;
    const auto law = ou::transition_law(model, t, s.source);
    // ∫ p dz = E[p(z)/φ(z)] under the law itself, so integrate p against dz by change of variables
    double total = 0.0;
    for_each_tensor_node(rule, n, [&](std::span<const double> xi, double w) {
      double jac = 1.0;
      for (std::size_t j = 0; j < n; ++j) {
        s.pole[j] = law.mean[j] + std::sqrt(2.0 * law.variances[j]) * xi[j];
        jac *= std::sqrt(2.0 * law.variances[j]) * std::sqrt(2 * M_PI) * std::exp(0.5 * xi[j] * xi[j]);
      }
      total += w * product_density(s, t) * jac;
    });
    EXPECT_NEAR(total, 1.0, 1e-6) << n;
  }
}

TEST(ProductDensity, ChapmanKolmogorov) {
  const auto rule = gauss_hermite(60);
  for (std::size_t n = 1; n <= 2; ++n) {
    const auto model = ou::SpectralModel::power_law(2.0, n);
    const std::vector<double> x(n, 0.4), z(n, -0.2);
    const double s = 0.3, t = 0.5;
    const auto law = ou::transition_law(model, s, x);
    // E_{w ~ p(s,x,·)} p(t,w,z)
    double total = 0.0;
    ProductDensitySpec second{model, std::vector<double>(n), z};
    for_each_tensor_node(rule, n, [&](std::span<const double> xi, double w) {
      for (std::size_t j = 0; j < n; ++j) second.source[j] = law.mean[j] + std::sqrt(law.variances[j]) * xi[j];
      total += w * product_density(second, t);
    });
    ProductDensitySpec direct{model, x, z};
    EXPECT_NEAR(total / product_density(direct, s + t), 1.0, 1e-8) << n;
  }
}

TEST(ProductDensity, KillingReducesMassAndVanishesAtBoundary) {
  const auto sys = shared_system();
  // the lattice kernel carries an O(h²) relative error, compare the mesh-extrapolated series;
  // the series cancels to about 1e-8 absolute where the free density is negligible
  static const auto fine = std::make_shared<const KilledOUEigensystem>(1.0, 400, 4800);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> U(-5.5, 5.5), T(0.05, 4.0);
  const auto model = ou::SpectralModel::power_law(2.0, 2);
  for (int i = 0; i < 50; ++i) {
    ProductDensitySpec s{model, {U(gen), 0.3}, {U(gen), -0.4}};
    const double t = T(gen);
    const double coarse = killed_product_density(s, MercerKernel(sys, s.source[0], s.pole[0]), t);
    const double refined = killed_product_density(s, MercerKernel(fine, s.source[0], s.pole[0]), t);
    ProductDensitySpec peak{model, s.source, {std::exp(-t) * s.source[0], std::exp(-4.0 * t) * s.source[1]}};
    const double tol = 1e-6 * (product_density(s, t) + product_density(peak, t));
    EXPECT_LE((4.0 * refined - coarse) / 3.0, product_density(s, t) + tol) << i;
  }
  double prev = INFINITY;
  for (double y : {5.0, 5.5, 5.9, 5.99, 5.999, 5.9999}) {
    ProductDensitySpec s{model, {0.0, 0.0}, {y, 0.0}};
    const MercerKernel k(sys, 0.0, y);
    const double v = killed_product_density(s, k, 2.0) / product_density(s, 2.0);
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_LT(prev, 2e-3);
}

TEST(Green, ClosedFormOneDimension) {
  // G(0,4) = (s(6) − s(4)) e^{−16} with scale function s(x) = ∫_0^x e^{y²} dy
  const auto model = ou::SpectralModel::power_law(2.0, 1);
  const auto g = green_function(ProductDensitySpec{model, {0.0}, {4.0}}, shared_system());
  const double expected = scale_integral(1.0, 4.0, 6.0) * std::exp(-16.0);
  EXPECT_NEAR(g.value / expected, 1.0, 1e-4);
  EXPECT_GT(g.tail, 0.0);
}

TEST(Green, SelfConvergence) {
  const auto model = ou::SpectralModel::power_law(2.0, 1);
  const ProductDensitySpec spec{model, {1.0}, {4.0}};
  const auto base = green_function(spec, shared_system());
  GreenOptions doubled;
  doubled.modes = 800;
  doubled.t_max = 2.0 * base.t_max;
  const auto fine = green_function(spec, doubled);
  EXPECT_GT(base.value, 0.0);
  EXPECT_NEAR(fine.value / base.value, 1.0, 1e-3);
}

TEST(Green, PoleEqualsSource) {
  const auto model = ou::SpectralModel::power_law(2.0, 1);
  EXPECT_THROW(green_function(ProductDensitySpec{model, {1.0}, {1.0}}, shared_system()), PoleError);
}

TEST(Green, MonteCarloOracle) {
  // killing level reduced so that the pole is visited often enough to estimate
  const ou::SpectralModel model({1.0, 2.0});
  const ProductDensitySpec spec{model, {0.0, 0.0}, {0.5, 0.3}, 1.5};
  GreenOptions opt;
  opt.modes = 200;
  opt.t_max = 2.0;
  opt.tail = false;
  const double quad = green_function(spec, opt).unscaled();
  GreenMonteCarloConfig cfg{spec};
  cfg.horizon = 2.0;
  cfg.trials = 10000;
  cfg.seed = 17;
  cfg.bandwidths = {0.2, 0.1, 0.05};
  const auto mc = green_monte_carlo(cfg);
  EXPECT_NEAR(mc.extrapolated / quad, 1.0, 0.10);
  // the bandwidth pair halved again stays inside the finer estimate's interval
  GreenMonteCarloConfig finer = cfg;
  finer.bandwidths = {0.1, 0.05};
  const auto mc_fine = green_monte_carlo(finer);
  EXPECT_LE(std::abs(mc.extrapolated - mc_fine.extrapolated), 1.959963984540054 * mc_fine.extrapolated_se);
}

TEST(HarnackRatio, IncreasingInDimension) {
  double prev = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto r = ou_harnack_ratio(2.0, n);
    EXPECT_GT(r.excess, prev) << n;
    EXPECT_GT(r.ratio, 1.0);
    EXPECT_LT(r.error, 1e-3 * r.excess);
    prev = r.excess;
  }
}

TEST(HarnackRatio, OneDimensionClosedForm) {
  const auto r = ou_harnack_ratio(2.0, 1);
  const double expected = scale_integral(1.0, 0.0, 1.0) / scale_integral(1.0, 0.0, 6.0);
  EXPECT_NEAR(r.excess / expected, 1.0, 1e-4);
}

TEST(Envelopes, Epsilon) {
  const double eps = epsilon_scan();
  EXPECT_GT(eps, 0.0);
  EXPECT_NEAR(eps, epsilon_gap(std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(epsilon_gap(8.0 / 17.0), 0.0, 1e-12);
  EXPECT_GT(epsilon_gap(0.25), epsilon_gap(0.2));
}

TEST(Envelopes, RatioGrowth) {
  const double eps = epsilon_scan();
  for (std::size_t n = 2; n < 10; ++n)
    EXPECT_GT(envelope_bounds(2.0, n + 1, eps).log_ratio, envelope_bounds(2.0, n, eps).log_ratio);
  EXPECT_GT(envelope_bounds(2.0, 4, eps).ratio(), 1e3);
  const auto e = envelope_bounds(2.0, 3, eps);
  EXPECT_NEAR(e.log_lower - e.log_upper, e.log_ratio, 1e-12);
}

TEST(Envelopes, FittedConstantsGrow) {
  const double eps = epsilon_scan();
  std::vector<std::size_t> ns{1, 2, 3, 4};
  std::vector<double> logs;
  for (auto n : ns) logs.push_back(ou_harnack_ratio(2.0, n).log_ratio);
  const auto fit = fit_envelope_constants(2.0, eps, ns, logs);
  for (std::size_t i = 0; i < ns.size(); ++i) EXPECT_LE(fit.log_ratio(ns[i]), logs[i] + 1e-12);
  std::size_t n = 4;
  while (fit.log_ratio(n + 1) <= fit.log_ratio(n) && n < 50) ++n;
  for (std::size_t m = n; m < n + 20; ++m) EXPECT_GT(fit.log_ratio(m + 1), fit.log_ratio(m));
  EXPECT_GT(fit.log_ratio(n + 20), std::log(1e3));
}
