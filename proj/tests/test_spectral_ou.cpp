#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hlab/ou/spectral_ou.hpp"

using namespace hlab;
using namespace hlab::ou;

TEST(QtEigenvalue, Values) {
  EXPECT_NEAR(qt_eigenvalue(1.0, 1e-12) / 1e-12, 1.0, 1e-6);
  EXPECT_NEAR(qt_eigenvalue(1.0, 1.0), (1.0 - std::exp(-2.0)) / 2.0, 1e-15);
  EXPECT_NEAR(qt_eigenvalue(1.0, 1.0), 0.43233236, 1e-8);
  EXPECT_NEAR(qt_eigenvalue(1e6, 1.0) / 5e-7, 1.0, 1e-9);
  EXPECT_THROW(qt_eigenvalue(0.0, 1.0), DomainError);
  EXPECT_THROW(qt_eigenvalue(1.0, -1.0), DomainError);
}

TEST(TraceQt, BoundAndLimits) {
  const auto m = SpectralModel::power_law(4.0, 100);
  const double zeta4 = std::pow(M_PI, 4) / 90.0;
  EXPECT_LE(trace_qt(m, 1.0), m.half_trace_inverse());
  EXPECT_LE(m.half_trace_inverse(), zeta4 / 2.0);
  EXPECT_NEAR(trace_qt(m, 1e6), m.half_trace_inverse(), 1e-14);
  const SpectralModel one({1.0});
  EXPECT_NEAR(trace_qt(one, 1.0), 0.43233236, 1e-8);
  EXPECT_THROW(trace_qt(one, 0.0), DomainError);
}

TEST(TraceQt, NondecreasingInTime) {
  const auto m = SpectralModel::power_law(2.0, 50);
  double prev = 0.0;
  for (double t = 1e-3; t < 20; t *= 1.5) {
    const double v = trace_qt(m, t);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(SpectralModelTest, Invariants) {
  EXPECT_THROW(SpectralModel({2.0, 1.0}), DomainError);
  EXPECT_THROW(SpectralModel({0.0}), DomainError);
  EXPECT_THROW(SpectralModel(Vector{}), DomainError);
}

TEST(LambdaT, Values) {
  const SpectralModel m({1.0});
  const Vector u{1.0};
  const auto v = lambda_t_apply(m, 1.0, u);
  EXPECT_NEAR(v[0], std::sqrt(2.0 / (std::exp(2.0) - 1.0)), 1e-15);
  EXPECT_NEAR(v[0], 0.5594955, 1e-7);
  const auto zero = lambda_t_apply(m, 1.0, Vector{0.0});
  EXPECT_EQ(zero[0], 0.0);
  EXPECT_THROW(lambda_t_apply(m, 0.0, u), DomainError);
}

TEST(LambdaT, NormBoundSweep) {
  for (double a = 1e-3; a <= 1e3 * 1.0001; a *= std::pow(10.0, 0.25))
    for (double t = 1e-3; t <= 10.0001; t *= std::pow(10.0, 0.25))
      EXPECT_LE(lambda_factor(a, t), 1.0 / std::sqrt(t)) << a << " " << t;
}

TEST(LambdaT, DecreasingInTime) {
  for (double a : {0.1, 1.0, 10.0}) {
    double prev = INFINITY;
    for (double t = 0.01; t < 10; t *= 1.3) {
      const double f = lambda_factor(a, t);
      EXPECT_LT(f, prev);
      prev = f;
    }
    const double t = 30.0 / a;
    EXPECT_NEAR(lambda_factor(a, t) / (std::sqrt(2 * a) * std::exp(-a * t)), 1.0, 1e-12);
  }
}

TEST(CameronMartin, Identities) {
  const SpectralModel m({1.0, 2.0, 5.0});
  const Vector x{0.3, -0.7, 0.2}, z{0.1, 0.4, -0.9}, mz{-0.1, -0.4, 0.9}, zero{0, 0, 0};
  EXPECT_DOUBLE_EQ(cameron_martin_density(m, 0.5, zero, z), 1.0);
  const auto lx = lambda_t_apply(m, 0.5, x);
  const double n2 = lx[0] * lx[0] + lx[1] * lx[1] + lx[2] * lx[2];
  EXPECT_NEAR(cameron_martin_density(m, 0.5, x, z) * cameron_martin_density(m, 0.5, x, mz) * std::exp(n2), 1.0,
              1e-13);
  EXPECT_THROW(cameron_martin_density(m, 0.5, x, Vector{1.0}), DomainError);
}

TEST(CameronMartin, IntegratesToOne) {
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto m = SpectralModel::power_law(2.0, n);
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = 0.5 - 0.3 * static_cast<double>(i);
    const double v = mehler_apply_density(m, constant_function(1.0), 0.7, x, n <= 3 ? 40 : 12);
    EXPECT_NEAR(v, 1.0, 1e-8) << n;
  }
}

TEST(Mehler, Moments) {
  const SpectralModel m({1.0});
  EXPECT_NEAR(mehler_apply(m, constant_function(1.0), 1.0, Vector{1.0}, 10), 1.0, 1e-14);
  auto first = [](std::span<const double> z) { return z[0]; };
  auto second = [](std::span<const double> z) { return z[0] * z[0]; };
  EXPECT_NEAR(mehler_apply(m, first, 1.0, Vector{1.0}, 10), std::exp(-1.0), 1e-14);
  EXPECT_NEAR(mehler_apply(m, second, 1.0, Vector{0.0}, 10), 0.43233236, 1e-8);
  EXPECT_THROW(mehler_apply(m, first, 1.0, Vector{1.0}, 0), DomainError);
  const auto big = SpectralModel::power_law(2.0, 20);
  EXPECT_THROW(mehler_apply(big, first, 1.0, Vector{}, 12), CapacityError);
}

TEST(Mehler, SemigroupProperty) {
  const auto m = SpectralModel::power_law(2.0, 3);
  auto f = [](std::span<const double> z) { return z[0] * z[0] * z[1] + 0.5 * z[2] * z[2] * z[2] - z[0] * z[1] * z[2] + 1.0; };
  const Vector x{0.4, -0.3, 0.8};
  const double s = 0.3, t = 0.5;
  ScalarFunction inner = [&](std::span<const double> y) { return mehler_apply(m, f, s, y, 6); };
  const double nested = mehler_apply(m, inner, t, x, 6);
  const double direct = mehler_apply(m, f, s + t, x, 6);
  EXPECT_NEAR(nested, direct, 1e-6);
}

TEST(Mehler, DensityRouteAgrees) {
  const auto m = SpectralModel::power_law(2.0, 3);
  auto f = [](std::span<const double> z) { return std::cos(z[0]) + z[1] * z[2] + std::tanh(z[2]); };
  const Vector x{0.4, -0.3, 0.8};
  EXPECT_NEAR(mehler_apply(m, f, 0.8, x, 40), mehler_apply_density(m, f, 0.8, x, 40), 1e-6);
}

TEST(Mehler, Contraction) {
  const auto m = SpectralModel::power_law(2.0, 2);
  auto f = [](std::span<const double> z) { return std::sin(3 * z[0]) * std::cos(z[1]); };
  for (double x0 : {-1.0, 0.0, 2.0}) EXPECT_LE(std::abs(mehler_apply(m, f, 0.2, Vector{x0, 0.5}, 30)), 1.0);
}

TEST(GradientBound, Constant) {
  const SpectralModel m({1.0});
  const auto r = gradient_bound_check(m, constant_function(1.0), 1.0, Vector{0.0}, Vector{1.0}, 20);
  EXPECT_NEAR(r.lhs, 0.0, 1e-14);
  EXPECT_GE(r.slack, 0.0);
}

TEST(GradientBound, LinearIsEqualityCase) {
  const SpectralModel m({1.0});
  auto f = [](std::span<const double> z) { return z[0]; };
  const auto r = gradient_bound_check(m, f, 1.0, Vector{0.0}, Vector{1.0}, 20);
  EXPECT_NEAR(r.lhs, std::exp(-1.0), 1e-13);
  EXPECT_NEAR(r.rhs, std::sqrt(qt_eigenvalue(1.0, 1.0)) * std::sqrt(2.0 / std::expm1(2.0)), 1e-14);
  EXPECT_NEAR(r.slack, 0.0, 1e-12);
}

TEST(GradientBound, MatchesFiniteDifference) {
  const auto m = SpectralModel::power_law(2.0, 2);
  auto f = [](std::span<const double> z) { return std::tanh(z[0] + 0.5 * z[1] * z[1]); };
  const Vector x{0.2, -0.4}, u{0.6, 0.8};
  const double t = 0.4, h = 1e-4;
  const auto r = gradient_bound_check(m, f, t, x, u, 40);
  const double fp = mehler_apply(m, f, t, Vector{x[0] + h * u[0], x[1] + h * u[1]}, 40);
  const double fm = mehler_apply(m, f, t, Vector{x[0] - h * u[0], x[1] - h * u[1]}, 40);
  EXPECT_NEAR(r.lhs, (fp - fm) / (2 * h), 1e-6);
}

TEST(GradientBound, RandomClippedPolynomials) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t n = 1 + draw % 3;
    const auto m = SpectralModel::power_law(1.5 + U(gen), n);
    std::vector<double> c(4 * n);
    for (auto& ci : c) ci = U(gen) * 2.0;
    ScalarFunction f = [c, n](std::span<const double> z) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += c[4 * i] + c[4 * i + 1] * z[i] + c[4 * i + 2] * z[i] * z[i] + c[4 * i + 3] * z[i] * z[i] * z[i];
      return std::clamp(s, -1.0, 1.0);
    };
    Vector x(n), u(n);
    for (auto& v : x) v = U(gen);
    for (auto& v : u) v = U(gen);
    const double un = norm(u);
    for (auto& v : u) v /= un;
    const double t = std::pow(10.0, U(gen));
    const auto r = gradient_bound_check(m, f, t, x, u, n <= 2 ? 40 : 16);
    EXPECT_GE(r.slack, -1e-6) << draw;
  }
}

TEST(Lipschitz, EmpiricalRatioFinite) {
  const auto m = SpectralModel::power_law(2.0, 2);
  auto f = [](std::span<const double> z) { return std::sin(z[0] + z[1]); };
  const double r = empirical_lipschitz_ratio(m, f, 1.0, 0.5, Vector{0.0, 0.0}, Vector{0.1, 0.0}, 30);
  EXPECT_GT(r, 0.0);
  EXPECT_LE(r, 1.0 / std::sqrt(0.5));
}
