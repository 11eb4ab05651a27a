#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hlab/core/error.hpp"
#include "hlab/core/quadrature.hpp"

namespace hlab::ou {

using Vector = std::vector<double>;
using ScalarFunction = std::function<double(std::span<const double>)>;

/// Diagonal drift operator A = diag(a_1, ..., a_N) with Q = I.
class SpectralModel {
 public:
  explicit SpectralModel(Vector eigenvalues, std::optional<double> exponent = std::nullopt)
      : a_(std::move(eigenvalues)), exponent_(exponent) {
    if (a_.empty()) throw DomainError("SpectralModel: empty spectrum");
    for (std::size_t i = 0; i < a_.size(); ++i) {
      if (!(a_[i] > 0.0) || !std::isfinite(a_[i])) throw DomainError("SpectralModel: eigenvalues must be positive");
      if (i > 0 && a_[i] < a_[i - 1]) throw DomainError("SpectralModel: eigenvalues must be nondecreasing");
    }
  }

  /// a_n = n^p, n = 1..N.
  static SpectralModel power_law(double p, std::size_t n) {
    if (n == 0) throw DomainError("SpectralModel: truncation must be positive");
    if (!(p > 0.0)) throw DomainError("SpectralModel: exponent must be positive");
    Vector a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = std::pow(static_cast<double>(i + 1), p);
    return SpectralModel(std::move(a), p);
  }

  std::size_t size() const { return a_.size(); }
  double eigenvalue(std::size_t i) const {
    if (i >= a_.size()) throw IndexError("SpectralModel: coordinate out of range");
    return a_[i];
  }
  const Vector& eigenvalues() const { return a_; }
  std::optional<double> exponent() const { return exponent_; }

  /// First n coordinates.
  SpectralModel truncated(std::size_t n) const {
    if (n == 0 || n > a_.size()) throw DomainError("SpectralModel: bad truncation");
    return SpectralModel(Vector(a_.begin(), a_.begin() + static_cast<std::ptrdiff_t>(n)), exponent_);
  }

  /// ½ Σ_{n≤N} 1/a_n.
  double half_trace_inverse() const {
    double s = 0.0;
    for (auto it = a_.rbegin(); it != a_.rend(); ++it) s += 1.0 / *it;
    return 0.5 * s;
  }

 private:
  Vector a_;
  std::optional<double> exponent_;
};

/// Law N(mean, diag(variances)).
struct GaussianKernelSpec {
  Vector mean;
  Vector variances;
};

namespace detail {
inline void check_time(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("time must be positive and finite");
}
inline Vector padded(std::span<const double> v, std::size_t n, const char* what) {
  if (v.size() > n) throw DomainError(std::string(what) + ": dimension exceeds truncation");
  Vector out(n, 0.0);
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}
}  // namespace detail

/// (1 − e^{−2at})/(2a).
inline double qt_eigenvalue(double a, double t) {
  if (!(a > 0.0)) throw DomainError("qt_eigenvalue: a must be positive");
  detail::check_time(t);
  return -std::expm1(-2.0 * a * t) / (2.0 * a);
}

inline double trace_qt(const SpectralModel& model, double t) {
  detail::check_time(t);
  double s = 0.0;
  const auto& a = model.eigenvalues();
  for (auto it = a.rbegin(); it != a.rend(); ++it) s += qt_eigenvalue(*it, t);
  return s;
}

/// Per-coordinate factor of Λ_t = Q_t^{-1/2} e^{-tA}, i.e. √(2a/(e^{2at} − 1)).
inline double lambda_factor(double a, double t) {
  if (!(a > 0.0)) throw DomainError("lambda_factor: a must be positive");
  detail::check_time(t);
  const double x = 2.0 * a * t;
  if (x < 700.0) return std::sqrt(2.0 * a / std::expm1(x));
  return std::sqrt(2.0 * a) * std::exp(-a * t);
}

inline Vector lambda_t_apply(const SpectralModel& model, double t, std::span<const double> u) {
  detail::check_time(t);
  if (u.size() > model.size()) throw DomainError("lambda_t_apply: dimension exceeds truncation");
  Vector out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = lambda_factor(model.eigenvalue(i), t) * u[i];
  return out;
}

inline double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline GaussianKernelSpec transition_law(const SpectralModel& model, double t, std::span<const double> x) {
  detail::check_time(t);
  const Vector xp = detail::padded(x, model.size(), "transition_law");
  GaussianKernelSpec k;
  k.mean.resize(model.size());
  k.variances.resize(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    const double a = model.eigenvalue(i);
    k.mean[i] = std::exp(-a * t) * xp[i];
    k.variances[i] = qt_eigenvalue(a, t);
  }
  return k;
}

/// dN_{e^{-tA}x, Q_t}/dN_{0, Q_t} evaluated at z.
inline double cameron_martin_density(const SpectralModel& model, double t, std::span<const double> x,
                                     std::span<const double> z) {
  detail::check_time(t);
  if (x.size() != z.size() || x.size() > model.size())
    throw DomainError("cameron_martin_density: dimension mismatch");
  double inner = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = model.eigenvalue(i);
    const double lx = lambda_factor(a, t) * x[i];
    inner += lx * z[i] / std::sqrt(qt_eigenvalue(a, t));
    sq += lx * lx;
  }
  return std::exp(inner - 0.5 * sq);
}

inline ScalarFunction constant_function(double c) {
  return [c](std::span<const double>) { return c; };
}

/// P_t f(x) = ∫ f(z + e^{-tA}x) N_{0,Q_t}(dz) by tensor Gauss–Hermite quadrature over all retained
/// coordinates.
inline double mehler_apply(const SpectralModel& model, const ScalarFunction& f, double t,
                           std::span<const double> x, int quadrature_order,
                           std::size_t budget = kTensorNodeBudget) {
  if (quadrature_order < 1) throw DomainError("mehler_apply: quadrature order must be >= 1");
  const auto law = transition_law(model, t, x);
  const auto rule = gauss_hermite(static_cast<std::size_t>(quadrature_order));
  const std::size_t n = model.size();
  Vector sd(n);
  for (std::size_t i = 0; i < n; ++i) sd[i] = std::sqrt(law.variances[i]);
  Vector point(n);
  double acc = 0.0;
  for_each_tensor_node(
      rule, n,
      [&](std::span<const double> xi, double w) {
        for (std::size_t i = 0; i < n; ++i) point[i] = law.mean[i] + sd[i] * xi[i];
        acc += w * f(point);
      },
      budget);
  return acc;
}

/// Same quantity as mehler_apply computed through the density: ∫ J_t(x,z) f(z) N_{0,Q_t}(dz).
inline double mehler_apply_density(const SpectralModel& model, const ScalarFunction& f, double t,
                                   std::span<const double> x, int quadrature_order,
                                   std::size_t budget = kTensorNodeBudget) {
  if (quadrature_order < 1) throw DomainError("mehler_apply_density: quadrature order must be >= 1");
  detail::check_time(t);
  const std::size_t n = model.size();
  const Vector xp = detail::padded(x, n, "mehler_apply_density");
  const auto rule = gauss_hermite(static_cast<std::size_t>(quadrature_order));
  Vector sd(n);
  for (std::size_t i = 0; i < n; ++i) sd[i] = std::sqrt(qt_eigenvalue(model.eigenvalue(i), t));
  Vector z(n);
  double acc = 0.0;
  for_each_tensor_node(
      rule, n,
      [&](std::span<const double> xi, double w) {
        for (std::size_t i = 0; i < n; ++i) z[i] = sd[i] * xi[i];
        acc += w * cameron_martin_density(model, t, xp, z) * f(z);
      },
      budget);
  return acc;
}

struct GradientBound {
  double lhs = 0.0;             // D_u P_t f(x)
  double rhs = 0.0;             // √(P_t f²(x)) · |Λ_t u|
  double slack = 0.0;           // rhs − |lhs|
  double quadrature_error = 0.0;  // change against a coarser rule
};

namespace detail {
struct GradientSums {
  double derivative = 0.0;
  double second_moment = 0.0;
};

inline GradientSums gradient_sums(const SpectralModel& model, const ScalarFunction& f, double t,
                                  const Vector& x, const Vector& lu, std::size_t order, std::size_t budget) {
  const std::size_t n = model.size();
  const auto rule = gauss_hermite(order);
  Vector mean(n), sd(n), point(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = model.eigenvalue(i);
    mean[i] = std::exp(-a * t) * x[i];
    sd[i] = std::sqrt(qt_eigenvalue(a, t));
  }
  GradientSums s;
  for_each_tensor_node(
      rule, n,
      [&](std::span<const double> xi, double w) {
        double score = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          point[i] = mean[i] + sd[i] * xi[i];
          score += lu[i] * xi[i];
        }
        const double v = f(point);
        s.derivative += w * score * v;
        s.second_moment += w * v * v;
      },
      budget);
  return s;
}
}  // namespace detail

/// Directional derivative of P_t f at x along the unit vector u, from the score representation
/// D_u P_t f(x) = E[⟨Λ_t u, Q_t^{-1/2} Z⟩ f(Z + e^{-tA}x)], against the Cauchy–Schwarz bound.
inline GradientBound gradient_bound_check(const SpectralModel& model, const ScalarFunction& f, double t,
                                          std::span<const double> x, std::span<const double> u,
                                          int quadrature_order, std::size_t budget = kTensorNodeBudget) {
  if (quadrature_order < 2) throw DomainError("gradient_bound_check: quadrature order must be >= 2");
  detail::check_time(t);
  const std::size_t n = model.size();
  const Vector xp = detail::padded(x, n, "gradient_bound_check");
  const Vector up = detail::padded(u, n, "gradient_bound_check");
  if (std::abs(norm(up) - 1.0) > 1e-9) throw DomainError("gradient_bound_check: u must be a unit vector");
  const Vector lu = lambda_t_apply(model, t, up);
  const auto fine = detail::gradient_sums(model, f, t, xp, lu, static_cast<std::size_t>(quadrature_order), budget);
  GradientBound r;
  r.lhs = fine.derivative;
  r.rhs = std::sqrt(std::max(0.0, fine.second_moment)) * norm(lu);
  r.slack = r.rhs - std::abs(r.lhs);
  if (quadrature_order >= 4) {
    const auto coarse = detail::gradient_sums(model, f, t, xp, lu,
                                              static_cast<std::size_t>(quadrature_order - quadrature_order / 4), budget);
    r.quadrature_error = std::abs(coarse.derivative - fine.derivative);
  }
  return r;
}

/// |P_t f(x) − P_t f(y)| / (‖f‖₀ |x − y|); the Lipschitz constant c(t) is reported, not asserted.
inline double empirical_lipschitz_ratio(const SpectralModel& model, const ScalarFunction& f, double sup_norm,
                                        double t, std::span<const double> x, std::span<const double> y,
                                        int quadrature_order) {
  if (!(sup_norm > 0.0)) throw DomainError("empirical_lipschitz_ratio: sup norm must be positive");
  const std::size_t n = model.size();
  const Vector xp = detail::padded(x, n, "empirical_lipschitz_ratio");
  const Vector yp = detail::padded(y, n, "empirical_lipschitz_ratio");
  Vector d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = xp[i] - yp[i];
  const double dist = norm(d);
  if (dist == 0.0) throw DomainError("empirical_lipschitz_ratio: x equals y");
  const double px = mehler_apply(model, f, t, xp, quadrature_order);
  const double py = mehler_apply(model, f, t, yp, quadrature_order);
  return std::abs(px - py) / (sup_norm * dist);
}

/// Default per-coordinate quadrature order for an N-coordinate tensor rule.
inline int default_quadrature_order(std::size_t n) {
  if (n <= 3) return 40;
  if (n <= 6) return 12;
  return 4;
}

}  // namespace hlab::ou
