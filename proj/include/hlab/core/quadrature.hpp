#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "hlab/core/error.hpp"

namespace hlab {

/// Gauss–Hermite rule for the standard normal law: sum_i w_i g(x_i) ≈ E g(ξ),
/// ξ ~ N(0,1). Weights sum to one.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::size_t order() const { return nodes.size(); }
};

inline GaussHermiteRule gauss_hermite(std::size_t order) {
  if (order < 1) throw DomainError("gauss_hermite: order must be >= 1");
  const std::size_t n = order;
  std::vector<double> x(n), w(n);
  constexpr double pim4 = 0.7511255444649425;  // pi^{-1/4}
  const std::size_t half = (n + 1) / 2;
  double z = 0.0, pp = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    const double dn = static_cast<double>(n);
    if (i == 0) {
      z = std::sqrt(2.0 * dn + 1.0) - 1.85575 * std::pow(2.0 * dn + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(dn, 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * x[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * x[1];
    } else {
      z = 2.0 * z - x[i - 2];
    }
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        const double dj = static_cast<double>(j);
        p1 = z * std::sqrt(2.0 / dj) * p2 - std::sqrt((dj - 1.0) / dj) * p3;
      }
      pp = std::sqrt(2.0 * dn) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) {
        converged = true;
        break;
      }
    }
    if (!converged) throw NumericalError("gauss_hermite: Newton iteration did not converge");
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = 2.0 / (pp * pp);
    w[n - 1 - i] = w[i];
  }
  GaussHermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
  for (std::size_t i = 0; i < n; ++i) {
    // ascending order
    rule.nodes[i] = std::sqrt(2.0) * x[n - 1 - i];
    rule.weights[i] = w[n - 1 - i] * inv_sqrt_pi;
  }
  return rule;
}

/// Default node budget for tensor quadrature.
inline constexpr std::size_t kTensorNodeBudget = 20'000'000;

/// Visits every node of the tensor product of `rule` over `dim` coordinates.
/// visit(xi, weight) receives standard-normal coordinates.
template <class Visit>
void for_each_tensor_node(const GaussHermiteRule& rule, std::size_t dim, Visit&& visit,
                          std::size_t budget = kTensorNodeBudget) {
  const std::size_t q = rule.order();
  double total = 1.0;
  for (std::size_t d = 0; d < dim; ++d) total *= static_cast<double>(q);
  if (total > static_cast<double>(budget))
    throw CapacityError("tensor quadrature needs " + std::to_string(static_cast<long double>(total)) +
                        " nodes, budget is " + std::to_string(budget));
  std::vector<std::size_t> idx(dim, 0);
  std::vector<double> xi(dim);
  for (;;) {
    double w = 1.0;
    for (std::size_t d = 0; d < dim; ++d) {
      xi[d] = rule.nodes[idx[d]];
      w *= rule.weights[idx[d]];
    }
    visit(std::span<const double>(xi), w);
    std::size_t d = 0;
    while (d < dim && ++idx[d] == q) {
      idx[d] = 0;
      ++d;
    }
    if (d == dim) break;
  }
}

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive Gauss–Kronrod (7/15) on [a, b].
template <class F>
QuadratureResult integrate_adaptive(F&& f, double a, double b, double rel_tol = 1e-10,
                                    unsigned max_depth = 30) {
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, max_depth, rel_tol, &err);
  return {v, err};
}

}  // namespace hlab
