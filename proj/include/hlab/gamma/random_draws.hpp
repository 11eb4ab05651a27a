#pragma once

#include <random>
#include <vector>

#include "hlab/gamma/expr.hpp"
#include "hlab/gamma/fields.hpp"

namespace hlab::calculus {

/// Random cubic polynomial in d variables with coefficients in [−1, 1].
template <class Gen>
Expr random_cubic(int d, Gen& gen) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const JetLayout& L = JetLayout::get(d);
  Expr f(U(gen));
  for (std::size_t idx = 1; idx < L.size(); ++idx) {
    Expr term(U(gen));
    for (int i = 0; i < d; ++i)
      for (int p = 0; p < L.exponents[idx][static_cast<std::size_t>(i)]; ++p) term = term * Expr::var(i);
    f = f + term;
  }
  return f;
}

/// Commuting positive fields a_i^k = c_i^k exp(b_i sin(ω_i x_i + φ_i)).
template <class Gen>
VectorFieldSet random_separable_fields(int d, int m, Gen& gen) {
  std::uniform_real_distribution<double> C(0.5, 1.5), B(-0.5, 0.5), W(0.5, 1.5), P(0.0, 6.283185307179586);
  std::vector<Expr> g;
  for (int i = 0; i < d; ++i) g.push_back(exp(Expr(B(gen)) * sin(Expr(W(gen)) * Expr::var(i) + Expr(P(gen)))));
  std::vector<std::vector<double>> c(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(d)));
  for (auto& row : c)
    for (auto& v : row) v = C(gen);
  return VectorFieldSet::separable(c, g);
}

/// One positive field whose components depend on every coordinate.
template <class Gen>
VectorFieldSet random_general_field(int d, Gen& gen) {
  std::uniform_real_distribution<double> C(0.5, 1.5), B(-0.3, 0.3), P(0.0, 6.283185307179586);
  std::vector<Expr> comps;
  for (int i = 0; i < d; ++i) {
    Expr s(0.0);
    for (int j = 0; j < d; ++j) s = s + Expr(B(gen)) * sin(Expr::var(j) + Expr(P(gen)));
    comps.push_back(Expr(C(gen)) * exp(s));
  }
  return VectorFieldSet(d, {comps});
}

template <class Gen>
Point random_point(int d, Gen& gen, double radius = 1.0) {
  std::uniform_real_distribution<double> U(-radius, radius);
  Point x(static_cast<std::size_t>(d));
  for (auto& v : x) v = U(gen);
  return x;
}

}  // namespace hlab::calculus
