#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "hlab/gamma/calculus.hpp"

namespace hlab::calculus {

namespace detail {

struct Stencil1D {
  std::vector<std::pair<int, double>> taps;  // (offset in units of h, weight)
  int power = 0;                             // divide by h^power
};

/// Second-order central stencils for the p-th derivative, p ≤ 3.
inline const Stencil1D& central_stencil(int p) {
  static const std::array<Stencil1D, 4> s{{
      {{{0, 1.0}}, 0},
      {{{-1, -0.5}, {1, 0.5}}, 1},
      {{{-1, 1.0}, {0, -2.0}, {1, 1.0}}, 2},
      {{{-2, -0.5}, {-1, 1.0}, {1, -1.0}, {2, 0.5}}, 3},
  }};
  return s.at(static_cast<std::size_t>(p));
}

/// Taylor coefficients ∂^α f/α! from tensor-product central differences at step h.
inline Jet fd_jet_at_step(const Expr& f, std::span<const double> x, int order, double h) {
  const int d = static_cast<int>(x.size());
  const JetLayout& L = JetLayout::get(d);
  Jet out(L, order);
  std::vector<double> p(x.begin(), x.end());
  for (std::size_t idx = 0; idx < L.size_of_order(order); ++idx) {
    const auto& alpha = L.exponents[idx];
    double acc = 0.0;
    int total_power = 0;
    double fact = 1.0;
    for (int a : alpha) {
      total_power += central_stencil(a).power;
      for (int k = 2; k <= a; ++k) fact *= k;
    }
    // walk the tensor product of the per-coordinate stencils
    std::vector<std::size_t> pos(static_cast<std::size_t>(d), 0);
    for (;;) {
      double w = 1.0;
      for (int i = 0; i < d; ++i) {
        const auto& tap = central_stencil(alpha[static_cast<std::size_t>(i)]).taps[pos[static_cast<std::size_t>(i)]];
        p[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + tap.first * h;
        w *= tap.second;
      }
      acc += w * f(p);
      int i = 0;
      for (; i < d; ++i) {
        auto& q = pos[static_cast<std::size_t>(i)];
        if (++q < central_stencil(alpha[static_cast<std::size_t>(i)]).taps.size()) break;
        q = 0;
      }
      if (i == d) break;
    }
    out.coefficient(idx) = acc / (std::pow(h, total_power) * fact);
  }
  return out;
}

inline Jet richardson(const Jet& coarse, const Jet& fine) {
  Jet r = fine * (4.0 / 3.0);
  Jet c = coarse * (1.0 / 3.0);
  r -= c;
  return r;
}

}  // namespace detail

/// Finite-difference jets: Richardson-extrapolated at base step h, the
/// un-extrapolated h/2 values, and a Richardson estimate at 0.8h.
struct FdJets {
  Jet extrapolated;
  Jet half_step;
  Jet alternate;
};

inline FdJets fd_jets(const Expr& f, std::span<const double> x, int order, double h) {
  using detail::fd_jet_at_step;
  const Jet c = fd_jet_at_step(f, x, order, h), fh = fd_jet_at_step(f, x, order, h / 2);
  const Jet c2 = fd_jet_at_step(f, x, order, 0.8 * h), f2 = fd_jet_at_step(f, x, order, 0.4 * h);
  return {detail::richardson(c, fh), fh, detail::richardson(c2, f2)};
}

struct FdEstimate {
  double value = 0.0;
  double error = 0.0;
};

/// Evaluates q on engines built from finite-difference jets of the fields and
/// of the functions fs. The error estimate adds the Richardson correction size
/// and the spread under a change of base step.
inline FdEstimate fd_route(const std::vector<Expr>& fs, const VectorFieldSet& fields, std::span<const double> x,
                           const std::function<double(const GammaEngine&, std::span<const Jet>)>& q,
                           double h = 1e-2) {
  std::array<FieldJets, 3> a;
  for (int k = 0; k < fields.m(); ++k) {
    for (auto& v : a) v.emplace_back();
    for (int i = 0; i < fields.dim(); ++i) {
      const auto j = fd_jets(fields.component(k, i), x, 2, h);
      if (!(j.extrapolated.value() > 0.0)) throw DomainError("fd_route: field component is not positive at the point");
      a[0].back().push_back(j.extrapolated);
      a[1].back().push_back(j.half_step);
      a[2].back().push_back(j.alternate);
    }
  }
  std::array<std::vector<Jet>, 3> fj;
  for (const auto& f : fs) {
    const auto j = fd_jets(f, x, 3, h);
    fj[0].push_back(j.extrapolated);
    fj[1].push_back(j.half_step);
    fj[2].push_back(j.alternate);
  }
  std::array<double, 3> v{};
  for (std::size_t r = 0; r < 3; ++r) {
    const GammaEngine e(a[r], x);
    v[r] = q(e, fj[r]);
  }
  return {v[0], std::fabs(v[0] - v[1]) + std::fabs(v[0] - v[2])};
}

inline FdEstimate fd_gamma(const Expr& f, const Expr& g, const VectorFieldSet& fields, std::span<const double> x,
                           double h = 1e-2) {
  return fd_route({f, g}, fields, x, [](const GammaEngine& e, std::span<const Jet> j) {
    return e.calculus().gamma(j[0], j[1]).value();
  }, h);
}

inline FdEstimate fd_gamma2(const Expr& f, const VectorFieldSet& fields, std::span<const double> x, double h = 1e-2) {
  return fd_route({f}, fields, x, [](const GammaEngine& e, std::span<const Jet> j) {
    return e.calculus().gamma2_defining(j[0]).value();
  }, h);
}

inline FdEstimate fd_apply_L(const Expr& f, const VectorFieldSet& fields, std::span<const double> x, double h = 1e-2) {
  return fd_route({f}, fields, x, [](const GammaEngine& e, std::span<const Jet> j) {
    return e.calculus().L_expanded(j[0]).value();
  }, h);
}

}  // namespace hlab::calculus
