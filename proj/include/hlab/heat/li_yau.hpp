#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "hlab/core/error.hpp"
#include "hlab/gamma/calculus.hpp"
#include "hlab/heat/heat.hpp"

namespace hlab::heat {

inline constexpr double kPositivityFloor = 1e-12;

/// Order-2 jet of log u(t, ·) at x from central differences with the given step.
inline calculus::Jet log_jet(const HeatField& u, double t, const Point& x, double step) {
  const int d = u.dim();
  const double floor = kPositivityFloor * u.scale(t);
  auto lv = [&](const Point& p) {
    const double v = u.value(t, p);
    if (!(v > floor) || !(v > 0.0)) throw DomainError("u(t, x) is below the positivity floor near the probe");
    return std::log(v);
  };
  const auto& L = calculus::JetLayout::get(d);
  calculus::Jet j(L, 2);
  const double c = lv(x);
  j.coefficient(0) = c;
  Point p = x;
  for (int i = 0; i < d; ++i) {
    const auto si = static_cast<std::size_t>(i);
    p[si] = x[si] + step;
    const double fp = lv(p);
    p[si] = x[si] - step;
    const double fm = lv(p);
    p[si] = x[si];
    std::vector<int> e(static_cast<std::size_t>(d), 0);
    e[si] = 1;
    j.coefficient(static_cast<std::size_t>(L.index_of(e))) = (fp - fm) / (2.0 * step);
    e[si] = 2;
    j.coefficient(static_cast<std::size_t>(L.index_of(e))) = 0.5 * (fp - 2.0 * c + fm) / (step * step);
    for (int l = i + 1; l < d; ++l) {
      const auto sl = static_cast<std::size_t>(l);
      double acc = 0.0;
      for (int a : {1, -1})
        for (int b : {1, -1}) {
          p[si] = x[si] + a * step;
          p[sl] = x[sl] + b * step;
          acc += a * b * lv(p);
        }
      p[si] = x[si];
      p[sl] = x[sl];
      std::vector<int> m(static_cast<std::size_t>(d), 0);
      m[si] = m[sl] = 1;
      j.coefficient(static_cast<std::size_t>(L.index_of(m))) = acc / (4.0 * step * step);
    }
  }
  return j;
}

struct LiYauResult {
  double value = 0.0;   // L(log u)(t, x)
  double bound = 0.0;   // −1/(2t)
  double margin = 0.0;  // value − bound
  double u = 0.0;
  double differentiation_error = 0.0;  // |value(s) − value(2s)|/3
};

inline double L_of_log(const VectorFieldSet& fields, const HeatField& u, double t, const Point& x, double step) {
  const calculus::GammaEngine e(fields, x);
  return e.calculus().L_expanded(log_jet(u, t, x, step)).value();
}

inline LiYauResult li_yau_check(const VectorFieldSet& fields, const HeatField& u, double t, const Point& x) {
  if (!(t > 0.0)) throw DomainError("li_yau_check: t must be positive");
  const double s = u.derivative_step();
  LiYauResult r;
  r.value = L_of_log(fields, u, t, x, s);
  r.bound = -1.0 / (2.0 * t);
  r.margin = r.value - r.bound;
  r.u = u.value(t, x);
  r.differentiation_error = std::fabs(r.value - L_of_log(fields, u, t, x, 2.0 * s)) / 3.0;
  return r;
}

struct DtLogResult {
  double lhs = 0.0;    // −∂_t log u
  double rhs = 0.0;    // 1/(2t) − Γ(log u)
  double slack = 0.0;  // rhs − lhs
  double gamma = 0.0;
};

/// ∂_t by a centered difference over ±dt_step, which the field must provide.
inline DtLogResult dt_log_check(const VectorFieldSet& fields, const HeatField& u, double t, const Point& x,
                                double dt_step) {
  if (!(t > dt_step && dt_step > 0.0)) throw DomainError("dt_log_check: need 0 < dt_step < t");
  const double floor = kPositivityFloor * u.scale(t);
  const double up = u.value(t + dt_step, x), um = u.value(t - dt_step, x);
  if (!(up > floor && um > floor && up > 0.0 && um > 0.0)) throw DomainError("u is below the positivity floor at the probe");
  const calculus::GammaEngine e(fields, x);
  const auto lj = log_jet(u, t, x, u.derivative_step());
  DtLogResult r;
  r.lhs = -(std::log(up) - std::log(um)) / (2.0 * dt_step);
  r.gamma = e.calculus().gamma(lj, lj).value();
  r.rhs = 1.0 / (2.0 * t) - r.gamma;
  r.slack = r.rhs - r.lhs;
  return r;
}

}  // namespace hlab::heat
