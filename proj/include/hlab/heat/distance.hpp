#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>
#include <boost/numeric/odeint.hpp>

#include "hlab/core/error.hpp"
#include "hlab/heat/sde.hpp"

namespace hlab::heat {

enum class Reachability { Reachable, Unreachable, Indeterminate };

inline const char* to_string(Reachability r) {
  switch (r) {
    case Reachability::Reachable: return "reachable";
    case Reachability::Unreachable: return "unreachable";
    case Reachability::Indeterminate: return "indeterminate";
  }
  return "?";
}

struct ArcDistanceResult {
  Reachability status = Reachability::Indeterminate;
  std::optional<double> T;
  double miss = 0.0;  // |γ(T) − y| at the returned time, or the closest approach seen
  std::vector<double> times;
  std::vector<Point> path;
  bool reachable() const { return status == Reachability::Reachable; }
  /// d_arc, +∞ when unreachable.
  double distance() const {
    if (status == Reachability::Unreachable) return INFINITY;
    if (!T) throw NumericalError("arc distance is indeterminate");
    return *T;
  }
};

struct ArcOptions {
  double ode_tolerance = 1e-8;
  double t_max = 100.0;
};

namespace detail {

inline double dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace detail

/// Flow time along γ̇ = A(γ), γ(0) = x, to y for a single field. The flow is
/// integrated by an adaptive Dormand–Prince 5(4) pair with dense output.
/// Closest approaches are located as roots of ⟨γ − y, A(γ)⟩ on each step.
/// Every component of A is positive, so each coordinate of γ increases: once
/// some γ_i exceeds y_i by more than the tolerance, y is certified unreachable.
inline ArcDistanceResult arc_distance(const VectorFieldSet& fields, const Point& x, const Point& y,
                                      ArcOptions opt = {}) {
  namespace odeint = boost::numeric::odeint;
  if (fields.m() != 1) throw PreconditionError("arc_distance: needs a single field (m = 1)");
  const int d = fields.dim();
  if (x.size() != static_cast<std::size_t>(d) || y.size() != x.size()) throw DomainError("arc_distance: dimension mismatch");
  if (!(opt.ode_tolerance > 0.0) || !(opt.t_max > 0.0)) throw ConfigError("arc_distance: tolerance and t_max must be positive");
  const SdeModel model(fields);
  ArcDistanceResult r;
  r.times.push_back(0.0);
  r.path.push_back(x);
  const double tol = opt.ode_tolerance;
  if (detail::dist(x, y) <= tol) {
    r.status = Reachability::Reachable;
    r.T = 0.0;
    r.miss = detail::dist(x, y);
    return r;
  }
  auto field = [&](const std::vector<double>& s, std::vector<double>& ds, double) {
    ds.resize(s.size());
    for (int i = 0; i < d; ++i) {
      const double a = model.component(0, i, s);
      if (!(a > 0.0)) throw DomainError("arc_distance: field component is not positive along the flow");
      ds[static_cast<std::size_t>(i)] = a;
    }
  };
  auto passed = [&](const std::vector<double>& s) {
    for (int i = 0; i < d; ++i)
      if (s[static_cast<std::size_t>(i)] > y[static_cast<std::size_t>(i)] + tol) return true;
    return false;
  };
  r.miss = detail::dist(x, y);
  if (passed(x)) {
    r.status = Reachability::Unreachable;
    return r;
  }
  const double itol = std::max(tol * 1e-3, 1e-14);
  auto stepper = odeint::make_dense_output(itol, itol, odeint::runge_kutta_dopri5<std::vector<double>>());
  stepper.initialize(x, 0.0, std::min(1e-3, opt.t_max));
  std::vector<double> s(x.size()), ds;
  auto g_at = [&](const std::vector<double>& z) {
    field(z, ds, 0.0);
    double v = 0.0;
    for (int i = 0; i < d; ++i) v += (z[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(i)]) * ds[static_cast<std::size_t>(i)];
    return v;
  };
  // dense output is only valid on the last completed step
  auto g = [&](double t) {
    stepper.calc_state(t, s);
    return g_at(s);
  };
  while (stepper.current_time() < opt.t_max) {
    const double t0 = stepper.current_time();
    const double g0 = g_at(stepper.current_state());
    stepper.do_step(field);
    const double t1 = stepper.current_time();
    const double g1 = g_at(stepper.current_state());
    r.times.push_back(t1);
    r.path.push_back(stepper.current_state());
    if (g0 < 0.0 && g1 >= 0.0) {
      std::uintmax_t iters = 200;
      const auto root = boost::math::tools::toms748_solve(g, t0, t1, g0, g1,
                                                          boost::math::tools::eps_tolerance<double>(52), iters);
      const double tr = 0.5 * (root.first + root.second);
      stepper.calc_state(tr, s);
      const double miss = detail::dist(s, y);
      r.miss = std::min(r.miss, miss);
      if (miss <= tol) {
        r.status = Reachability::Reachable;
        r.T = tr;
        r.miss = miss;
        r.times.back() = tr;
        r.path.back() = s;
        return r;
      }
    }
    if (passed(stepper.current_state())) {
      r.status = Reachability::Unreachable;
      return r;
    }
  }
  r.status = Reachability::Indeterminate;
  return r;
}

inline ArcDistanceResult arc_distance(const VectorFieldSet& fields, const Point& x, const Point& y, double ode_tolerance,
                                      double t_max) {
  return arc_distance(fields, x, y, ArcOptions{ode_tolerance, t_max});
}

struct WitnessBound {
  double value = 0.0;      // best witness value, a lower bound for d(x, y)
  double canonical = 0.0;  // f_A with ∇f_A = A/|A|²
  double best_linear = -INFINITY;
  ArcDistanceResult arc;
  bool defined = false;    // witnesses need the flow path from x to y
  std::string note;
};

/// Lower bound for d(x, y) = sup{f(y) − f(x) : Γ(f) ≤ 1} from witness
/// functions. The canonical witness is evaluated by the line integral of
/// ⟨A/|A|², dγ⟩ along the flow path (by quadrature in x when d = 1). Linear
/// witnesses ⟨w, z⟩ are normalised so that Γ ≤ 1 on the sampled path.
inline WitnessBound intrinsic_distance_lower_bound(const VectorFieldSet& fields, const Point& x, const Point& y,
                                                   int witness_count, ArcOptions opt = {}, std::uint64_t seed = 1) {
  WitnessBound w;
  w.arc = arc_distance(fields, x, y, opt);
  if (!w.arc.reachable()) {
    w.note = std::string("witness path undefined: y is ") + to_string(w.arc.status);
    return w;
  }
  w.defined = true;
  const int d = fields.dim();
  if (*w.arc.T == 0.0) {
    w.value = w.canonical = 0.0;
    return w;
  }
  const SdeModel model(fields);
  Point p(static_cast<std::size_t>(d));
  auto A = [&](const Point& z, int i) { return model.component(0, i, z); };
  // dense resampling of the path on a uniform time grid
  namespace odeint = boost::numeric::odeint;
  auto field = [&](const std::vector<double>& s, std::vector<double>& ds, double) {
    ds.resize(s.size());
    for (int i = 0; i < d; ++i) ds[static_cast<std::size_t>(i)] = A(s, i);
  };
  const double T = *w.arc.T;
  const int n = 4000;
  std::vector<Point> pts;
  std::vector<double> state = x;
  const double itol = std::max(opt.ode_tolerance * 1e-3, 1e-14);
  odeint::integrate_n_steps(odeint::make_dense_output(itol, itol, odeint::runge_kutta_dopri5<std::vector<double>>()),
                            field, state, 0.0, T / (2 * n), 2 * n,
                            [&](const std::vector<double>& s, double) { pts.push_back(s); });
  if (d == 1) {
    auto inv = [&](double z) {
      p[0] = z;
      return 1.0 / A(p, 0);
    };
    w.canonical = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(inv, x[0], y[0], 15, 1e-14);
  } else {
    // midpoint rule on the path geometry: Σ ⟨A/|A|²(γ_mid), γ_{j+2} − γ_j⟩
    double acc = 0.0;
    for (std::size_t j = 0; j + 2 < pts.size(); j += 2) {
      double a2 = 0.0, dot = 0.0;
      for (int i = 0; i < d; ++i) {
        const auto si = static_cast<std::size_t>(i);
        const double a = A(pts[j + 1], i);
        a2 += a * a;
        dot += a * (pts[j + 2][si] - pts[j][si]);
      }
      acc += dot / a2;
    }
    w.canonical = acc;
  }
  w.value = w.canonical;
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> N;
  for (int c = 0; c < witness_count; ++c) {
    Point dir(static_cast<std::size_t>(d));
    double nn = 0.0;
    for (auto& v : dir) {
      v = N(gen);
      nn += v * v;
    }
    if (nn == 0.0) continue;
    double sup = 0.0;
    for (const auto& z : pts) {
      double s = 0.0;
      for (int i = 0; i < d; ++i) s += A(z, i) * dir[static_cast<std::size_t>(i)];
      sup = std::max(sup, std::fabs(s));
    }
    if (sup == 0.0) continue;
    double gain = 0.0;
    for (int i = 0; i < d; ++i) gain += dir[static_cast<std::size_t>(i)] * (y[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i)]);
    w.best_linear = std::max(w.best_linear, gain / sup);
  }
  w.value = std::max(w.value, w.best_linear);
  return w;
}

}  // namespace hlab::heat
