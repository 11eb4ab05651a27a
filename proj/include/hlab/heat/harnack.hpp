#pragma once

#include <cmath>

#include "hlab/core/error.hpp"
#include "hlab/heat/distance.hpp"
#include "hlab/heat/heat.hpp"
#include "hlab/heat/li_yau.hpp"

namespace hlab::heat {

struct HarnackOptions {
  double tolerance = 1e-6;        // allowed excess of lhs over rhs
  bool allow_late_times = false;  // lift the t2 ≤ 1 restriction
  ArcOptions arc{1e-10, 100.0};
};

struct HarnackResult {
  double lhs = 0.0;  // log u(t1, x) − log u(t2, y)
  double rhs = 0.0;  // T_x²/(4(t2 − t1)) + ½ log(t2/t1)
  double slack = 0.0;
  double T = 0.0;
  bool satisfied = false;
};

/// T_x is the flow time from y to x. When the flow from y does not reach x but
/// the flow from x reaches y, the two points lie on one integral curve and
/// the same arc time is used.
inline double harnack_arc_time(const VectorFieldSet& fields, const Point& x, const Point& y, const ArcOptions& opt) {
  const auto fwd = arc_distance(fields, y, x, opt);
  if (fwd.reachable()) return *fwd.T;
  const auto back = arc_distance(fields, x, y, opt);
  if (back.reachable()) return *back.T;
  throw PreconditionError("parabolic_harnack_check: x and y are not on one flow line");
}

inline HarnackResult parabolic_harnack_check(const VectorFieldSet& fields, const HeatField& u, double t1, double t2,
                                             const Point& x, const Point& y, HarnackOptions opt = {}) {
  if (!(t1 > 0.0 && t1 < t2)) throw PreconditionError("parabolic_harnack_check: need 0 < t1 < t2");
  if (t2 > 1.0 && !opt.allow_late_times) throw PreconditionError("parabolic_harnack_check: t2 > 1 needs the override flag");
  HarnackResult r;
  r.T = harnack_arc_time(fields, x, y, opt.arc);
  const double u1 = u.value(t1, x), u2 = u.value(t2, y);
  if (!(u1 > kPositivityFloor * u.scale(t1) && u1 > 0.0) || !(u2 > kPositivityFloor * u.scale(t2) && u2 > 0.0))
    throw DomainError("parabolic_harnack_check: u is below the positivity floor");
  r.lhs = std::log(u1) - std::log(u2);
  r.rhs = r.T * r.T / (4.0 * (t2 - t1)) + 0.5 * std::log(t2 / t1);
  r.slack = r.rhs - r.lhs;
  r.satisfied = r.slack >= -opt.tolerance;
  return r;
}

}  // namespace hlab::heat
