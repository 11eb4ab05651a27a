#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/zeta.hpp>

#include "hlab/core/error.hpp"
#include "hlab/core/parallel.hpp"
#include "hlab/core/rng.hpp"
#include "hlab/core/stats.hpp"
#include "hlab/ou/spectral_ou.hpp"

namespace hlab::coupling {

using ou::SpectralModel;
using ou::Vector;

struct CouplingConfig {
  SpectralModel model = SpectralModel::power_law(6.0, 5);
  Vector x0{0.5, 0.0, 0.0, 0.0, 0.0};
  Vector y0{-0.5, 0.0, 0.0, 0.0, 0.0};
  double dt = 1e-4;
  double t_horizon = 5.0;
  double exit_radius = 2.0;
  std::uint64_t seed = 1;
  std::size_t trials = 10000;
  // extension: drive Y with the reflected increment before meeting
  bool reflection = false;
  unsigned threads = 1;

  void validate() const {
    const std::size_t n = model.size();
    if (x0.size() != n || y0.size() != n) throw DomainError("CouplingConfig: start points must have the model dimension");
    const double nx = ou::norm(x0), ny = ou::norm(y0);
    if (!(nx < 1.0) || !(ny < 1.0)) throw DomainError("CouplingConfig: start points must lie in the open unit ball");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("CouplingConfig: dt must be positive");
    if (!(t_horizon > 0.0)) throw DomainError("CouplingConfig: horizon must be positive");
    if (!(exit_radius > std::max(nx, ny))) throw DomainError("CouplingConfig: exit radius must exceed both start norms");
  }
};

struct CouplingOutcome {
  bool coupled = false;
  std::optional<double> T_C;
  std::optional<double> exit_time_X;
  std::optional<double> exit_time_Y;
  std::vector<std::optional<double>> per_coordinate_T;

  bool resolved() const { return coupled || exit_time_X || exit_time_Y; }
  /// T_C < τ_X(r) ∧ τ_Y(r).
  bool success() const {
    if (!coupled) return false;
    const double inf = std::numeric_limits<double>::infinity();
    return *T_C < std::min(exit_time_X.value_or(inf), exit_time_Y.value_or(inf));
  }
};

namespace detail {

/// Exact one-step OU transition for a coordinate pair plus the bridge test on Z = X − Y.
struct PairStepper {
  double a = 1.0;
  double dt = 1e-4;
  double decay = 1.0;
  double sd = 0.0;
  double bridge_scale = 0.0;  // 2a/(σ_Z² sinh(a dt))
  bool reflection = false;

  PairStepper(double rate, double step, bool reflect) : a(rate), dt(step), reflection(reflect) {
    decay = std::exp(-a * dt);
    sd = std::sqrt(ou::qt_eigenvalue(a, dt));
    const double sigma2 = reflect ? 4.0 : 2.0;
    bridge_scale = 2.0 * a / (sigma2 * std::sinh(a * dt));
  }

  /// Advances an unmerged pair from time t. Returns the meeting time if Z
  /// reaches 0 in the step, in which case y is merged onto x.
  template <class Uniform>
  std::optional<double> advance(double& x, double& y, double t, double xi_x, double xi_y, Uniform&& uniform) const {
    const double z0 = x - y;
    x = decay * x + sd * xi_x;
    y = decay * y + sd * (reflection ? -xi_x : xi_y);
    const double z1 = x - y;
    std::optional<double> hit;
    if (z0 == 0.0) {
      hit = t;
    } else if (z0 * z1 <= 0.0) {
      hit = t + dt * z0 / (z0 - z1);
    } else if (uniform() < std::exp(-bridge_scale * z0 * z1)) {
      hit = t + 0.5 * dt;
    }
    if (hit) y = x;
    return hit;
  }

  void advance_merged(double& x, double& y, double xi_x) const {
    x = decay * x + sd * xi_x;
    y = x;
  }
};

inline std::size_t step_count(double horizon, double dt) {
  const double n = std::ceil(horizon / dt - 1e-9);
  if (n > 1e12) throw CapacityError("coupling: too many time steps");
  return static_cast<std::size_t>(std::max(1.0, n));
}

}  // namespace detail

struct CoordinatePairResult {
  std::optional<double> T;
  std::vector<double> times;
  std::vector<double> x_path;
  std::vector<double> y_path;
};

/// Two OU coordinates with independent drivers until the difference process
/// first reaches 0, merged afterwards. Paths are recorded on the step grid.
inline CoordinatePairResult simulate_coordinate_pair(double a, double x0j, double y0j, double dt, double t_horizon,
                                                     Engine& rng, bool record_paths = false,
                                                     bool reflection = false) {
  if (!(a > 0.0)) throw DomainError("simulate_coordinate_pair: rate must be positive");
  if (!(dt > 0.0) || !(t_horizon > 0.0)) throw DomainError("simulate_coordinate_pair: dt and horizon must be positive");
  const std::size_t steps = detail::step_count(t_horizon, dt);
  const double h = t_horizon / static_cast<double>(steps);
  const detail::PairStepper stepper(a, h, reflection);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  CoordinatePairResult out;
  double x = x0j, y = y0j;
  if (x == y) out.T = 0.0;
  auto record = [&](double t) {
    out.times.push_back(t);
    out.x_path.push_back(x);
    out.y_path.push_back(y);
  };
  if (record_paths) {
    out.times.reserve(steps + 1);
    out.x_path.reserve(steps + 1);
    out.y_path.reserve(steps + 1);
    record(0.0);
  }
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * h;
    if (out.T) {
      if (!record_paths) break;
      stepper.advance_merged(x, y, normal(rng));
    } else {
      const double xi_x = normal(rng);
      const double xi_y = normal(rng);
      out.T = stepper.advance(x, y, t, xi_x, xi_y, [&] { return unif(rng); });
    }
    if (record_paths) record(static_cast<double>(k + 1) * h);
  }
  return out;
}

namespace detail {

struct TrialStreams {
  std::vector<NormalSource> x, y, u;
};

inline TrialStreams trial_streams(std::uint64_t seed, std::uint64_t trial, std::size_t n, std::uint64_t salt = 0) {
  TrialStreams s;
  for (std::size_t j = 0; j < n; ++j) {
    s.x.emplace_back(make_stream(seed, {salt, trial, j, 0}));
    s.y.emplace_back(make_stream(seed, {salt, trial, j, 1}));
    s.u.emplace_back(make_stream(seed, {salt, trial, j, 2}));
  }
  return s;
}

}  // namespace detail

/// One coupling trial. Stops once the outcome of T_C < τ_X ∧ τ_Y is decided
/// or the horizon is reached.
inline CouplingOutcome simulate_coupling(const CouplingConfig& cfg, std::uint64_t trial = 0) {
  cfg.validate();
  const std::size_t n = cfg.model.size();
  const std::size_t steps = detail::step_count(cfg.t_horizon, cfg.dt);
  const double h = cfg.t_horizon / static_cast<double>(steps);
  std::vector<detail::PairStepper> steppers;
  for (std::size_t j = 0; j < n; ++j) steppers.emplace_back(cfg.model.eigenvalue(j), h, cfg.reflection);
  auto streams = detail::trial_streams(cfg.seed, trial, n);

  CouplingOutcome out;
  out.per_coordinate_T.assign(n, std::nullopt);
  Vector x = cfg.x0, y = cfg.y0;
  std::size_t merged = 0;
  for (std::size_t j = 0; j < n; ++j)
    if (x[j] == y[j]) {
      out.per_coordinate_T[j] = 0.0;
      ++merged;
    }
  const double r2 = cfg.exit_radius * cfg.exit_radius;
  auto finish_if_coupled = [&] {
    if (merged < n) return false;
    out.coupled = true;
    double tc = 0.0;
    for (const auto& tj : out.per_coordinate_T) tc = std::max(tc, *tj);
    out.T_C = tc;
    return true;
  };
  if (finish_if_coupled()) return out;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * h;
    double nx = 0.0, ny = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (out.per_coordinate_T[j]) {
        steppers[j].advance_merged(x[j], y[j], streams.x[j]());
      } else {
        const double xi_x = streams.x[j]();
        const double xi_y = streams.y[j]();
        auto& u = streams.u[j];
        if (auto hit = steppers[j].advance(x[j], y[j], t, xi_x, xi_y, [&u] { return u.uniform(); })) {
          out.per_coordinate_T[j] = hit;
          ++merged;
        }
      }
      nx += x[j] * x[j];
      ny += y[j] * y[j];
    }
    const double t1 = static_cast<double>(k + 1) * h;
    if (nx >= r2) out.exit_time_X = t1;
    if (ny >= r2) out.exit_time_Y = t1;
    if (finish_if_coupled() || out.exit_time_X || out.exit_time_Y) break;
  }
  return out;
}

struct CoordinateStats {
  std::size_t coupled = 0;
  double median_T = std::numeric_limits<double>::quiet_NaN();
  double mean_T = std::numeric_limits<double>::quiet_NaN();
};

struct CouplingEstimate {
  double estimate = 0.0;
  Interval ci;
  std::size_t trials = 0;
  std::size_t successes = 0;
  std::size_t unresolved = 0;
  bool zero_successes = false;
  std::vector<CoordinateStats> per_coordinate;
};

/// Wilson 95% interval for P(T_C < τ_X(r) ∧ τ_Y(r)) over trials 0..trials−1.
inline CouplingEstimate estimate_coupling_probability(const CouplingConfig& cfg, std::size_t trials) {
  cfg.validate();
  if (trials < 100) throw DomainError("estimate_coupling_probability: need at least 100 trials");
  std::vector<CouplingOutcome> outcomes(trials);
  parallel_for(trials, cfg.threads, [&](std::size_t i) { outcomes[i] = simulate_coupling(cfg, i); });
  CouplingEstimate est;
  est.trials = trials;
  const std::size_t n = cfg.model.size();
  std::vector<std::vector<double>> times(n);
  for (const auto& o : outcomes) {
    if (o.success()) ++est.successes;
    if (!o.resolved()) ++est.unresolved;
    for (std::size_t j = 0; j < n; ++j)
      if (o.per_coordinate_T[j]) times[j].push_back(*o.per_coordinate_T[j]);
  }
  est.estimate = static_cast<double>(est.successes) / static_cast<double>(trials);
  est.ci = wilson_interval(est.successes, trials);
  est.zero_successes = est.successes == 0;
  for (std::size_t j = 0; j < n; ++j) {
    CoordinateStats s;
    s.coupled = times[j].size();
    if (!times[j].empty()) {
      RunningStats rs;
      for (double v : times[j]) rs.add(v);
      s.mean_T = rs.mean();
      s.median_T = median(times[j]);
    }
    est.per_coordinate.push_back(s);
  }
  return est;
}

struct MarginalStats {
  double mean_x = 0.0, var_x = 0.0, se_mean_x = 0.0, se_var_x = 0.0;
  double mean_y = 0.0, var_y = 0.0, se_mean_y = 0.0, se_var_y = 0.0;
  double exact_mean_x = 0.0, exact_mean_y = 0.0, exact_var = 0.0;
};

/// Per-coordinate law of the coupled pair at time t, ignoring exits, next to
/// the closed-form OU mean and variance.
inline std::vector<MarginalStats> coupling_marginals(const CouplingConfig& cfg, double t, std::size_t trials) {
  cfg.validate();
  if (!(t > 0.0)) throw DomainError("coupling_marginals: t must be positive");
  if (trials < 2) throw DomainError("coupling_marginals: need at least two trials");
  const std::size_t n = cfg.model.size();
  const std::size_t steps = detail::step_count(t, cfg.dt);
  const double h = t / static_cast<double>(steps);
  std::vector<detail::PairStepper> steppers;
  for (std::size_t j = 0; j < n; ++j) steppers.emplace_back(cfg.model.eigenvalue(j), h, cfg.reflection);
  std::vector<Vector> xs(trials), ys(trials);
  parallel_for(trials, cfg.threads, [&](std::size_t i) {
    auto streams = detail::trial_streams(cfg.seed, i, n, 1);
    Vector x = cfg.x0, y = cfg.y0;
    std::vector<bool> merged(n);
    for (std::size_t j = 0; j < n; ++j) merged[j] = x[j] == y[j];
    for (std::size_t k = 0; k < steps; ++k)
      for (std::size_t j = 0; j < n; ++j) {
        if (merged[j]) {
          steppers[j].advance_merged(x[j], y[j], streams.x[j]());
        } else {
          const double xi_x = streams.x[j]();
          const double xi_y = streams.y[j]();
          auto& u = streams.u[j];
          merged[j] = steppers[j].advance(x[j], y[j], static_cast<double>(k) * h, xi_x, xi_y,
                                          [&u] { return u.uniform(); }).has_value();
        }
      }
    xs[i] = std::move(x);
    ys[i] = std::move(y);
  });
  std::vector<MarginalStats> out(n);
  const double m = static_cast<double>(trials);
  for (std::size_t j = 0; j < n; ++j) {
    RunningStats sx, sy, qx, qy;
    for (std::size_t i = 0; i < trials; ++i) {
      sx.add(xs[i][j]);
      sy.add(ys[i][j]);
    }
    for (std::size_t i = 0; i < trials; ++i) {
      qx.add((xs[i][j] - sx.mean()) * (xs[i][j] - sx.mean()));
      qy.add((ys[i][j] - sy.mean()) * (ys[i][j] - sy.mean()));
    }
    auto& s = out[j];
    const double a = cfg.model.eigenvalue(j);
    s.mean_x = sx.mean();
    s.var_x = sx.variance();
    s.se_mean_x = sx.standard_error();
    s.se_var_x = qx.stddev() / std::sqrt(m);
    s.mean_y = sy.mean();
    s.var_y = sy.variance();
    s.se_mean_y = sy.standard_error();
    s.se_var_y = qy.stddev() / std::sqrt(m);
    s.exact_mean_x = std::exp(-a * t) * cfg.x0[j];
    s.exact_mean_y = std::exp(-a * t) * cfg.y0[j];
    s.exact_var = ou::qt_eigenvalue(a, t);
  }
  return out;
}

/// P(T ≤ t) for the difference process started at z0 > 0: the time-changed
/// martingale e^{at}Z is a Brownian motion with clock σ²(e^{2at}−1)/(2a).
inline double difference_first_passage_probability(double a, double z0, double t, double sigma2 = 2.0) {
  if (!(a > 0.0) || !(t > 0.0) || !(sigma2 > 0.0)) throw DomainError("difference_first_passage_probability: bad arguments");
  const double clock = sigma2 * std::expm1(2.0 * a * t) / (2.0 * a);
  return std::erfc(std::abs(z0) / std::sqrt(2.0 * clock));
}

struct ExitBoundOptions {
  std::size_t trials = 10000;
  std::size_t simulated_coordinates = 10;
  std::size_t summability_terms = 10000;
  std::size_t min_steps = 1000;
  std::size_t max_steps = 4000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct ExitBoundRow {
  std::size_t n = 0;
  double a = 0.0;
  double d = 0.0;
  double bound = 0.0;
  std::optional<double> empirical;
  Interval empirical_ci;
  double mean_sup = 0.0;
  double dt = 0.0;
};

struct ExitBoundTable {
  double t0 = 0.0, r = 0.0, q = 0.0, delta = 0.0, C = 0.0;
  double c_fit = 0.0;
  double normalisation = 0.0;  // C² Σ n^{−1−2δ}
  double partial_sum = 0.0;    // Σ_{n ≤ terms} bound_n
  double tail_sum = 0.0;       // Σ_{n > terms} bound_n
  double tail_ratio() const { return tail_sum / (partial_sum + tail_sum); }
  std::vector<ExitBoundRow> rows;
};

namespace detail {

struct SupSample {
  double mean_sup = 0.0;
  std::size_t exceed = 0;
  double dt = 0.0;
};

/// sup_{s ≤ t0} |X_s| for a coordinate started at 0, with a Brownian-bridge
/// correction for exceeding ±level between grid points.
inline SupSample sample_sup(double a, double t0, double level, const ExitBoundOptions& opt, std::uint64_t coordinate) {
  const double wanted = std::ceil(t0 * a / 0.05);
  const std::size_t steps = static_cast<std::size_t>(
      std::clamp(wanted, static_cast<double>(opt.min_steps), static_cast<double>(opt.max_steps)));
  const double h = t0 / static_cast<double>(steps);
  const double decay = std::exp(-a * h), sd = std::sqrt(ou::qt_eigenvalue(a, h));
  std::vector<double> sups(opt.trials);
  std::vector<char> hit(opt.trials);
  parallel_for(opt.trials, opt.threads, [&](std::size_t i) {
    NormalSource src(make_stream(opt.seed, {2, coordinate, i}));
    double x = 0.0, sup = 0.0;
    bool exceeded = false;
    for (std::size_t k = 0; k < steps; ++k) {
      const double x1 = decay * x + sd * src();
      sup = std::max(sup, std::abs(x1));
      if (!exceeded) {
        if (std::abs(x1) >= level) {
          exceeded = true;
        } else {
          const double up = std::exp(-2.0 * (level - x) * (level - x1) / h);
          const double down = std::exp(-2.0 * (level + x) * (level + x1) / h);
          if (src.uniform() < up + down) exceeded = true;
        }
      }
      x = x1;
    }
    sups[i] = sup;
    hit[i] = exceeded;
  });
  SupSample s;
  s.dt = h;
  RunningStats rs;
  for (std::size_t i = 0; i < opt.trials; ++i) {
    rs.add(sups[i]);
    s.exceed += hit[i] ? 1 : 0;
  }
  s.mean_sup = rs.mean();
  return s;
}

}  // namespace detail

/// Per-coordinate Chebyshev bound c√(log(1+a_n t0))/(d_n√a_n) with
/// d_n = C(r−q)n^{−1/2−δ}. The constant c is fitted on coordinate 1; C ≤ 0
/// selects the normalising value ζ(1+2δ)^{−1/2}.
inline ExitBoundTable exit_time_bound(const SpectralModel& model, double t0, double r, double q, double delta, double C,
                                      const ExitBoundOptions& opt = {}) {
  if (!(t0 > 0.0)) throw DomainError("exit_time_bound: t0 must be positive");
  if (!(r > q) || !(q > 0.0)) throw DomainError("exit_time_bound: need r > q > 0");
  const auto p = model.exponent();
  if (!p) throw DomainError("exit_time_bound: needs a power-law model");
  if (!(delta > 0.0) || !((*p - 1.0) / 2.0 > 1.0 + delta)) throw DomainError("exit_time_bound: need 0 < δ < (p−1)/2 − 1");
  if (opt.trials < 2 || opt.simulated_coordinates == 0) throw DomainError("exit_time_bound: need trials and coordinates");

  ExitBoundTable tab;
  tab.t0 = t0;
  tab.r = r;
  tab.q = q;
  tab.delta = delta;
  const double zeta = boost::math::zeta(1.0 + 2.0 * delta);
  tab.C = C > 0.0 ? C : 1.0 / std::sqrt(zeta);

  auto rate = [&](double n) {
    const auto k = static_cast<std::size_t>(n);
    return k <= model.size() ? model.eigenvalue(k - 1) : std::pow(n, *p);
  };
  auto d_of = [&](double n) { return tab.C * (r - q) * std::pow(n, -0.5 - delta); };
  auto shape = [&](double n) {
    const double a = rate(n);
    return std::sqrt(std::log1p(a * t0)) / (d_of(n) * std::sqrt(a));
  };

  // normalisation by direct summation plus the integral tail
  const std::size_t M = 1000000;
  double s = 0.0;
  for (std::size_t n = M; n >= 1; --n) s += std::pow(static_cast<double>(n), -1.0 - 2.0 * delta);
  s += std::pow(static_cast<double>(M) + 0.5, -2.0 * delta) / (2.0 * delta);
  tab.normalisation = tab.C * tab.C * s;

  const auto first = detail::sample_sup(rate(1.0), t0, d_of(1.0), opt, 1);
  tab.c_fit = first.mean_sup * std::sqrt(rate(1.0)) / std::sqrt(std::log1p(rate(1.0) * t0));

  const std::size_t N = opt.summability_terms;
  double partial = 0.0;
  for (std::size_t n = N; n >= 1; --n) partial += shape(static_cast<double>(n));
  double tail = 0.0;
  const std::size_t far = 100 * N;
  for (std::size_t n = far; n > N; --n) tail += shape(static_cast<double>(n));
  boost::math::quadrature::exp_sinh<double> integrator;
  const double edge = static_cast<double>(far) + 0.5;
  tail += integrator.integrate([&](double u) {
    const double n = edge + u;
    const double lg = *p * std::log(n) + std::log(t0);
    const double log_term = lg > 40.0 ? lg : std::log1p(std::exp(lg));
    return std::sqrt(log_term) * std::exp((0.5 + delta - 0.5 * *p) * std::log(n)) / (tab.C * (r - q));
  });
  tab.partial_sum = tab.c_fit * partial;
  tab.tail_sum = tab.c_fit * tail;

  for (std::size_t n = 1; n <= opt.simulated_coordinates; ++n) {
    ExitBoundRow row;
    row.n = n;
    row.a = rate(static_cast<double>(n));
    row.d = d_of(static_cast<double>(n));
    row.bound = tab.c_fit * shape(static_cast<double>(n));
    const auto sample = n == 1 ? first : detail::sample_sup(row.a, t0, row.d, opt, n);
    row.empirical = static_cast<double>(sample.exceed) / static_cast<double>(opt.trials);
    row.empirical_ci = wilson_interval(sample.exceed, opt.trials);
    row.mean_sup = sample.mean_sup;
    row.dt = sample.dt;
    tab.rows.push_back(row);
  }
  return tab;
}

}  // namespace hlab::coupling
