#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hlab/cli/config.hpp"
#include "hlab/counterexamples/green.hpp"
#include "hlab/counterexamples/newtonian.hpp"
#include "hlab/coupling/coupling.hpp"
#include "hlab/gamma/calculus.hpp"
#include "hlab/gamma/finite_difference.hpp"
#include "hlab/gamma/random_draws.hpp"
#include "hlab/heat/distance.hpp"
#include "hlab/heat/harnack.hpp"
#include "hlab/heat/heat.hpp"
#include "hlab/heat/li_yau.hpp"

namespace hlab::cli {

namespace detail {

inline double real(const json& t, const char* k) {
  const auto& v = t.at(k);
  if (!v.is_number()) throw ConfigError(std::string("'") + k + "' must be a number");
  return v.get<double>();
}

inline long integer(const json& t, const char* k) { return static_cast<long>(t.at(k).get<std::int64_t>()); }

inline std::size_t count(const json& t, const char* k, std::size_t min = 0) {
  const long v = integer(t, k);
  if (v < static_cast<long>(min)) throw ConfigError(std::string("'") + k + "' must be at least " + std::to_string(min));
  return static_cast<std::size_t>(v);
}

inline std::vector<double> reals(const json& t, const char* k) {
  const auto& v = t.at(k);
  if (!v.is_array()) throw ConfigError(std::string("'") + k + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(std::string("'") + k + "' must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

inline std::vector<std::pair<double, double>> pairs(const json& t, const char* k) {
  const auto& v = t.at(k);
  std::vector<std::pair<double, double>> out;
  for (const auto& e : v) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
      throw ConfigError(std::string("'") + k + "' must be an array of [t1, t2] pairs");
    out.emplace_back(e[0].get<double>(), e[1].get<double>());
  }
  return out;
}

/// Fields given as rows of component expressions in x1..xd.
inline calculus::VectorFieldSet fields(const json& t, const char* k) {
  const auto& v = t.at(k);
  if (!v.is_array() || v.empty() || !v[0].is_array() || v[0].empty())
    throw ConfigError(std::string("'") + k + "' must be a nonempty array of component arrays");
  std::vector<std::vector<std::string>> text;
  for (const auto& row : v) {
    std::vector<std::string> r;
    for (const auto& c : row) r.push_back(c.is_string() ? c.get<std::string>() : c.dump());
    text.push_back(std::move(r));
  }
  return calculus::VectorFieldSet::parse(static_cast<int>(text[0].size()), text);
}

inline std::mt19937_64 section_rng(std::uint64_t seed, std::uint64_t section) {
  std::seed_seq s{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                  static_cast<std::uint32_t>(section)};
  return std::mt19937_64(s);
}

/// residual / allowed, 0 when both vanish.
inline double ratio(double residual, double allowed) {
  if (residual == 0.0) return 0.0;
  return allowed > 0.0 ? residual / allowed : INFINITY;
}

inline heat::GridDomain line(double half, int cells) { return {{-half}, {half}, {cells}}; }

}  // namespace detail

// ---------------------------------------------------------------------------

inline void run_bm_ratio(const RunContext& c, Report& rep) {
  const long lo = detail::integer(c.params, "n-min"), hi = detail::integer(c.params, "n-max");
  if (lo < 3 || hi < lo) throw ConfigError("bm-ratio: need 3 <= n-min <= n-max");
  rep.columns = {"n", "ratio", "potential_ratio", "step"};
  double worst_closed = 0.0, worst_step = 0.0, prev = 0.0;
  for (long n = lo; n <= hi; ++n) {
    const int ni = static_cast<int>(n);
    const double r = cx::bm_harnack_ratio(ni);
    // the same ratio from the Newtonian potential at distances 3/4 and 1
    std::vector<double> pole(static_cast<std::size_t>(n), 0.0), near = pole, far = pole;
    pole[0] = 1.0;
    near[0] = 0.25;
    const double pot = cx::newtonian_green(ni, near, pole) / cx::newtonian_green(ni, far, pole);
    worst_closed = std::max(worst_closed, std::fabs(r / pot - 1.0));
    const double step = n > lo ? r / prev : NAN;
    if (n > lo) worst_step = std::max(worst_step, std::fabs(step - 4.0 / 3.0));
    rep.rows.push_back({num(static_cast<int>(n)), num(r), num(pot), num(step)});
    prev = r;
  }
  rep.results["max_closed_form_rel_error"] = worst_closed;
  rep.results["max_step_error"] = worst_step;
  rep.check("closed_form_rel_error", worst_closed, "<=", detail::real(c.tolerances, "closed-form"));
  rep.check("step_minus_four_thirds", worst_step, "<=", detail::real(c.tolerances, "step"));
}

inline void run_ou_green_ratio(const RunContext& c, Report& rep) {
  const double p = detail::real(c.params, "p");
  const std::size_t n_max = detail::count(c.params, "n-max", 1);
  const std::size_t env_n = detail::count(c.params, "envelope-n", 1);
  cx::GreenOptions opt;
  opt.modes = detail::count(c.params, "modes", 1);
  opt.grid_points = detail::count(c.params, "grid-points", 200);
  const double eps = cx::epsilon_scan(detail::count(c.params, "scan-points", 2));
  rep.results["epsilon"] = eps;
  rep.columns = {"n", "ratio", "excess", "log_ratio", "error", "envelope_log_ratio"};
  std::vector<std::size_t> ns;
  std::vector<double> logs;
  double prev = 0.0, min_increment = INFINITY, worst_error = 0.0;
  for (std::size_t n = 1; n <= n_max; ++n) {
    const auto r = cx::ou_harnack_ratio(p, n, opt);
    const auto env = cx::envelope_bounds(p, n, eps);
    rep.rows.push_back({num(n), num(r.ratio), num(r.excess), num(r.log_ratio), num(r.error), num(env.log_ratio)});
    if (n > 1) min_increment = std::min(min_increment, r.excess / prev - 1.0);
    worst_error = std::max(worst_error, detail::ratio(r.error, r.excess));
    ns.push_back(n);
    logs.push_back(r.log_ratio);
    prev = r.excess;
  }
  const auto env = cx::envelope_bounds(p, env_n, eps);
  rep.results["envelope_n"] = env_n;
  rep.results["envelope_ratio"] = jnum(env.ratio());
  if (ns.size() >= 2) {
    const auto fit = cx::fit_envelope_constants(p, eps, ns, logs);
    rep.results["fit"] = {{"log_mk", fit.log_mk}, {"log_c", fit.log_c}};
  }
  if (n_max >= 2) rep.check("min_relative_increment", min_increment, ">", 0.0);
  rep.check("max_relative_quadrature_error", worst_error, "<", detail::real(c.tolerances, "quadrature"));
  rep.check("envelope_ratio", env.ratio(), ">", detail::real(c.tolerances, "envelope-threshold"));
}

inline coupling::CouplingConfig coupling_config(const RunContext& c) {
  coupling::CouplingConfig cfg;
  const std::size_t n = detail::count(c.params, "trunc", 1);
  cfg.model = ou::SpectralModel::power_law(detail::real(c.params, "p"), n);
  auto pad = [n](std::vector<double> v, const char* what) {
    if (v.size() > n) throw ConfigError(std::string(what) + " has more entries than trunc");
    v.resize(n, 0.0);
    return v;
  };
  cfg.x0 = pad(detail::reals(c.params, "x0"), "x0");
  cfg.y0 = pad(detail::reals(c.params, "y0"), "y0");
  cfg.dt = detail::real(c.params, "dt");
  cfg.t_horizon = detail::real(c.params, "horizon");
  cfg.exit_radius = detail::real(c.params, "radius");
  cfg.reflection = c.params.at("reflection").get<bool>();
  cfg.trials = detail::count(c.params, "trials", 100);
  cfg.seed = c.seed;
  cfg.threads = c.threads;
  return cfg;
}

inline void run_coupling(const RunContext& c, Report& rep) {
  auto cfg = coupling_config(c);
  const auto est = coupling::estimate_coupling_probability(cfg, cfg.trials);
  auto summary = [](const coupling::CouplingEstimate& e) {
    return json{{"estimate", e.estimate}, {"ci_lo", e.ci.lo}, {"ci_hi", e.ci.hi}, {"successes", e.successes},
                {"unresolved", e.unresolved}};
  };
  rep.results["base"] = summary(est);
  rep.columns = {"run", "coordinate", "coupled", "median_T", "mean_T"};
  for (std::size_t j = 0; j < est.per_coordinate.size(); ++j) {
    const auto& s = est.per_coordinate[j];
    rep.rows.push_back({"base", num(j + 1), num(s.coupled), num(s.median_T), num(s.mean_T)});
  }
  rep.check("ci_lower_bound", est.ci.lo, ">", 0.0);
  if (c.params.at("dt-halving").get<bool>()) {
    auto half = cfg;
    half.dt = cfg.dt / 2.0;
    const auto h = coupling::estimate_coupling_probability(half, cfg.trials);
    rep.results["half_dt"] = summary(h);
    for (std::size_t j = 0; j < h.per_coordinate.size(); ++j) {
      const auto& s = h.per_coordinate[j];
      rep.rows.push_back({"half_dt", num(j + 1), num(s.coupled), num(s.median_T), num(s.mean_T)});
    }
    const double width = est.ci.hi - est.ci.lo;
    rep.check("dt_halving_shift_in_ci_widths", std::fabs(h.estimate - est.estimate) / width, "<=",
              detail::real(c.tolerances, "ci-widths"));
  }
  const std::size_t mtrials = detail::count(c.params, "marginal-trials", 0);
  if (mtrials > 0) {
    auto mc = cfg;
    mc.dt = detail::real(c.params, "marginal-dt");
    const double t = detail::real(c.params, "marginal-time");
    const auto m = coupling::coupling_marginals(mc, t, mtrials);
    double worst = 0.0;
    json marg = json::array();
    for (std::size_t j = 0; j < m.size(); ++j) {
      const auto& s = m[j];
      for (double z : {detail::ratio(std::fabs(s.mean_x - s.exact_mean_x), s.se_mean_x),
                       detail::ratio(std::fabs(s.mean_y - s.exact_mean_y), s.se_mean_y),
                       detail::ratio(std::fabs(s.var_x - s.exact_var), s.se_var_x),
                       detail::ratio(std::fabs(s.var_y - s.exact_var), s.se_var_y)})
        worst = std::max(worst, z);
      marg.push_back({{"coordinate", j + 1}, {"mean_x", s.mean_x}, {"exact_mean_x", s.exact_mean_x},
                      {"mean_y", s.mean_y}, {"exact_mean_y", s.exact_mean_y}, {"var_x", s.var_x},
                      {"var_y", s.var_y}, {"exact_var", s.exact_var}});
    }
    rep.results["marginals"] = marg;
    rep.check("marginal_max_standard_errors", worst, "<=", detail::real(c.tolerances, "standard-errors"));
  }
}

inline void run_exit_bounds(const RunContext& c, Report& rep) {
  const auto model = ou::SpectralModel::power_law(detail::real(c.params, "p"), detail::count(c.params, "trunc", 1));
  coupling::ExitBoundOptions opt;
  opt.trials = detail::count(c.params, "trials", 1);
  opt.simulated_coordinates = detail::count(c.params, "simulated-coordinates", 0);
  opt.seed = c.seed;
  opt.threads = c.threads;
  const auto tab = coupling::exit_time_bound(model, detail::real(c.params, "t0"), detail::real(c.params, "r"),
                                             detail::real(c.params, "q"), detail::real(c.params, "delta"),
                                             detail::real(c.params, "C"), opt);
  rep.results["C"] = tab.C;
  rep.results["c_fit"] = tab.c_fit;
  rep.results["normalisation"] = tab.normalisation;
  rep.results["tail_ratio"] = tab.tail_ratio();
  rep.columns = {"n", "a", "d", "bound", "empirical", "ci_lo", "ci_hi", "mean_sup", "dt"};
  double worst = -INFINITY;
  for (const auto& row : tab.rows) {
    const bool e = row.empirical.has_value();
    rep.rows.push_back({num(row.n), num(row.a), num(row.d), num(row.bound), e ? num(*row.empirical) : "",
                        e ? num(row.empirical_ci.lo) : "", e ? num(row.empirical_ci.hi) : "", num(row.mean_sup),
                        num(row.dt)});
    if (e) worst = std::max(worst, *row.empirical - row.bound);
  }
  rep.check("normalisation_error", std::fabs(tab.normalisation - 1.0), "<=", detail::real(c.tolerances, "normalisation"));
  rep.check("tail_ratio", tab.tail_ratio(), "<", detail::real(c.tolerances, "tail"));
  if (std::isfinite(worst)) rep.check("max_empirical_minus_bound", worst, "<=", 0.0);
}

inline void run_gamma_verify(const RunContext& c, Report& rep) {
  using namespace calculus;
  const std::size_t draws = detail::count(c.params, "draws", 1);
  const int m_max = static_cast<int>(detail::count(c.params, "m", 1));
  const int d_max = static_cast<int>(detail::count(c.params, "d", 1));
  if (d_max > kMaxJetDim) throw ConfigError("gamma-verify: d exceeds the supported dimension");
  const double jet_mult = detail::real(c.tolerances, "jet-multiple");
  rep.columns = {"section", "draw", "d", "m", "value", "residual", "allowed"};
  auto row = [&](const char* s, std::size_t i, int d, int m, double v, double res, double allowed) {
    rep.rows.push_back({s, num(i), num(d), num(m), num(v), num(res), num(allowed)});
  };

  // both routes for Γ and Γ₂
  {
    auto gen = detail::section_rng(c.seed, 1);
    double worst = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
      const int d = 1 + static_cast<int>(i % static_cast<std::size_t>(d_max));
      const int m = 1 + static_cast<int>((i / static_cast<std::size_t>(d_max)) % static_cast<std::size_t>(m_max));
      const auto fields = random_separable_fields(d, m, gen);
      const auto f = random_cubic(d, gen), g = random_cubic(d, gen);
      const auto p = random_point(d, gen);
      const auto g1 = gamma(f, g, fields, p), g2 = gamma2(f, fields, p);
      worst = std::max({worst, detail::ratio(g1.residual(), g1.error_scale), detail::ratio(g2.residual(), g2.error_scale)});
      row("gamma", i, d, m, g1.value, g1.residual(), jet_mult * g1.error_scale);
      row("gamma2", i, d, m, g2.value, g2.residual(), jet_mult * g2.error_scale);
    }
    rep.check("dual_route_error_multiple", worst, "<=", jet_mult);
  }
  // finite-difference route
  {
    auto gen = detail::section_rng(c.seed, 2);
    double worst = 0.0;
    const std::size_t n = detail::count(c.params, "fd-draws", 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int d = 1 + static_cast<int>(i % static_cast<std::size_t>(d_max));
      const int m = 1 + static_cast<int>((i / static_cast<std::size_t>(d_max)) % static_cast<std::size_t>(m_max));
      const auto fields = random_separable_fields(d, m, gen);
      const auto f = random_cubic(d, gen), g = random_cubic(d, gen);
      const auto p = random_point(d, gen);
      const auto jg = gamma(f, g, fields, p);
      const auto fg = fd_gamma(f, g, fields, p);
      const auto j2 = gamma2(f, fields, p);
      const auto f2 = fd_gamma2(f, fields, p);
      const double a1 = jet_mult * (fg.error + jg.error_scale), a2 = jet_mult * (f2.error + j2.error_scale);
      worst = std::max({worst, detail::ratio(std::fabs(fg.value - jg.value), a1), detail::ratio(std::fabs(f2.value - j2.value), a2)});
      row("fd_gamma", i, d, m, fg.value, std::fabs(fg.value - jg.value), a1);
      row("fd_gamma2", i, d, m, f2.value, std::fabs(f2.value - j2.value), a2);
    }
    if (n > 0) rep.check("fd_route_relative_disagreement", worst, "<=", 1.0);
  }
  // one field: Γ₂(f) = (Lf)²
  {
    auto gen = detail::section_rng(c.seed, 3);
    double worst = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
      const int d = 1 + static_cast<int>(i % static_cast<std::size_t>(d_max));
      const auto fields = random_general_field(d, gen);
      const auto f = random_cubic(d, gen);
      const auto p = random_point(d, gen);
      const auto g2 = gamma2(f, fields, p);
      const double lf = apply_L(f, fields, p).value;
      const double allowed = jet_mult * g2.error_scale + 1e-13 * lf * lf;
      const double res = std::fabs(g2.defining - lf * lf);
      worst = std::max(worst, detail::ratio(res, allowed));
      row("single_field", i, d, 1, g2.defining, res, allowed);
    }
    rep.check("single_field_residual_over_tolerance", worst, "<=", 1.0);
  }
  // CD(0, m)
  {
    const double rel = detail::real(c.tolerances, "cd-relative");
    json per_m = json::object();
    for (int m = 1; m <= m_max; ++m) {
      auto gen = detail::section_rng(c.seed, 10 + static_cast<std::uint64_t>(m));
      double worst = INFINITY, worst_eq = 0.0;
      for (std::size_t i = 0; i < draws; ++i) {
        const int d = 1 + static_cast<int>(i % static_cast<std::size_t>(d_max));
        const auto fields = random_separable_fields(d, m, gen);
        const auto cd = cd_inequality_check(random_cubic(d, gen), fields, random_point(d, gen), m);
        const double s = cd.scale > 0.0 ? cd.slack / cd.scale : (cd.slack < 0.0 ? -INFINITY : 0.0);
        worst = std::min(worst, s);
        if (m == 1) worst_eq = std::max(worst_eq, detail::ratio(std::fabs(cd.slack), cd.tolerance));
        row("cd", i, d, m, cd.gamma2, cd.slack, -rel * cd.scale);
      }
      per_m[std::to_string(m)] = worst;
      rep.check("cd_m" + std::to_string(m) + "_min_relative_slack", worst, ">=", -rel);
      if (m == 1) rep.check("cd_m1_equality_over_tolerance", worst_eq, "<=", 1.0);
    }
    rep.results["cd_min_relative_slack"] = per_m;
  }
  // commutators of commuting fields
  if (m_max >= 2) {
    auto gen = detail::section_rng(c.seed, 4);
    double worst = 0.0;
    const std::size_t n = detail::count(c.params, "commutator-draws", 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int d = 1 + static_cast<int>(i % static_cast<std::size_t>(d_max));
      const int m = 2 + static_cast<int>(i % static_cast<std::size_t>(m_max - 1));
      const auto fields = random_separable_fields(d, m, gen);
      const auto f = random_cubic(d, gen);
      const auto p = random_point(d, gen);
      double v = 0.0, allowed = 0.0, r = 0.0;
      for (int k = 0; k < m; ++k)
        for (int l = 0; l < m; ++l) {
          const auto cm = commutator_check(k, l, f, fields, p);
          const double q = detail::ratio(cm.value, jet_mult * cm.error_scale);
          if (q >= r) {
            r = q;
            v = cm.value;
            allowed = jet_mult * cm.error_scale;
          }
        }
      worst = std::max(worst, r);
      row("commutator", i, d, m, v, v, allowed);
    }
    if (n > 0) rep.check("commutator_over_tolerance", worst, "<=", 1.0);
  }
  // chain rules
  {
    auto gen = detail::section_rng(c.seed, 5);
    const std::size_t n = detail::count(c.params, "chain-draws", 0);
    const double tol = detail::real(c.tolerances, "chain-rule"), ltol = detail::real(c.tolerances, "log-chain-rule");
    const Expr id = parse_expression("u", std::vector<std::string>{"u"});
    const Expr sq = parse_expression("u^2", std::vector<std::string>{"u"});
    const Expr lg = parse_expression("log(u)", std::vector<std::string>{"u"});
    std::uniform_real_distribution<double> U(0.0, 1.0), W(0.5, 1.5);
    double wl = 0.0, wg = 0.0, w2 = 0.0, wlog = 0.0, wid = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const int d = 1 + static_cast<int>(i % static_cast<std::size_t>(d_max));
      const int m = 1 + static_cast<int>(i % static_cast<std::size_t>(m_max));
      const auto fields = random_separable_fields(d, m, gen);
      const auto f = random_cubic(d, gen), g = random_cubic(d, gen);
      const auto p = random_point(d, gen);
      const auto ri = chain_rule_checks(f, id, fields, p, g);
      wid = std::max({wid, ri.L_residual, ri.gamma_residual, ri.gamma2_residual});
      const auto rs = chain_rule_checks(f, sq, fields, p, g);
      wl = std::max(wl, detail::ratio(rs.L_residual, tol * rs.L_scale));
      wg = std::max(wg, detail::ratio(rs.gamma_residual, tol * rs.gamma_scale));
      w2 = std::max(w2, detail::ratio(rs.gamma2_residual, tol * rs.gamma2_scale));
      row("chain_square_L", i, d, m, 0.0, rs.L_residual, tol * rs.L_scale);
      // a positive function for the log case
      const Expr pos = Expr(2.0 + U(gen)) + sin(Expr(W(gen)) * Expr::var(0) + Expr(6.0 * U(gen)));
      const auto rl = chain_rule_checks(pos, lg, fields, p, g, true);
      wlog = std::max({wlog, detail::ratio(*rl.log_residual, ltol * rl.log_scale),
                       detail::ratio(rl.gamma2_residual, ltol * rl.gamma2_scale)});
      row("chain_log", i, d, m, 0.0, *rl.log_residual, ltol * rl.log_scale);
    }
    if (n > 0) {
      rep.check("chain_identity_max_residual", wid, "==", 0.0);
      rep.check("chain_L_over_tolerance", wl, "<=", 1.0);
      rep.check("chain_gamma_over_tolerance", wg, "<=", 1.0);
      rep.check("chain_gamma2_over_tolerance", w2, "<=", 1.0);
      rep.check("chain_log_gamma2_over_tolerance", wlog, "<=", 1.0);
    }
  }
}

inline void run_li_yau(const RunContext& c, Report& rep) {
  using calculus::Expr;
  const auto times = detail::reals(c.params, "times");
  const double half = detail::real(c.params, "half-width");
  const int cells = static_cast<int>(detail::count(c.params, "cells", 10));
  rep.columns = {"case", "t", "x", "L_log_u", "bound", "margin", "exact_margin", "differentiation_error"};
  // Gaussian datum under d²/dx²
  {
    const double s2 = detail::real(c.params, "gaussian-variance");
    const auto unit = calculus::VectorFieldSet::constant({{1.0}});
    const Expr bump = calculus::exp(-(Expr::var(0) * Expr::var(0)) / (2.0 * s2));
    const heat::GridHeatSolution g(unit, bump, times, detail::line(half, cells));
    double worst = 0.0;
    for (double t : times)
      for (double p : detail::reals(c.params, "gaussian-probes")) {
        const auto r = heat::li_yau_check(unit, g, t, calculus::Point{p});
        const double exact = 1.0 / (2.0 * t) - 1.0 / (s2 + 2.0 * t);
        worst = std::max(worst, std::fabs(r.margin - exact));
        rep.rows.push_back({"gaussian", num(t), num(p), num(r.value), num(r.bound), num(r.margin), num(exact),
                            num(r.differentiation_error)});
      }
    rep.results["gaussian_max_margin_error"] = worst;
    rep.check("gaussian_margin_error", worst, "<=", detail::real(c.tolerances, "gaussian"));
  }
  // configured fields and datum
  {
    const auto fields = detail::fields(c.params, "fields");
    if (fields.dim() != 1) throw ConfigError("li-yau: fields must be one-dimensional for the grid scheme sweep");
    const Expr f = calculus::parse_expression(c.params.at("datum").get<std::string>(), 1);
    const double dts = detail::real(c.params, "dt-step");
    std::vector<double> all;
    for (double t : times)
      for (double o : {-dts, 0.0, dts}) all.push_back(t + o);
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    const heat::GridHeatSolution g(fields, f, all, detail::line(half, cells));
    const double floor = detail::real(c.tolerances, "margin-floor");
    const double mult = detail::real(c.tolerances, "differentiation-multiple");
    const double lo = detail::real(c.params, "probe-lo"), hi = detail::real(c.params, "probe-hi");
    const std::size_t probes = detail::count(c.params, "probes", 2);
    double worst = INFINITY, min_margin = INFINITY, min_dt = INFINITY;
    std::size_t n = 0;
    for (double t : times)
      for (std::size_t k = 0; k < probes; ++k) {
        const double p = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(probes - 1);
        const auto r = heat::li_yau_check(fields, g, t, calculus::Point{p});
        const double allowed = std::max(floor, mult * r.differentiation_error);
        worst = std::min(worst, r.margin + allowed);
        min_margin = std::min(min_margin, r.margin);
        const auto dl = heat::dt_log_check(fields, g, t, calculus::Point{p}, dts);
        min_dt = std::min(min_dt, dl.slack + allowed);
        rep.rows.push_back({"configured", num(t), num(p), num(r.value), num(r.bound), num(r.margin), "",
                            num(r.differentiation_error)});
        ++n;
      }
    rep.results["configured_probes"] = n;
    rep.results["configured_min_margin"] = min_margin;
    rep.check("configured_margin_plus_tolerance", worst, ">=", 0.0);
    rep.check("configured_dt_log_slack_plus_tolerance", min_dt, ">=", 0.0);
  }
}

inline void run_harnack(const RunContext& c, Report& rep) {
  using calculus::Expr;
  heat::HarnackOptions opt;
  opt.tolerance = detail::real(c.tolerances, "harnack");
  rep.columns = {"case", "t1", "t2", "x", "y", "T", "lhs", "rhs", "slack"};
  auto record = [&](const char* name, double t1, double t2, double x, double y, const heat::HarnackResult& r) {
    rep.rows.push_back({name, num(t1), num(t2), num(x), num(y), num(r.T), num(r.lhs), num(r.rhs), num(r.slack)});
  };
  const std::size_t min_probes = detail::count(c.tolerances, "min-probes", 0);
  // closed form for a ≡ 1
  {
    const double s2 = detail::real(c.params, "closed-variance");
    const auto unit = calculus::VectorFieldSet::constant({{1.0}});
    const heat::FunctionHeatField u(
        1,
        [s2](double t, std::span<const double> z) {
          const double v = s2 + 2.0 * t;
          return std::sqrt(s2 / v) * std::exp(-z[0] * z[0] / (2.0 * v));
        },
        1.0);
    const auto points = detail::reals(c.params, "closed-points");
    std::size_t n = 0, bad = 0;
    double min_slack = INFINITY;
    for (auto [t1, t2] : detail::pairs(c.params, "closed-pairs"))
      for (double a : points)
        for (double b : points) {
          const auto r = heat::parabolic_harnack_check(unit, u, t1, t2, calculus::Point{a}, calculus::Point{b}, opt);
          record("closed_form", t1, t2, a, b, r);
          min_slack = std::min(min_slack, r.slack);
          bad += r.satisfied ? 0 : 1;
          ++n;
        }
    rep.results["closed_form"] = {{"probes", n}, {"min_slack", jnum(min_slack)}, {"violations", bad}};
    rep.check("closed_form_probes", static_cast<double>(n), ">=", static_cast<double>(min_probes));
    rep.check("closed_form_violations", static_cast<double>(bad), "==", 0.0);
  }
  // configured field on the grid scheme
  {
    const auto fields = detail::fields(c.params, "fields");
    if (fields.dim() != 1 || fields.m() != 1) throw ConfigError("harnack: fields must be a single one-dimensional field");
    const Expr f = calculus::parse_expression(c.params.at("datum").get<std::string>(), 1);
    auto ts = detail::reals(c.params, "times");
    std::sort(ts.begin(), ts.end());
    if (ts.size() < 2) throw ConfigError("harnack: need at least two times");
    const heat::GridHeatSolution g(fields, f, ts, detail::line(detail::real(c.params, "half-width"),
                                                               static_cast<int>(detail::count(c.params, "cells", 10))));
    auto gen = detail::section_rng(c.seed, 6);
    const double range = detail::real(c.params, "probe-range");
    std::uniform_real_distribution<double> P(-range, range);
    std::uniform_int_distribution<std::size_t> I(0, ts.size() - 1);
    const std::size_t probes = detail::count(c.params, "probes", 0);
    std::size_t bad = 0;
    double min_slack = INFINITY;
    for (std::size_t k = 0; k < probes; ++k) {
      std::size_t i = I(gen), j = I(gen);
      while (j == i) j = I(gen);
      if (i > j) std::swap(i, j);
      const double a = P(gen), b = P(gen);
      const auto r = heat::parabolic_harnack_check(fields, g, ts[i], ts[j], calculus::Point{a}, calculus::Point{b}, opt);
      record("configured", ts[i], ts[j], a, b, r);
      min_slack = std::min(min_slack, r.slack);
      bad += r.satisfied ? 0 : 1;
    }
    rep.results["configured"] = {{"probes", probes}, {"min_slack", jnum(min_slack)}, {"violations", bad}};
    rep.check("configured_probes", static_cast<double>(probes), ">=", static_cast<double>(min_probes));
    rep.check("configured_violations", static_cast<double>(bad), "==", 0.0);
  }
}

inline void run_distance(const RunContext& c, Report& rep) {
  using calculus::Point;
  using calculus::VectorFieldSet;
  rep.columns = {"case", "target", "status", "T", "expected", "witness", "canonical"};
  auto pt = [](const Point& p) {
    std::string s;
    for (std::size_t i = 0; i < p.size(); ++i) s += (i ? " " : "") + num(p[i]);
    return s;
  };
  const double ode_tol = detail::real(c.params, "ode-tolerance");
  // constant field: y = x + T A
  {
    const auto a = detail::reals(c.params, "straight-field");
    const auto x = detail::reals(c.params, "straight-start");
    if (a.size() != x.size() || a.empty()) throw ConfigError("distance: straight-field and straight-start need equal sizes");
    const double T = detail::real(c.params, "straight-time");
    Point y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + T * a[i];
    const auto fields = VectorFieldSet::constant({a});
    const auto r = heat::arc_distance(fields, x, y, ode_tol, 100.0 + 2.0 * T);
    const double err = r.reachable() ? std::fabs(*r.T - T) : INFINITY;
    rep.rows.push_back({"straight", pt(y), heat::to_string(r.status), r.T ? num(*r.T) : "", num(T), "", ""});
    rep.check("straight_line_error", err, "<=", detail::real(c.tolerances, "straight"));
    const auto off = detail::reals(c.params, "off-line-target");
    if (off.size() != x.size()) throw ConfigError("distance: off-line-target has the wrong size");
    const auto miss = heat::arc_distance(fields, x, off, ode_tol, 100.0);
    rep.rows.push_back({"off_line", pt(off), heat::to_string(miss.status), "", "inf", "", ""});
    rep.check("off_line_unreachable", miss.status == heat::Reachability::Unreachable ? 1.0 : 0.0, "==", 1.0);
  }
  // γ̇ = 1 + γ², T = atan(b) − atan(a)
  {
    const auto iv = detail::reals(c.params, "nonlinear-interval");
    if (iv.size() != 2 || !(iv[1] > iv[0])) throw ConfigError("distance: nonlinear-interval must be [a, b] with a < b");
    const VectorFieldSet f(1, {{calculus::Expr(1.0) + calculus::Expr::var(0) * calculus::Expr::var(0)}});
    const double expected = std::atan(iv[1]) - std::atan(iv[0]);
    const auto r = heat::arc_distance(f, Point{iv[0]}, Point{iv[1]}, detail::real(c.params, "nonlinear-ode-tolerance"),
                                      10.0);
    const double err = r.reachable() ? std::fabs(*r.T - expected) : INFINITY;
    rep.rows.push_back({"nonlinear", num(iv[1]), heat::to_string(r.status), r.T ? num(*r.T) : "", num(expected), "", ""});
    rep.check("nonlinear_error", err, "<=", detail::real(c.tolerances, "nonlinear"));
  }
  // witnesses along a curved flow line
  {
    const auto fields = detail::fields(c.params, "witness-field");
    if (fields.m() != 1) throw ConfigError("distance: witness-field must be a single field");
    const auto x = detail::reals(c.params, "witness-start");
    if (x.size() != static_cast<std::size_t>(fields.dim())) throw ConfigError("distance: witness-start has the wrong size");
    const heat::ArcOptions o{detail::real(c.params, "witness-ode-tolerance"), 50.0};
    const int count = static_cast<int>(detail::count(c.params, "witness-count", 0));
    const std::size_t targets = detail::count(c.params, "witness-targets", 1);
    const double horizon = detail::real(c.params, "witness-horizon");
    // targets are points of the flow line at evenly spaced times
    Point far(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) far[i] = x[i] + 1e6;
    const auto probe = heat::arc_distance(fields, x, far, heat::ArcOptions{o.ode_tolerance, horizon});
    if (probe.path.size() < targets + 1) throw NumericalError("distance: flow path too short for the witness targets");
    const double tol = detail::real(c.tolerances, "witness");
    double worst_excess = -INFINITY, worst_gap = 0.0;
    for (std::size_t k = 1; k <= targets; ++k) {
      const std::size_t j = k * (probe.path.size() - 1) / targets;
      const auto w = heat::intrinsic_distance_lower_bound(fields, x, probe.path[j], count, o, c.seed + k);
      if (!w.defined) throw NumericalError("distance: witness path undefined for a point on the flow line");
      worst_excess = std::max(worst_excess, w.value - *w.arc.T);
      worst_gap = std::max(worst_gap, std::fabs(w.canonical - *w.arc.T));
      rep.rows.push_back({"witness", pt(probe.path[j]), heat::to_string(w.arc.status), num(*w.arc.T), "", num(w.value),
                          num(w.canonical)});
    }
    rep.results["witness_targets"] = targets;
    rep.check("witness_minus_arc", worst_excess, "<=", tol);
    rep.check("canonical_witness_gap", worst_gap, "<=", tol);
  }
}

// ---------------------------------------------------------------------------

inline const std::vector<Experiment>& experiments() {
  static const std::vector<Experiment> table = [] {
    const json fields_1d = json::array({json::array({"2+sin(x1)"})});
    std::vector<Experiment> t;
    t.push_back({"bm-ratio",
                 "Brownian Harnack ratio (3/4)^(2-n) over a dimension range",
                 {{"n-min", 3, "smallest dimension"}, {"n-max", 64, "largest dimension"}},
                 {{"closed-form", 1e-14, "relative error against the potential ratio"},
                  {"step", 1.6e-15, "absolute error of ratio(n+1)/ratio(n) against 4/3"}},
                 run_bm_ratio});
    t.push_back({"ou-green-ratio",
                 "Green-function Harnack ratio for the killed OU product process",
                 {{"p", 2.0, "exponent in a_n = n^p"},
                  {"n-max", 4, "largest truncation"},
                  {"modes", 400, "Mercer modes"},
                  {"grid-points", 2400, "cells of the eigenvalue mesh"},
                  {"envelope-n", 4, "dimension at which the envelope ratio is tested"},
                  {"scan-points", 1000000, "grid points of the epsilon scan"}},
                 {{"quadrature", 1e-3, "allowed error estimate relative to the ratio excess"},
                  {"envelope-threshold", 1e3, "lower limit for the envelope ratio"}},
                 run_ou_green_ratio});
    t.push_back({"coupling",
                 "coordinate-wise coupling probability before exit",
                 {{"trunc", 5, "number of coordinates"},
                  {"p", 6.0, "exponent in a_n = n^p"},
                  {"trials", 10000, "coupling trials"},
                  {"dt", 1e-4, "time step"},
                  {"horizon", 5.0, "time horizon"},
                  {"radius", 2.0, "exit radius"},
                  {"x0", json::array({0.5}), "start of X, padded with zeros"},
                  {"y0", json::array({-0.5}), "start of Y, padded with zeros"},
                  {"reflection", false, "reflection coupling instead of independent drivers"},
                  {"dt-halving", true, "repeat with dt/2"},
                  {"marginal-trials", 4000, "paths for the marginal law check, 0 to skip"},
                  {"marginal-dt", 1e-3, "time step for the marginal law check"},
                  {"marginal-time", 2.5, "time of the marginal law check"}},
                 {{"ci-widths", 2.0, "allowed shift under dt halving, in base CI widths"},
                  {"standard-errors", 3.0, "allowed marginal deviation in standard errors"}},
                 run_coupling});
    t.push_back({"exit-bounds",
                 "per-coordinate exit-time bounds and their summability",
                 {{"p", 6.0, "exponent in a_n = n^p"},
                  {"trunc", 10, "number of table rows"},
                  {"t0", 0.05, "time window"},
                  {"r", 2.0, "outer radius"},
                  {"q", 1.0, "inner radius"},
                  {"delta", 0.5, "decay exponent of the radius split"},
                  {"C", 0.0, "normalising constant, 0 selects the exact value"},
                  {"trials", 10000, "paths per simulated coordinate"},
                  {"simulated-coordinates", 10, "coordinates with an empirical column"}},
                 {{"normalisation", 1e-10, "absolute error of the normalisation"},
                  {"tail", 1e-3, "upper limit for the tail ratio"}},
                 run_exit_bounds});
    t.push_back({"gamma-verify",
                 "randomized checks of the carre du champ calculus",
                 {{"draws", 500, "draws per section"},
                  {"m", 3, "largest number of fields"},
                  {"d", 3, "largest dimension"},
                  {"fd-draws", 60, "draws for the finite-difference route"},
                  {"commutator-draws", 100, "draws for the commutator check"},
                  {"chain-draws", 100, "draws for the chain rules"}},
                 {{"jet-multiple", 10.0, "allowed multiple of the rounding scale"},
                  {"cd-relative", 1e-6, "allowed negative CD slack relative to its scale"},
                  {"chain-rule", 1e-6, "relative tolerance of the chain rules"},
                  {"log-chain-rule", 1e-5, "relative tolerance of the logarithmic chain rule"}},
                 run_gamma_verify});
    t.push_back({"li-yau",
                 "Li-Yau margin of log P_t f on the grid scheme",
                 {{"times", json::array({0.1, 0.5, 1.0}), "probe times"},
                  {"half-width", 10.0, "grid covers [-half-width, half-width]"},
                  {"cells", 1000, "grid cells"},
                  {"gaussian-variance", 1.0, "variance of the Gaussian datum"},
                  {"gaussian-probes", json::array({-1.0, 0.0, 0.3, 1.5}), "probe points of the Gaussian case"},
                  {"fields", fields_1d, "field components in x1"},
                  {"datum", "0.2 + exp(-x1^2/0.8) + 0.5*exp(-(x1-1)^2/0.3)", "initial datum in x1"},
                  {"probe-lo", -2.0, "first probe point"},
                  {"probe-hi", 2.0, "last probe point"},
                  {"probes", 17, "probe points per time"},
                  {"dt-step", 1e-3, "time step of the time-derivative check"}},
                 {{"gaussian", 1e-3, "absolute margin error in the Gaussian case"},
                  {"margin-floor", 1e-6, "smallest allowed negative margin"},
                  {"differentiation-multiple", 10.0, "allowed multiple of the differentiation error"}},
                 run_li_yau});
    t.push_back({"harnack",
                 "parabolic Harnack inequality along flow lines",
                 {{"closed-variance", 0.5, "variance of the closed-form Gaussian datum"},
                  {"closed-pairs", json::array({json::array({0.1, 0.2}), json::array({0.25, 0.5}), json::array({0.5, 1.0})}),
                   "time pairs [t1, t2] of the closed-form sweep"},
                  {"closed-points", json::array({-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5}), "probe points of the closed-form sweep"},
                  {"fields", fields_1d, "field components in x1"},
                  {"datum", "0.1 + exp(-x1^2)", "initial datum in x1"},
                  {"times", json::array({0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0}), "snapshot times"},
                  {"half-width", 10.0, "grid covers [-half-width, half-width]"},
                  {"cells", 1000, "grid cells"},
                  {"probes", 50, "random probes of the configured sweep"},
                  {"probe-range", 2.0, "probe points are uniform on [-range, range]"}},
                 {{"harnack", 1e-6, "allowed excess of lhs over rhs"}, {"min-probes", 50, "probes required per sweep"}},
                 run_harnack});
    t.push_back({"distance",
                 "flow-time distance and witness lower bounds",
                 {{"ode-tolerance", 1e-8, "ODE tolerance of the straight-line case"},
                  {"straight-field", json::array({1.0, 1.0}), "constant field"},
                  {"straight-start", json::array({0.0, 0.0}), "start point"},
                  {"straight-time", 2.0, "flow time to the target"},
                  {"off-line-target", json::array({1.0, 2.0}), "target off the flow line"},
                  {"nonlinear-interval", json::array({0.0, 1.0}), "interval [a, b] for the field 1 + x1^2"},
                  {"nonlinear-ode-tolerance", 1e-10, "ODE tolerance of the nonlinear case"},
                  {"witness-field", json::array({json::array({"2+sin(x2)", "1.5+0.5*cos(x1)"})}), "field for the witness check"},
                  {"witness-start", json::array({0.0, 0.0}), "start point of the witness check"},
                  {"witness-horizon", 20.0, "flow time spanned by the witness targets"},
                  {"witness-targets", 8, "points of the flow line tested"},
                  {"witness-count", 32, "random linear witnesses per target"},
                  {"witness-ode-tolerance", 1e-9, "ODE tolerance of the witness check"}},
                 {{"straight", 1e-8, "absolute error of the straight-line case"},
                  {"nonlinear", 1e-6, "absolute error of the nonlinear case"},
                  {"witness", 1e-4, "witness slack and canonical witness gap"}},
                 run_distance});
    return t;
  }();
  return table;
}

inline std::vector<std::string> experiment_names() {
  std::vector<std::string> n;
  for (const auto& e : experiments()) n.push_back(e.name);
  return n;
}

inline const Experiment* find_experiment(const std::string& name) {
  for (const auto& e : experiments())
    if (e.name == name) return &e;
  return nullptr;
}

struct RunOutcome {
  int status = kExitOk;
  std::optional<Artifacts> artifacts;  // absent when the configuration was rejected
  std::string message;
  double seconds = 0.0;
};

inline RunOutcome execute(const Experiment& e, const RunConfig& rc) {
  RunOutcome out;
  RunContext ctx;
  ctx.seed = rc.seed;
  ctx.threads = rc.threads;
  try {
    ctx.params = detail::resolve_table(e.params, rc.parameters, "parameter");
    ctx.tolerances = detail::resolve_table(e.tolerances, rc.tolerances, "tolerance");
  } catch (const ConfigError& err) {
    out.status = kExitConfig;
    out.message = err.what();
    return out;
  }
  Report rep;
  std::string status = "ok";
  const auto start = std::chrono::steady_clock::now();
  try {
    e.run(ctx, rep);
    out.status = rep.passed() ? kExitOk : kExitCheckFailed;
  } catch (const json::exception& err) {
    out.status = kExitConfig;
    out.message = std::string("invalid parameter: ") + err.what();
  } catch (const ConfigError& err) {
    out.status = kExitConfig;
    out.message = err.what();
  } catch (const DomainError& err) {
    out.status = kExitConfig;
    out.message = err.what();
  } catch (const PreconditionError& err) {
    out.status = kExitConfig;
    out.message = err.what();
  } catch (const IndexError& err) {
    out.status = kExitConfig;
    out.message = err.what();
  } catch (const std::exception& err) {
    out.status = kExitNumerical;
    out.message = err.what();
    status = "numerical-failure";
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (out.status != kExitConfig) out.artifacts = render(e, ctx, &rep, status, out.message);
  return out;
}

}  // namespace hlab::cli
