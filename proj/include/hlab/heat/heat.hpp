#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hlab/core/error.hpp"
#include "hlab/core/parallel.hpp"
#include "hlab/core/rng.hpp"
#include "hlab/core/stats.hpp"
#include "hlab/heat/sde.hpp"

namespace hlab::heat {

/// u(t, ·) ≈ P_t f, queried pointwise.
class HeatField {
 public:
  virtual ~HeatField() = default;
  virtual int dim() const = 0;
  virtual double value(double t, std::span<const double> x) const = 0;
  /// Reference magnitude of u(t, ·) for the positivity floor.
  virtual double scale(double t) const = 0;
  /// Spatial step for numerical differentiation of the field.
  virtual double derivative_step() const = 0;
};

/// Wraps a closed form u(t, x).
class FunctionHeatField final : public HeatField {
 public:
  using Fn = std::function<double(double, std::span<const double>)>;
  FunctionHeatField(int d, Fn u, double scale, double step = 1e-3) : d_(d), u_(std::move(u)), scale_(scale), step_(step) {}
  int dim() const override { return d_; }
  double value(double t, std::span<const double> x) const override { return u_(t, x); }
  double scale(double) const override { return scale_; }
  double derivative_step() const override { return step_; }

 private:
  int d_;
  Fn u_;
  double scale_, step_;
};

struct GridDomain {
  std::vector<double> lo, hi;
  std::vector<int> cells;
};

struct GridOptions {
  double cfl = 0.9;
  double dt = 0.0;  // 0 selects cfl × the stability limit
};

/// Explicit Euler in time, second-order differences in space, boundary nodes
/// held at the initial datum. In 1-D the operator is written in flux form
/// Σ_k a_k (a_k u′)′ with midpoint coefficients, which keeps the scheme
/// monotone under the step limit. In 2-D the nondivergence form
/// Σ_{ij} D_ij ∂_ij u + F·∇u is used with central differences.
class GridHeatSolution final : public HeatField {
 public:
  GridHeatSolution(const VectorFieldSet& fields, const Expr& f, std::vector<double> times, GridDomain dom,
                   GridOptions opt = {})
      : d_(fields.dim()), dom_(std::move(dom)), times_(std::move(times)) {
    if (d_ > 2) throw ConfigError("grid scheme supports d ≤ 2");
    if (dom_.lo.size() != static_cast<std::size_t>(d_) || dom_.hi.size() != dom_.lo.size() ||
        dom_.cells.size() != dom_.lo.size())
      throw ConfigError("grid domain dimension does not match the fields");
    for (int i = 0; i < d_; ++i) {
      if (!(dom_.hi[ui(i)] > dom_.lo[ui(i)]) || dom_.cells[ui(i)] < 4) throw ConfigError("grid domain is degenerate");
      n_[ui(i)] = static_cast<std::size_t>(dom_.cells[ui(i)]) + 1;
      h_[ui(i)] = (dom_.hi[ui(i)] - dom_.lo[ui(i)]) / dom_.cells[ui(i)];
    }
    if (times_.empty()) throw ConfigError("grid scheme needs at least one output time");
    std::sort(times_.begin(), times_.end());
    if (!(times_.front() >= 0.0)) throw ConfigError("output times must be nonnegative");
    setup(fields, f);
    const double limit = 1.0 / max_rate_;
    dt_ = opt.dt > 0.0 ? opt.dt : opt.cfl * limit;
    if (dt_ > limit || !(opt.cfl > 0.0 && opt.cfl <= 1.0))
      throw ConfigError("grid time step " + std::to_string(dt_) + " violates the stability limit " + std::to_string(limit));
    run();
  }

  int dim() const override { return d_; }
  double dt() const { return dt_; }
  double spacing(int i) const { return h_[ui(i)]; }
  std::size_t nodes(int i) const { return n_[ui(i)]; }
  const std::vector<double>& times() const { return times_; }
  double min_value() const { return min_value_; }
  const std::vector<double>& snapshot(double t) const { return snaps_[slot(t)]; }
  double node(int i, std::size_t j) const { return dom_.lo[ui(i)] + static_cast<double>(j) * h_[ui(i)]; }

  double value(double t, std::span<const double> x) const override {
    if (x.size() != static_cast<std::size_t>(d_)) throw DomainError("grid: point has the wrong dimension");
    const auto& u = snaps_[slot(t)];
    std::array<std::size_t, 2> base{};
    std::array<std::array<double, 4>, 2> w{};
    for (int i = 0; i < d_; ++i) {
      const double s = (x[ui(i)] - dom_.lo[ui(i)]) / h_[ui(i)];
      if (s < 0.0 || s > static_cast<double>(n_[ui(i)] - 1)) throw DomainError("grid: point outside the domain");
      const auto j = static_cast<std::ptrdiff_t>(std::floor(s)) - 1;
      const auto b = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(n_[ui(i)]) - 4));
      base[ui(i)] = b;
      // cubic Lagrange weights on nodes b..b+3
      const double r = s - static_cast<double>(b);
      for (int p = 0; p < 4; ++p) {
        double v = 1.0;
        for (int q = 0; q < 4; ++q)
          if (q != p) v *= (r - q) / static_cast<double>(p - q);
        w[ui(i)][static_cast<std::size_t>(p)] = v;
      }
    }
    if (d_ == 1) {
      double acc = 0.0;
      for (std::size_t p = 0; p < 4; ++p) acc += w[0][p] * u[base[0] + p];
      return acc;
    }
    double acc = 0.0;
    for (std::size_t p = 0; p < 4; ++p)
      for (std::size_t q = 0; q < 4; ++q) acc += w[0][p] * w[1][q] * u[index(base[0] + p, base[1] + q)];
    return acc;
  }

  double scale(double t) const override {
    const auto& u = snaps_[slot(t)];
    return *std::max_element(u.begin(), u.end());
  }
  double derivative_step() const override { return *std::min_element(h_.begin(), h_.begin() + d_); }

  /// Σ_j u_j h/a(x_j): mass of u against the invariant measure dx/a, d = m = 1.
  double invariant_mass(double t) const {
    if (d_ != 1 || a_node_.size() != 1) throw DomainError("invariant_mass needs d = m = 1");
    const auto& u = snaps_[slot(t)];
    double s = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) s += u[j] * h_[0] / a_node_[0][j];
    return s;
  }

 private:
  int d_;
  GridDomain dom_;
  std::vector<double> times_;
  std::array<std::size_t, 2> n_{1, 1};
  std::array<double, 2> h_{1.0, 1.0};
  double dt_ = 0.0, max_rate_ = 0.0, min_value_ = 0.0;
  std::vector<double> u0_;
  std::vector<std::vector<double>> snaps_;
  // 1-D flux form
  std::vector<std::vector<double>> a_node_, a_mid_;
  // 2-D nondivergence form
  std::vector<double> D11_, D12_, D22_, F1_, F2_;

  static std::size_t ui(int i) { return static_cast<std::size_t>(i); }
  std::size_t index(std::size_t i, std::size_t j) const { return i + n_[0] * j; }
  std::size_t size() const { return n_[0] * n_[1]; }

  std::size_t slot(double t) const {
    for (std::size_t s = 0; s < times_.size(); ++s)
      if (std::fabs(times_[s] - t) <= 1e-12 * std::max(1.0, t)) return s;
    throw DomainError("grid: time " + std::to_string(t) + " was not stored");
  }

  void setup(const VectorFieldSet& fields, const Expr& f) {
    const SdeModel model(fields);
    u0_.resize(size());
    Point p(static_cast<std::size_t>(d_));
    if (d_ == 1) {
      a_node_.assign(static_cast<std::size_t>(fields.m()), std::vector<double>(n_[0]));
      a_mid_.assign(static_cast<std::size_t>(fields.m()), std::vector<double>(n_[0] - 1));
      for (std::size_t j = 0; j < n_[0]; ++j) {
        p[0] = node(0, j);
        u0_[j] = f(p);
        for (int k = 0; k < fields.m(); ++k) a_node_[ui(k)][j] = positive(model.component(k, 0, p));
        if (j + 1 < n_[0]) {
          p[0] += 0.5 * h_[0];
          for (int k = 0; k < fields.m(); ++k) a_mid_[ui(k)][j] = positive(model.component(k, 0, p));
        }
      }
      for (std::size_t j = 1; j + 1 < n_[0]; ++j) {
        double r = 0.0;
        for (std::size_t k = 0; k < a_node_.size(); ++k) r += a_node_[k][j] * (a_mid_[k][j - 1] + a_mid_[k][j]);
        max_rate_ = std::max(max_rate_, r / (h_[0] * h_[0]));
      }
    } else {
      D11_.assign(size(), 0.0);
      D12_ = D22_ = F1_ = F2_ = D11_;
      for (std::size_t j = 0; j < n_[1]; ++j)
        for (std::size_t i = 0; i < n_[0]; ++i) {
          p[0] = node(0, i);
          p[1] = node(1, j);
          const std::size_t c = index(i, j);
          u0_[c] = f(p);
          for (int k = 0; k < fields.m(); ++k) {
            const double a1 = positive(model.component(k, 0, p)), a2 = positive(model.component(k, 1, p));
            D11_[c] += a1 * a1;
            D12_[c] += a1 * a2;
            D22_[c] += a2 * a2;
          }
          F1_[c] = model.drift(0, p);
          F2_[c] = model.drift(1, p);
          max_rate_ = std::max(max_rate_, 2.0 * D11_[c] / (h_[0] * h_[0]) + 2.0 * D22_[c] / (h_[1] * h_[1]));
        }
    }
    for (double v : u0_)
      if (!std::isfinite(v)) throw DomainError("grid: initial datum is not finite on the grid");
    if (!(max_rate_ > 0.0)) throw ConfigError("grid: operator vanishes on the grid");
  }

  static double positive(double a) {
    if (!(a > 0.0)) throw DomainError("grid: field component is not positive at a grid point");
    return a;
  }

  void apply(const std::vector<double>& u, std::vector<double>& out, double dt) const {
    out = u;  // boundary nodes keep their values
    if (d_ == 1) {
      const double ih2 = 1.0 / (h_[0] * h_[0]);
      for (std::size_t j = 1; j + 1 < n_[0]; ++j) {
        double lu = 0.0;
        for (std::size_t k = 0; k < a_node_.size(); ++k)
          lu += a_node_[k][j] * (a_mid_[k][j] * (u[j + 1] - u[j]) - a_mid_[k][j - 1] * (u[j] - u[j - 1]));
        out[j] = u[j] + dt * lu * ih2;
      }
      return;
    }
    const double ih1 = 1.0 / (h_[0] * h_[0]), ih2 = 1.0 / (h_[1] * h_[1]), ihx = 1.0 / (4.0 * h_[0] * h_[1]);
    for (std::size_t j = 1; j + 1 < n_[1]; ++j)
      for (std::size_t i = 1; i + 1 < n_[0]; ++i) {
        const std::size_t c = index(i, j);
        const double uxx = (u[c + 1] - 2.0 * u[c] + u[c - 1]) * ih1;
        const double uyy = (u[c + n_[0]] - 2.0 * u[c] + u[c - n_[0]]) * ih2;
        const double uxy = (u[c + 1 + n_[0]] - u[c + 1 - n_[0]] - u[c - 1 + n_[0]] + u[c - 1 - n_[0]]) * ihx;
        const double ux = (u[c + 1] - u[c - 1]) / (2.0 * h_[0]), uy = (u[c + n_[0]] - u[c - n_[0]]) / (2.0 * h_[1]);
        out[c] = u[c] + dt * (D11_[c] * uxx + 2.0 * D12_[c] * uxy + D22_[c] * uyy + F1_[c] * ux + F2_[c] * uy);
      }
  }

  void run() {
    std::vector<double> u = u0_, next;
    min_value_ = *std::min_element(u.begin(), u.end());
    double t = 0.0;
    for (double target : times_) {
      const double span = target - t;
      if (span > 0.0) {
        const auto steps = static_cast<std::size_t>(std::ceil(span / dt_ - 1e-9));
        const double step = span / static_cast<double>(steps);
        for (std::size_t s = 0; s < steps; ++s) {
          apply(u, next, step);
          u.swap(next);
        }
        min_value_ = std::min(min_value_, *std::min_element(u.begin(), u.end()));
        for (double v : u)
          if (!std::isfinite(v)) throw NumericalError("grid: solution became non-finite");
      }
      snaps_.push_back(u);
      t = target;
    }
  }
};

struct EnsembleOptions {
  std::size_t paths = 20000;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double derivative_step = 0.02;
  double min_ess_fraction = 0.01;
};

struct EnsembleEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  double effective_sample_size = 0.0;
  bool degenerate = false;  // ESS below the configured fraction of the paths
};

/// P_t f(x) = E f(X_t^x) by Euler–Maruyama particles. Path p always uses the
/// stream (seed, p), so estimates at nearby x share their noise and can be
/// differenced.
class EnsembleHeatSolution final : public HeatField {
 public:
  EnsembleHeatSolution(const VectorFieldSet& fields, Expr f, EnsembleOptions opt = {})
      : model_(fields), f_(std::move(f)), opt_(opt) {
    if (fields.dim() > 6) throw ConfigError("ensemble scheme supports d ≤ 6");
    if (opt_.paths < 2 || !(opt_.dt > 0.0)) throw ConfigError("ensemble scheme needs paths ≥ 2 and dt > 0");
  }

  int dim() const override { return model_.dim(); }
  double derivative_step() const override { return opt_.derivative_step; }
  double value(double t, std::span<const double> x) const override { return estimate(t, x).mean; }
  double scale(double t) const override {
    (void)t;
    return f_scale_;
  }

  EnsembleEstimate estimate(double t, std::span<const double> x) const {
    if (x.size() != static_cast<std::size_t>(model_.dim())) throw DomainError("ensemble: point has the wrong dimension");
    if (!(t >= 0.0)) throw DomainError("ensemble: negative time");
    const auto steps = static_cast<std::size_t>(std::ceil(t / opt_.dt - 1e-9));
    const double step = steps > 0 ? t / static_cast<double>(steps) : 0.0;
    std::vector<double> vals(opt_.paths);
    parallel_for(opt_.paths, opt_.threads, [&](std::size_t p) {
      NormalSource z(make_stream(opt_.seed, {0x2au, p}));
      std::vector<double> y(x.begin(), x.end()), xi(static_cast<std::size_t>(model_.m()));
      for (std::size_t s = 0; s < steps; ++s) {
        for (auto& v : xi) v = z();
        model_.euler_step(y, step, xi);
      }
      vals[p] = f_(y);
    });
    RunningStats st;
    double s2 = 0.0, s1 = 0.0, mx = 0.0;
    for (double v : vals) {
      st.add(v);
      s1 += v;
      s2 += v * v;
      mx = std::max(mx, v);
    }
    f_scale_ = std::max(f_scale_, mx);
    EnsembleEstimate e;
    e.mean = st.mean();
    e.standard_error = st.standard_error();
    e.effective_sample_size = s2 > 0.0 ? s1 * s1 / s2 : 0.0;
    e.degenerate = e.effective_sample_size < opt_.min_ess_fraction * static_cast<double>(opt_.paths);
    return e;
  }

 private:
  SdeModel model_;
  Expr f_;
  EnsembleOptions opt_;
  mutable double f_scale_ = 0.0;
};

}  // namespace hlab::heat
