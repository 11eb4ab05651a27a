#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "hlab/core/parallel.hpp"
#include "hlab/core/rng.hpp"
#include "hlab/core/stats.hpp"
#include "hlab/gamma/calculus.hpp"
#include "hlab/gamma/fields.hpp"

namespace hlab::heat {

using calculus::Expr;
using calculus::Point;
using calculus::VectorFieldSet;

/// Each field is driven by its own scalar Brownian motion scaled by √2, so the
/// generator is L = Σ_k ∇_{A^k}² rather than ½L.
inline const double kNoiseScale = std::sqrt(2.0);

struct SdeCoefficients {
  std::vector<std::vector<double>> diffusion;  // row k = A^k(x)
  std::vector<double> drift;                   // F_i = Σ_k Σ_j a_j^k ∂_j a_i^k
  double noise_scale = kNoiseScale;
};

/// Field components and drift compiled to plain expressions for repeated
/// evaluation on doubles.
class SdeModel {
 public:
  explicit SdeModel(const VectorFieldSet& fields) : d_(fields.dim()), m_(fields.m()) {
    for (int k = 0; k < m_; ++k)
      for (int i = 0; i < d_; ++i) a_.push_back(fields.component(k, i));
    for (int i = 0; i < d_; ++i) {
      Expr f(0.0);
      for (int k = 0; k < m_; ++k)
        for (int j = 0; j < d_; ++j) f = f + fields.component(k, j) * fields.component(k, i).derivative(j);
      drift_.push_back(f);
    }
  }

  int dim() const { return d_; }
  int m() const { return m_; }

  double component(int k, int i, std::span<const double> x) const {
    return a_[static_cast<std::size_t>(k * d_ + i)](x);
  }
  double drift(int i, std::span<const double> x) const { return drift_[static_cast<std::size_t>(i)](x); }

  SdeCoefficients coefficients(std::span<const double> x) const {
    SdeCoefficients c;
    c.diffusion.assign(static_cast<std::size_t>(m_), std::vector<double>(static_cast<std::size_t>(d_)));
    for (int k = 0; k < m_; ++k)
      for (int i = 0; i < d_; ++i) c.diffusion[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = component(k, i, x);
    c.drift.resize(static_cast<std::size_t>(d_));
    for (int i = 0; i < d_; ++i) c.drift[static_cast<std::size_t>(i)] = drift(i, x);
    return c;
  }

  /// One Euler–Maruyama step in place; xi holds m standard normals.
  void euler_step(std::vector<double>& x, double dt, std::span<const double> xi) const {
    const double s = kNoiseScale * std::sqrt(dt);
    std::vector<double> inc(static_cast<std::size_t>(d_));
    for (int i = 0; i < d_; ++i) {
      double v = drift(i, x) * dt;
      for (int k = 0; k < m_; ++k) v += s * component(k, i, x) * xi[static_cast<std::size_t>(k)];
      inc[static_cast<std::size_t>(i)] = v;
    }
    for (int i = 0; i < d_; ++i) x[static_cast<std::size_t>(i)] += inc[static_cast<std::size_t>(i)];
  }

 private:
  int d_, m_;
  std::vector<Expr> a_;
  std::vector<Expr> drift_;
};

/// Diffusion rows and drift at x, from jets so the positivity assertion applies.
inline SdeCoefficients sde_step_coefficients(const VectorFieldSet& fields, std::span<const double> x) {
  const auto a = fields.jets(x, 1);
  SdeCoefficients c;
  const int d = fields.dim();
  c.drift.assign(static_cast<std::size_t>(d), 0.0);
  for (const auto& ak : a) {
    std::vector<double> row;
    for (const auto& aik : ak) row.push_back(aik.value());
    c.diffusion.push_back(row);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        c.drift[static_cast<std::size_t>(i)] += ak[static_cast<std::size_t>(j)].value() * ak[static_cast<std::size_t>(i)].gradient(j);
  }
  return c;
}

struct ItoCheck {
  double empirical = 0.0;
  double standard_error = 0.0;
  double generator = 0.0;  // apply_L(f) at x
  double z() const { return standard_error > 0 ? (empirical - generator) / standard_error : 0.0; }
};

/// Empirical generator (E f(X_dt) − f(x))/dt from one Euler step per path. The
/// mean-zero martingale term √2 Σ_k ∇_{A^k}f(x) ΔW_k is subtracted as a control
/// variate.
inline ItoCheck ito_generator_check(const VectorFieldSet& fields, const Expr& f, const Point& x, std::size_t paths,
                                    double dt, std::uint64_t seed, unsigned threads = 1) {
  const SdeModel model(fields);
  const calculus::GammaEngine engine(fields, x);
  const calculus::Jet fj = engine.jet(f);
  std::vector<double> grad_k(static_cast<std::size_t>(fields.m()));
  for (int k = 0; k < fields.m(); ++k) grad_k[static_cast<std::size_t>(k)] = engine.grad_field(fj, k);
  const double f0 = f(x);
  std::vector<double> samples(paths);
  parallel_for(paths, threads, [&](std::size_t p) {
    NormalSource z(make_stream(seed, {0x17u, p}));
    std::vector<double> xi(static_cast<std::size_t>(fields.m()));
    double cv = 0.0;
    for (std::size_t k = 0; k < xi.size(); ++k) {
      xi[k] = z();
      cv += kNoiseScale * std::sqrt(dt) * grad_k[k] * xi[k];
    }
    std::vector<double> y = x;
    model.euler_step(y, dt, xi);
    samples[p] = (f(y) - f0 - cv) / dt;
  });
  RunningStats s;
  for (double v : samples) s.add(v);
  return {s.mean(), s.standard_error(), engine.apply_L(fj).value};
}

}  // namespace hlab::heat
