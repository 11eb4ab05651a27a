#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "hlab/core/error.hpp"

namespace hlab::cx {

namespace detail {

// ∫_{lo}^{hi} exp(a (y² − c)) dy by 8-point Gauss–Legendre (cells are short).
inline double cell_integral(double a, double lo, double hi, double c) {
  return boost::math::quadrature::gauss<double, 8>::integrate(
      [&](double y) { return std::exp(a * (y * y - c)); }, lo, hi);
}

// Number of eigenvalues of the symmetric tridiagonal (d, e) strictly below lambda.
inline std::size_t sturm_count(const std::vector<double>& d, const std::vector<double>& e, double lambda) {
  std::size_t count = 0;
  double q = d[0] - lambda;
  const double tiny = std::numeric_limits<double>::min() * 1e10;
  if (q < 0) ++count;
  for (std::size_t i = 1; i < d.size(); ++i) {
    if (std::abs(q) < tiny) q = -tiny;
    q = d[i] - lambda - e[i - 1] * e[i - 1] / q;
    if (q < 0) ++count;
  }
  return count;
}

// Solves (T − shift) x = b for symmetric tridiagonal T with partial pivoting.
inline std::vector<double> tridiagonal_solve_pivoted(const std::vector<double>& d, const std::vector<double>& e,
                                                     double shift, std::vector<double> b) {
  const std::size_t n = d.size();
  // rows stored as (diag, super, super2) after elimination
  std::vector<double> u0(n), u1(n, 0.0), u2(n, 0.0);
  double cur_d = d[0] - shift;
  double cur_u = n > 1 ? e[0] : 0.0;
  const double floor = 1e-300;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double sub = e[i];
    const double next_d = d[i + 1] - shift;
    const double next_u = i + 2 < n ? e[i + 1] : 0.0;
    if (std::abs(cur_d) >= std::abs(sub)) {
      const double piv = std::abs(cur_d) < floor ? floor : cur_d;
      const double m = sub / piv;
      u0[i] = piv;
      u1[i] = cur_u;
      u2[i] = 0.0;
      b[i + 1] -= m * b[i];
      cur_d = next_d - m * cur_u;
      cur_u = next_u;
    } else {
      const double m = cur_d / sub;
      u0[i] = sub;
      u1[i] = next_d;
      u2[i] = next_u;
      std::swap(b[i], b[i + 1]);
      b[i + 1] -= m * b[i];
      cur_d = cur_u - m * next_d;
      cur_u = -m * next_u;
    }
  }
  u0[n - 1] = std::abs(cur_d) < floor ? floor : cur_d;
  std::vector<double> x(n);
  for (std::size_t k = n; k-- > 0;) {
    double s = b[k];
    if (k + 1 < n) s -= u1[k] * x[k + 1];
    if (k + 2 < n) s -= u2[k] * x[k + 2];
    x[k] = s / u0[k];
  }
  return x;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

/// Eigen-decomposition of −(½ d²/dx² − a x d/dx) on [−L, L] with Dirichlet boundary, discretised
/// in self-adjoint form against the weight e^{−a x²}. Mode i has eigenvalue β_i and eigenfunction φ_i
/// normalised in L²(e^{−a x²} dx). Immutable after construction.
class KilledOUEigensystem {
 public:
  KilledOUEigensystem(double a, std::size_t n_modes, std::size_t grid_points, double level = 6.0)
      : a_(a), level_(level), cells_(grid_points) {
    if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("killed_ou_eigensystem: a must be positive");
    if (n_modes < 1) throw DomainError("killed_ou_eigensystem: need at least one mode");
    if (grid_points < 200) throw DomainError("killed_ou_eigensystem: grid_points must be >= 200");
    if (!(level > 0.0)) throw DomainError("killed_ou_eigensystem: level must be positive");
    if (n_modes > grid_points - 1) throw DomainError("killed_ou_eigensystem: more modes than interior nodes");
    h_ = 2.0 * level_ / static_cast<double>(cells_);
    nodes_.resize(cells_ + 1);
    for (std::size_t j = 0; j <= cells_; ++j) nodes_[j] = -level_ + h_ * static_cast<double>(j);
    nodes_[cells_] = level_;
    build(n_modes);
  }

  double rate() const { return a_; }
  double level() const { return level_; }
  std::size_t grid_cells() const { return cells_; }
  double spacing() const { return h_; }
  std::size_t modes() const { return beta_.size(); }
  const std::vector<double>& nodes() const { return nodes_; }
  double beta(std::size_t i) const {
    if (i >= beta_.size()) throw IndexError("KilledOUEigensystem: mode out of range");
    return beta_[i];
  }
  const std::vector<double>& betas() const { return beta_; }
  /// Collatz–Wielandt enclosure of β₁ on the discrete operator.
  double beta1_lower() const { return beta1_lo_; }
  double beta1_upper() const { return beta1_hi_; }

  double weight(double x) const { return std::exp(-a_ * x * x); }

  /// φ_i at grid node j (zero at both boundary nodes).
  double node_value(std::size_t i, std::size_t j) const { return phi_.at(i).at(j); }

  /// φ_i(x), cubic Lagrange interpolation between nodes.
  double eigenfunction(std::size_t i, double x) const {
    if (i >= phi_.size()) throw IndexError("KilledOUEigensystem: mode out of range");
    if (x <= -level_ || x >= level_) return 0.0;
    return interpolate(phi_[i], x);
  }

  /// Discrete L²(weight) inner product of modes i and j.
  double inner_product(std::size_t i, std::size_t j) const {
    double s = 0.0;
    for (std::size_t k = 1; k < cells_; ++k) s += phi_.at(i)[k] * phi_.at(j)[k] * w_nodes_[k];
    return s * h_;
  }

  /// φ_1(x1) − φ_1(x0) from −(e^{−ax²}φ′)′ = 2β e^{−ax²}φ and φ′(0) = 0:
  /// φ(x1) − φ(x0) = −2β ∫_{x0}^{x1} e^{a y²} ∫_0^y φ(u) e^{−a u²} du dy.
  /// Direct subtraction loses every digit when β₁ is tiny.
  double ground_state_increment(double x0, double x1) const {
    return beta_[0] * ground_state_increment_per_beta(x0, x1);
  }

  /// (φ_1(x1) − φ_1(x0))/β_1.
  double ground_state_increment_per_beta(double x0, double x1) const {
    if (!(std::abs(x0) < level_) || !(std::abs(x1) < level_)) throw DomainError("ground_state_increment: outside domain");
    using GL = boost::math::quadrature::gauss<double, 8>;
    const double f0 = ground_state_mass(0.0);
    auto outer = [&](double y) { return std::exp(a_ * y * y) * (ground_state_mass(y) - f0); };
    const double lo = std::min(x0, x1), hi = std::max(x0, x1);
    double sum = 0.0;
    double left = lo;
    while (left < hi) {
      const double cell_end = nodes_[std::min(cells_, cell_index(left) + 1)];
      const double right = std::min(hi, cell_end > left ? cell_end : hi);
      sum += GL::integrate(outer, left, right);
      left = right;
    }
    return (x1 >= x0 ? -2.0 : 2.0) * sum;
  }

  /// Largest |⟨φ_i, φ_j⟩ − δ_ij| over the first k modes.
  double orthonormality_defect(std::size_t k) const {
    k = std::min(k, modes());
    double worst = 0.0;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j <= i; ++j) worst = std::max(worst, std::abs(inner_product(i, j) - (i == j ? 1.0 : 0.0)));
    return worst;
  }

 private:
  std::size_t cell_index(double x) const {
    const auto j = static_cast<std::ptrdiff_t>(std::floor((x + level_) / h_));
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(cells_) - 1));
  }

  // ∫_{−L}^{y} φ_1(u) e^{−a u²} du from a per-cell table.
  double ground_state_mass(double y) const {
    using GL = boost::math::quadrature::gauss<double, 8>;
    auto f = [&](double u) { return interpolate(phi_[0], u) * std::exp(-a_ * u * u); };
    if (mass_.empty()) {
      mass_.assign(cells_ + 1, 0.0);
      for (std::size_t j = 0; j < cells_; ++j) mass_[j + 1] = mass_[j] + GL::integrate(f, nodes_[j], nodes_[j + 1]);
    }
    const std::size_t j = cell_index(y);
    return mass_[j] + (y > nodes_[j] ? GL::integrate(f, nodes_[j], y) : 0.0);
  }

  double interpolate(const std::vector<double>& v, double x) const {
    const double s = (x + level_) / h_;
    auto j = static_cast<std::ptrdiff_t>(std::floor(s));
    const auto last = static_cast<std::ptrdiff_t>(cells_);
    j = std::clamp<std::ptrdiff_t>(j, 0, last - 1);
    const double frac = s - static_cast<double>(j);
    if (frac == 0.0) return v[static_cast<std::size_t>(j)];
    std::ptrdiff_t start = std::clamp<std::ptrdiff_t>(j - 1, 0, last - 3);
    double result = 0.0;
    for (std::ptrdiff_t p = 0; p < 4; ++p) {
      double basis = 1.0;
      const double sp = static_cast<double>(start + p);
      for (std::ptrdiff_t q = 0; q < 4; ++q) {
        if (q == p) continue;
        const double sq = static_cast<double>(start + q);
        basis *= (s - sq) / (sp - sq);
      }
      result += basis * v[static_cast<std::size_t>(start + p)];
    }
    return result;
  }

  void build(std::size_t n_modes) {
    const std::size_t k = cells_ - 1;  // interior unknowns, node j = i + 1
    w_nodes_.resize(cells_ + 1);
    for (std::size_t j = 0; j <= cells_; ++j) w_nodes_[j] = weight(nodes_[j]);
    const double scale = 1.0 / (2.0 * h_ * h_);
    // rates of −L_h: (T f)_i = (u_i + l_i) f_i − u_i f_{i+1} − l_i f_{i−1}
    std::vector<double> up(k), lo(k), diag(k), off(k > 0 ? k - 1 : 0);
    for (std::size_t i = 0; i < k; ++i) {
      const double xl = nodes_[i], xc = nodes_[i + 1], xr = nodes_[i + 2];
      const double c = xc * xc;
      up[i] = scale * h_ / detail::cell_integral(a_, xc, xr, c);
      lo[i] = scale * h_ / detail::cell_integral(a_, xl, xc, c);
      diag[i] = up[i] + lo[i];
    }
    for (std::size_t i = 0; i + 1 < k; ++i) {
      const double xc = nodes_[i + 1], xr = nodes_[i + 2];
      off[i] = -scale * h_ / detail::cell_integral(a_, xc, xr, 0.5 * (xc * xc + xr * xr));
    }

    beta_.assign(n_modes, 0.0);
    phi_.assign(n_modes, std::vector<double>(cells_ + 1, 0.0));
    std::vector<std::vector<double>> g(n_modes);  // symmetric-form vectors, Σ h g² = 1

    ground_state(up, lo, g[0]);

    const double gersh = [&] {
      double m = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        double r = diag[i];
        if (i > 0) r += std::abs(off[i - 1]);
        if (i + 1 < k) r += std::abs(off[i]);
        m = std::max(m, r);
      }
      return m;
    }();
    for (std::size_t m = 1; m < n_modes; ++m) {
      // bisection for the (m+1)-th smallest eigenvalue
      double left = beta_[m - 1], right = gersh;
      for (int it = 0; it < 200 && right - left > 4.0 * std::numeric_limits<double>::epsilon() * gersh; ++it) {
        const double mid = 0.5 * (left + right);
        if (detail::sturm_count(diag, off, mid) >= m + 1)
          right = mid;
        else
          left = mid;
      }
      const double lambda = 0.5 * (left + right);
      beta_[m] = lambda;
      std::vector<double> v(k, 1.0);
      for (std::size_t i = 0; i < k; ++i) v[i] = 1.0 + 0.37 * std::sin(0.1 * static_cast<double>(i) * (m + 1));
      for (int it = 0; it < 3; ++it) {
        v = detail::tridiagonal_solve_pivoted(diag, off, lambda, std::move(v));
        if (it == 2)
          for (std::size_t p = 0; p < m; ++p) {
            const double c = detail::dot(v, g[p]) * h_;
            for (std::size_t i = 0; i < k; ++i) v[i] -= c * g[p][i];
          }
        const double nrm = std::sqrt(detail::dot(v, v) * h_);
        if (!(nrm > 0.0) || !std::isfinite(nrm))
          throw NumericalError("killed_ou_eigensystem: inverse iteration broke down at mode " + std::to_string(m + 1));
        for (auto& x : v) x /= nrm;
      }
      // residual diagnostic
      double res = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        double sv = diag[i] * v[i];
        if (i > 0) sv += off[i - 1] * v[i - 1];
        if (i + 1 < k) sv += off[i] * v[i + 1];
        res = std::max(res, std::abs(sv - lambda * v[i]));
      }
      double vmax = 0.0;
      for (double x : v) vmax = std::max(vmax, std::abs(x));
      if (res > 1e-6 * gersh * vmax)
        throw NumericalError("killed_ou_eigensystem: eigenvector residual " + std::to_string(res) + " at mode " +
                             std::to_string(m + 1));
      // sign: positive slope at the left boundary
      std::size_t first = 0;
      while (first < k && std::abs(v[first]) < 1e-8 * vmax) ++first;
      if (first < k && v[first] < 0)
        for (auto& x : v) x = -x;
      g[m] = std::move(v);
    }
    for (std::size_t m = 0; m < n_modes; ++m)
      for (std::size_t i = 0; i < k; ++i) phi_[m][i + 1] = g[m][i] / std::sqrt(w_nodes_[i + 1]);
  }

  // Smallest eigenvalue of the M-matrix T by inverse iteration with subtraction-free elimination.
  void ground_state(const std::vector<double>& up, const std::vector<double>& lo, std::vector<double>& g) {
    const std::size_t k = up.size();
    std::vector<double> piv(k);
    double r = lo[0];
    piv[0] = up[0] + r;
    for (std::size_t i = 1; i < k; ++i) {
      r = lo[i] * r / piv[i - 1];
      piv[i] = up[i] + r;
    }
    std::vector<double> x(k, 1.0), y(k);
    double lo_b = 0.0, hi_b = std::numeric_limits<double>::infinity();
    bool converged = false;
    for (int it = 0; it < 50; ++it) {
      y[0] = x[0];
      for (std::size_t i = 1; i < k; ++i) y[i] = x[i] + lo[i] * y[i - 1] / piv[i - 1];
      std::vector<double> z(k);
      z[k - 1] = y[k - 1] / piv[k - 1];
      for (std::size_t i = k - 1; i-- > 0;) z[i] = (y[i] + up[i] * z[i + 1]) / piv[i];
      double mn = std::numeric_limits<double>::infinity(), mx = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        const double q = x[i] / z[i];
        mn = std::min(mn, q);
        mx = std::max(mx, q);
      }
      lo_b = mn;
      hi_b = mx;
      double zmax = 0.0;
      for (double v : z) zmax = std::max(zmax, v);
      for (std::size_t i = 0; i < k; ++i) x[i] = z[i] / zmax;
      if ((hi_b - lo_b) <= 1e-13 * hi_b && it >= 2) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw NumericalError("killed_ou_eigensystem: ground state bracket did not close, width " +
                               std::to_string((hi_b - lo_b) / hi_b),
                           0.5 * (lo_b + hi_b));
    beta1_lo_ = lo_b;
    beta1_hi_ = hi_b;
    beta_[0] = 0.5 * (lo_b + hi_b);
    // x is φ₁ up to scale; symmetric form g = √w φ
    g.resize(k);
    for (std::size_t i = 0; i < k; ++i) g[i] = x[i] * std::sqrt(w_nodes_[i + 1]);
    const double nrm = std::sqrt(detail::dot(g, g) * h_);
    for (auto& v : g) v /= nrm;
  }

  double a_;
  double level_;
  std::size_t cells_;
  double h_ = 0.0;
  std::vector<double> nodes_;
  std::vector<double> w_nodes_;
  std::vector<double> beta_;
  std::vector<std::vector<double>> phi_;
  double beta1_lo_ = 0.0, beta1_hi_ = 0.0;
  mutable std::vector<double> mass_;  // lazily built; not thread-safe on first use
};

inline KilledOUEigensystem killed_ou_eigensystem(double a, std::size_t n_modes, std::size_t grid_points,
                                                 double level = 6.0) {
  return KilledOUEigensystem(a, n_modes, grid_points, level);
}

/// Free OU transition density for dY = dB − aY dt.
inline double free_ou_density(double a, double t, double x, double y) {
  if (!(t > 0.0)) throw DomainError("free_ou_density: t must be positive");
  const double var = -std::expm1(-2.0 * a * t) / (2.0 * a);
  const double d = y - std::exp(-a * t) * x;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * M_PI * var);
}

struct KilledDensity {
  double value = 0.0;
  double tail_estimate = 0.0;  // size of the discarded Mercer terms
  bool accurate = true;        // false when the truncated series should not be trusted
  double free_value = 0.0;     // comparison density without killing
};

/// q̃(t,x,y) = Σ_i e^{−β_i t} φ_i(x) φ_i(y) w(y), truncated at the computed modes.
inline KilledDensity killed_density_1d(const KilledOUEigensystem& sys, double t, double x, double y,
                                       double rel_accuracy = 1e-6) {
  if (!(t > 0.0)) throw DomainError("killed_density_1d: t must be positive");
  const double L = sys.level();
  if (!(std::abs(x) < L) || !(std::abs(y) < L)) throw DomainError("killed_density_1d: points must lie inside the domain");
  KilledDensity r;
  const double wy = sys.weight(y);
  double s = 0.0;
  const std::size_t m = sys.modes();
  for (std::size_t i = m; i-- > 0;) s += std::exp(-sys.beta(i) * t) * sys.eigenfunction(i, x) * sys.eigenfunction(i, y);
  r.value = s * wy;
  // high modes resemble Dirichlet sines with amplitude √(w(y)/w(x))/L in this normalisation
  const double amp = std::sqrt(wy / sys.weight(x)) / L;
  const double bk = sys.beta(m - 1);
  const double gap = m >= 2 ? std::max(sys.beta(m - 1) - sys.beta(m - 2), 1e-300) : bk;
  const double ratio = std::exp(-gap * t);
  r.tail_estimate = amp * std::exp(-bk * t) * ratio / (-std::expm1(-gap * t));
  if (!std::isfinite(r.tail_estimate)) r.tail_estimate = std::numeric_limits<double>::infinity();
  r.free_value = free_ou_density(sys.rate(), t, x, y);
  r.accurate = r.tail_estimate <= rel_accuracy * std::max(std::abs(r.value), r.free_value) + 1e-300;
  return r;
}

/// Constant c with q̃(t,x,y) ≤ c e^{−β₁ t} for all t ≥ t0, from the computed mode amplitudes.
inline double killed_decay_constant(const KilledOUEigensystem& sys, double x, double y, double t0) {
  double c = 0.0;
  const double b1 = sys.beta(0);
  for (std::size_t i = 0; i < sys.modes(); ++i)
    c += std::exp(-(sys.beta(i) - b1) * t0) * std::abs(sys.eigenfunction(i, x) * sys.eigenfunction(i, y));
  return c * sys.weight(y);
}

/// q̃/q_free at (t, x, x), Richardson-extrapolated from meshes with grid_points and 2·grid_points cells.
inline double killed_to_free_ratio(double a, double t, double x, std::size_t grid_points, std::size_t n_modes,
                                   double level = 6.0) {
  const auto coarse = killed_ou_eigensystem(a, n_modes, grid_points, level);
  const auto fine = killed_ou_eigensystem(a, n_modes, 2 * grid_points, level);
  const double qc = killed_density_1d(coarse, t, x, x).value;
  const double qf = killed_density_1d(fine, t, x, x).value;
  return ((4.0 * qf - qc) / 3.0) / free_ou_density(a, t, x, x);
}

}  // namespace hlab::cx
