#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hlab/core/error.hpp"
#include "hlab/gamma/expr.hpp"
#include "hlab/gamma/jet.hpp"

namespace hlab::calculus {

using Point = std::vector<double>;
/// a[k][i] = a_i^k as jets about a point.
using FieldJets = std::vector<std::vector<Jet>>;

/// m vector fields A^1..A^m on ℝ^d with components a_i^k(x) given as expressions.
class VectorFieldSet {
 public:
  VectorFieldSet(int d, std::vector<std::vector<Expr>> components) : d_(d), a_(std::move(components)) {
    if (d < 1 || d > kMaxJetDim) throw DomainError("VectorFieldSet: dimension out of range");
    if (a_.empty()) throw DomainError("VectorFieldSet: need at least one field");
    for (const auto& f : a_) {
      if (f.size() != static_cast<std::size_t>(d)) throw DomainError("VectorFieldSet: each field needs d components");
      for (const auto& c : f)
        if (c.arity() > d) throw DomainError("VectorFieldSet: component uses a coordinate beyond d");
    }
  }

  static VectorFieldSet constant(const std::vector<std::vector<double>>& c) {
    if (c.empty()) throw DomainError("VectorFieldSet: need at least one field");
    std::vector<std::vector<Expr>> comps;
    for (const auto& row : c) comps.emplace_back(row.begin(), row.end());
    return VectorFieldSet(static_cast<int>(c[0].size()), std::move(comps));
  }

  /// a_i^k = c_i^k g_i(x_i). Fields of this form commute pairwise.
  static VectorFieldSet separable(const std::vector<std::vector<double>>& c, const std::vector<Expr>& g) {
    const int d = static_cast<int>(g.size());
    std::vector<std::vector<Expr>> comps;
    for (const auto& row : c) {
      if (row.size() != g.size()) throw DomainError("VectorFieldSet: coefficient rows need d entries");
      std::vector<Expr> f;
      for (int i = 0; i < d; ++i) f.push_back(Expr(row[static_cast<std::size_t>(i)]) * g[static_cast<std::size_t>(i)]);
      comps.push_back(std::move(f));
    }
    return VectorFieldSet(d, std::move(comps));
  }

  static VectorFieldSet parse(int d, const std::vector<std::vector<std::string>>& text) {
    std::vector<std::vector<Expr>> comps;
    for (const auto& row : text) {
      std::vector<Expr> f;
      for (const auto& s : row) f.push_back(parse_expression(s, d));
      comps.push_back(std::move(f));
    }
    return VectorFieldSet(d, std::move(comps));
  }

  int dim() const { return d_; }
  int m() const { return static_cast<int>(a_.size()); }
  const Expr& component(int k, int i) const {
    if (k < 0 || k >= m() || i < 0 || i >= d_) throw IndexError("VectorFieldSet: component index out of range");
    return a_[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
  }

  /// A^k(x) for every k. Positivity of each component is asserted.
  std::vector<std::vector<double>> values(std::span<const double> x) const {
    check_point(x);
    std::vector<std::vector<double>> v(a_.size(), std::vector<double>(static_cast<std::size_t>(d_)));
    for (std::size_t k = 0; k < a_.size(); ++k)
      for (int i = 0; i < d_; ++i) {
        const double val = a_[k][static_cast<std::size_t>(i)](x);
        require_positive(val, k, i);
        v[k][static_cast<std::size_t>(i)] = val;
      }
    return v;
  }

  FieldJets jets(std::span<const double> x, int order = kMaxJetOrder) const {
    check_point(x);
    const auto vars = Jet::variables(x, order);
    FieldJets out(a_.size());
    for (std::size_t k = 0; k < a_.size(); ++k)
      for (int i = 0; i < d_; ++i) {
        Jet j = a_[k][static_cast<std::size_t>(i)].eval<Jet>(std::span<const Jet>(vars));
        require_positive(j.value(), k, i);
        out[k].push_back(std::move(j));
      }
    return out;
  }

  /// Sampled ‖A^k‖²_{1,1} = Σ_i ‖a_i^k‖²_{1,1} on the box [lo, hi]^d, where each
  /// ‖a‖_{1,1} is sup|a| + Lip(a) + Lip(Da) estimated from gradients, Hessians and
  /// pairwise quotients over the same sample. Cached for later queries.
  const std::vector<double>& estimate_norms(double lo, double hi, std::size_t samples = 256, std::uint64_t seed = 1) {
    auto pts = sample_points(lo, hi, samples, seed);
    norms_.assign(a_.size(), 0.0);
    for (std::size_t k = 0; k < a_.size(); ++k)
      for (int i = 0; i < d_; ++i) {
        const double n11 = component_norm(a_[k][static_cast<std::size_t>(i)], pts);
        norms_[k] += n11 * n11;
      }
    for (auto& v : norms_) v = std::sqrt(v);
    return norms_;
  }
  const std::vector<double>& norms() const { return norms_; }

  /// Largest |a(x)−a(y)|/|x−y| and |Da(x)−Da(y)|/|x−y| over random pairs in the
  /// box for component (k, i).
  std::pair<double, double> sampled_lipschitz(int k, int i, double lo, double hi, std::size_t pairs,
                                              std::uint64_t seed) const {
    const auto pts = sample_points(lo, hi, 2 * pairs, seed);
    const Expr& a = component(k, i);
    double lip0 = 0.0, lip1 = 0.0;
    for (std::size_t p = 0; p + 1 < pts.size(); p += 2) {
      const auto [l0, l1] = quotients(a, pts[p], pts[p + 1]);
      lip0 = std::max(lip0, l0);
      lip1 = std::max(lip1, l1);
    }
    return {lip0, lip1};
  }

 private:
  int d_;
  std::vector<std::vector<Expr>> a_;
  std::vector<double> norms_;

  void check_point(std::span<const double> x) const {
    if (x.size() != static_cast<std::size_t>(d_)) throw DomainError("VectorFieldSet: point has the wrong dimension");
  }
  static void require_positive(double v, std::size_t k, int i) {
    if (!(v > 0.0))
      throw DomainError("VectorFieldSet: component a_" + std::to_string(i + 1) + "^" + std::to_string(k + 1) +
                        " is not positive at the evaluation point");
  }

  std::vector<Point> sample_points(double lo, double hi, std::size_t n, std::uint64_t seed) const {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> U(lo, hi);
    std::vector<Point> pts(n, Point(static_cast<std::size_t>(d_)));
    for (auto& p : pts)
      for (auto& v : p) v = U(gen);
    return pts;
  }

  std::pair<double, double> quotients(const Expr& a, const Point& x, const Point& y) const {
    double dist = 0.0;
    for (int i = 0; i < d_; ++i) dist += (x[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(i)]) * (x[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(i)]);
    dist = std::sqrt(dist);
    if (dist == 0.0) return {0.0, 0.0};
    const Jet jx = a.jet(x, 1), jy = a.jet(y, 1);
    double g = 0.0;
    for (int i = 0; i < d_; ++i) g += std::pow(jx.gradient(i) - jy.gradient(i), 2);
    return {std::fabs(jx.value() - jy.value()) / dist, std::sqrt(g) / dist};
  }

  double component_norm(const Expr& a, const std::vector<Point>& pts) const {
    double sup = 0.0, lip0 = 0.0, lip1 = 0.0;
    for (const auto& p : pts) {
      const Jet j = a.jet(p, 2);
      sup = std::max(sup, std::fabs(j.value()));
      double g = 0.0, h = 0.0;
      for (int i = 0; i < d_; ++i) {
        g += j.gradient(i) * j.gradient(i);
        for (int l = 0; l < d_; ++l) h += j.hessian(i, l) * j.hessian(i, l);
      }
      lip0 = std::max(lip0, std::sqrt(g));
      lip1 = std::max(lip1, std::sqrt(h));
    }
    for (std::size_t p = 0; p < pts.size(); ++p) {
      const auto [l0, l1] = quotients(a, pts[p], pts[(p + 1) % pts.size()]);
      lip0 = std::max(lip0, l0);
      lip1 = std::max(lip1, l1);
    }
    return sup + lip0 + lip1;
  }
};

}  // namespace hlab::calculus
