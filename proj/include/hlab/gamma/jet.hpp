#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <span>
#include <vector>

#include "hlab/core/error.hpp"

namespace hlab::calculus {

inline constexpr int kMaxJetOrder = 3;
inline constexpr int kMaxJetDim = 12;

/// Monomial bookkeeping for truncated Taylor polynomials of total degree ≤ 3.
struct JetLayout {
  struct Product {
    int a, b, c;
  };
  struct Shift {
    int from, to;
    double factor;
  };

  int dim = 0;
  std::vector<std::vector<int>> exponents;
  std::vector<int> degree;
  std::array<std::size_t, kMaxJetOrder + 2> degree_end{};  // monomials sorted by degree
  std::vector<Product> products;                          // sorted by degree of c
  std::array<std::size_t, kMaxJetOrder + 2> product_end{};
  std::vector<std::vector<Shift>> derivative;              // ∂_i: coefficient moves from → to

  int index_of(const std::vector<int>& e) const {
    auto it = lookup.find(e);
    return it == lookup.end() ? -1 : it->second;
  }
  std::size_t size() const { return exponents.size(); }
  std::size_t size_of_order(int order) const { return degree_end[static_cast<std::size_t>(order)]; }

  explicit JetLayout(int d) : dim(d) {
    std::vector<int> e(static_cast<std::size_t>(d), 0);
    for (int deg = 0; deg <= kMaxJetOrder; ++deg) {
      enumerate(e, 0, deg);
      degree_end[static_cast<std::size_t>(deg)] = exponents.size();
    }
    degree_end[kMaxJetOrder + 1] = exponents.size();
    for (std::size_t i = 0; i < exponents.size(); ++i) lookup[exponents[i]] = static_cast<int>(i);
    for (int deg = 0; deg <= kMaxJetOrder; ++deg) {
      for (std::size_t c = 0; c < exponents.size(); ++c) {
        if (degree[c] != deg) continue;
        for (std::size_t a = 0; a < exponents.size(); ++a) {
          std::vector<int> rest(exponents[c]);
          bool ok = true;
          for (int i = 0; i < d; ++i) {
            rest[static_cast<std::size_t>(i)] -= exponents[a][static_cast<std::size_t>(i)];
            if (rest[static_cast<std::size_t>(i)] < 0) ok = false;
          }
          if (ok) products.push_back({static_cast<int>(a), index_of(rest), static_cast<int>(c)});
        }
      }
      product_end[static_cast<std::size_t>(deg)] = products.size();
    }
    product_end[kMaxJetOrder + 1] = products.size();
    derivative.resize(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i)
      for (std::size_t c = 0; c < exponents.size(); ++c) {
        const int p = exponents[c][static_cast<std::size_t>(i)];
        if (p == 0) continue;
        std::vector<int> lower(exponents[c]);
        --lower[static_cast<std::size_t>(i)];
        derivative[static_cast<std::size_t>(i)].push_back({static_cast<int>(c), index_of(lower), static_cast<double>(p)});
      }
  }

  static const JetLayout& get(int d) {
    if (d < 1 || d > kMaxJetDim) throw DomainError("JetLayout: dimension out of range");
    static std::mutex mutex;
    static std::array<std::unique_ptr<JetLayout>, kMaxJetDim + 1> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[static_cast<std::size_t>(d)];
    if (!slot) slot = std::make_unique<JetLayout>(d);
    return *slot;
  }

 private:
  std::map<std::vector<int>, int> lookup;

  void enumerate(std::vector<int>& e, int pos, int remaining) {
    if (pos == dim - 1) {
      e[static_cast<std::size_t>(pos)] = remaining;
      exponents.push_back(e);
      degree.push_back(std::accumulate(e.begin(), e.end(), 0));
      return;
    }
    for (int k = remaining; k >= 0; --k) {
      e[static_cast<std::size_t>(pos)] = k;
      enumerate(e, pos + 1, remaining - k);
    }
    e[static_cast<std::size_t>(pos)] = 0;
  }
};

/// Truncated multivariate Taylor polynomial about a point,
/// f(x + h) ≈ Σ_α c_α h^α with |α| ≤ order.
class Jet {
 public:
  Jet() = default;
  Jet(const JetLayout& layout, int order, double value = 0.0)
      : layout_(&layout), order_(order), c_(layout.size(), 0.0) {
    if (order < 0 || order > kMaxJetOrder) throw DomainError("Jet: order out of range");
    c_[0] = value;
  }

  static Jet constant(int dim, int order, double v) { return Jet(JetLayout::get(dim), order, v); }
  /// The coordinate x_i about the point value v.
  static Jet variable(int dim, int order, int i, double v) {
    Jet j = constant(dim, order, v);
    if (order >= 1) {
      std::vector<int> e(static_cast<std::size_t>(dim), 0);
      e[static_cast<std::size_t>(i)] = 1;
      j.c_[static_cast<std::size_t>(j.layout_->index_of(e))] = 1.0;
    }
    return j;
  }
  static std::vector<Jet> variables(std::span<const double> x, int order = kMaxJetOrder) {
    std::vector<Jet> v;
    const int d = static_cast<int>(x.size());
    for (int i = 0; i < d; ++i) v.push_back(variable(d, order, i, x[static_cast<std::size_t>(i)]));
    return v;
  }

  const JetLayout& layout() const { return *layout_; }
  int dim() const { return layout_->dim; }
  int order() const { return order_; }
  double value() const { return c_[0]; }
  double coefficient(std::size_t i) const { return c_[i]; }
  double& coefficient(std::size_t i) { return c_[i]; }
  std::span<const double> coefficients() const { return c_; }

  /// ∂^α f at the expansion point (α! c_α).
  double partial(const std::vector<int>& alpha) const {
    int deg = 0;
    double fact = 1.0;
    for (int a : alpha) {
      deg += a;
      for (int k = 2; k <= a; ++k) fact *= k;
    }
    if (deg > order_) throw DomainError("Jet: derivative order exceeds truncation");
    const int idx = layout_->index_of(alpha);
    return fact * c_[static_cast<std::size_t>(idx)];
  }
  double gradient(int i) const { return partial(unit(i)); }
  double hessian(int i, int j) const {
    auto e = unit(i);
    ++e[static_cast<std::size_t>(j)];
    return partial(e);
  }

  /// ∂_i, one order lower.
  Jet derivative(int i) const {
    if (order_ == 0) throw DomainError("Jet: cannot differentiate an order-0 jet");
    Jet r(*layout_, order_ - 1);
    const std::size_t limit = layout_->size_of_order(order_);
    for (const auto& s : layout_->derivative[static_cast<std::size_t>(i)])
      if (static_cast<std::size_t>(s.from) < limit) r.c_[static_cast<std::size_t>(s.to)] += s.factor * c_[static_cast<std::size_t>(s.from)];
    return r;
  }

  Jet truncated(int order) const {
    Jet r = *this;
    r.order_ = std::min(order_, order);
    for (std::size_t k = layout_->size_of_order(r.order_); k < c_.size(); ++k) r.c_[k] = 0.0;
    return r;
  }

  /// Coefficient-wise absolute value, used for rounding-error magnitudes.
  Jet abs() const {
    Jet r = *this;
    for (auto& v : r.c_) v = std::fabs(v);
    return r;
  }

  Jet& operator+=(const Jet& o) {
    check(o);
    order_ = std::min(order_, o.order_);
    const std::size_t n = layout_->size_of_order(order_);
    for (std::size_t k = 0; k < n; ++k) c_[k] += o.c_[k];
    for (std::size_t k = n; k < c_.size(); ++k) c_[k] = 0.0;
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    check(o);
    order_ = std::min(order_, o.order_);
    const std::size_t n = layout_->size_of_order(order_);
    for (std::size_t k = 0; k < n; ++k) c_[k] -= o.c_[k];
    for (std::size_t k = n; k < c_.size(); ++k) c_[k] = 0.0;
    return *this;
  }
  Jet& operator+=(double v) {
    c_[0] += v;
    return *this;
  }
  Jet& operator-=(double v) {
    c_[0] -= v;
    return *this;
  }
  Jet& operator*=(double v) {
    for (auto& x : c_) x *= v;
    return *this;
  }
  Jet& operator/=(double v) {
    for (auto& x : c_) x /= v;
    return *this;
  }

  friend Jet operator*(const Jet& a, const Jet& b) {
    a.check(b);
    Jet r(*a.layout_, std::min(a.order_, b.order_));
    const std::size_t n = a.layout_->product_end[static_cast<std::size_t>(r.order_)];
    const auto& p = a.layout_->products;
    for (std::size_t k = 0; k < n; ++k)
      r.c_[static_cast<std::size_t>(p[k].c)] += a.c_[static_cast<std::size_t>(p[k].a)] * b.c_[static_cast<std::size_t>(p[k].b)];
    return r;
  }
  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator+(Jet a, double b) { return a += b; }
  friend Jet operator+(double b, Jet a) { return a += b; }
  friend Jet operator-(Jet a, double b) { return a -= b; }
  friend Jet operator-(double b, const Jet& a) { return -a + b; }
  friend Jet operator*(Jet a, double b) { return a *= b; }
  friend Jet operator*(double b, Jet a) { return a *= b; }
  friend Jet operator/(Jet a, double b) { return a /= b; }
  friend Jet operator-(Jet a) { return a *= -1.0; }

  /// φ(f) from the Taylor coefficients φ^{(k)}(f₀)/k!, k = 0..order.
  Jet compose(const std::array<double, kMaxJetOrder + 1>& taylor) const {
    Jet delta = *this;
    delta.c_[0] = 0.0;
    Jet r(*layout_, order_, taylor[0]);
    Jet power = delta;
    for (int k = 1; k <= order_; ++k) {
      Jet term = power;
      term *= taylor[static_cast<std::size_t>(k)];
      r += term;
      if (k < order_) power = power * delta;
    }
    return r;
  }

 private:
  const JetLayout* layout_ = nullptr;
  int order_ = 0;
  std::vector<double> c_;

  std::vector<int> unit(int i) const {
    std::vector<int> e(static_cast<std::size_t>(layout_->dim), 0);
    e[static_cast<std::size_t>(i)] = 1;
    return e;
  }
  void check(const Jet& o) const {
    if (layout_ != o.layout_) throw DomainError("Jet: dimension mismatch");
  }
};

inline Jet reciprocal(const Jet& f) {
  const double v = f.value();
  if (v == 0.0) throw DomainError("Jet: division by a jet with zero value");
  return f.compose({1.0 / v, -1.0 / (v * v), 1.0 / (v * v * v), -1.0 / (v * v * v * v)});
}
inline Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
inline Jet operator/(double a, const Jet& b) { return reciprocal(b) * a; }

inline Jet exp(const Jet& f) {
  const double e = std::exp(f.value());
  return f.compose({e, e, e / 2.0, e / 6.0});
}
inline Jet log(const Jet& f) {
  const double v = f.value();
  if (!(v > 0.0)) throw DomainError("Jet: log of a non-positive value");
  return f.compose({std::log(v), 1.0 / v, -1.0 / (2.0 * v * v), 1.0 / (3.0 * v * v * v)});
}
inline Jet sin(const Jet& f) {
  const double s = std::sin(f.value()), c = std::cos(f.value());
  return f.compose({s, c, -s / 2.0, -c / 6.0});
}
inline Jet cos(const Jet& f) {
  const double s = std::sin(f.value()), c = std::cos(f.value());
  return f.compose({c, -s, -c / 2.0, s / 6.0});
}
inline Jet tanh(const Jet& f) {
  const double t = std::tanh(f.value());
  const double d1 = 1.0 - t * t;
  const double d2 = -2.0 * t * d1;
  const double d3 = -2.0 * d1 * d1 + 4.0 * t * t * d1;
  return f.compose({t, d1, d2 / 2.0, d3 / 6.0});
}
inline Jet sqrt(const Jet& f) {
  const double v = f.value();
  if (!(v > 0.0)) throw DomainError("Jet: sqrt of a non-positive value");
  const double s = std::sqrt(v);
  return f.compose({s, 0.5 / s, -0.125 / (s * v), 0.0625 / (s * v * v)});
}
/// f^p for a constant exponent; integer exponents allow negative bases.
inline Jet pow(const Jet& f, double p) {
  const double v = f.value();
  if (p == std::round(p) && std::fabs(p) <= 64.0) {
    const int n = static_cast<int>(p);
    if (n == 0) return Jet(f.layout(), f.order(), 1.0);
    Jet base = n > 0 ? f : reciprocal(f);
    Jet r = base;
    for (int k = 1; k < std::abs(n); ++k) r = r * base;
    return r;
  }
  if (!(v > 0.0)) throw DomainError("Jet: non-integer power of a non-positive value");
  const double a0 = std::pow(v, p);
  return f.compose({a0, p * a0 / v, p * (p - 1.0) * a0 / (2.0 * v * v), p * (p - 1.0) * (p - 2.0) * a0 / (6.0 * v * v * v)});
}
inline Jet pow(const Jet& f, const Jet& g) { return exp(g * log(f)); }

}  // namespace hlab::calculus
