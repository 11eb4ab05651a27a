#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "hlab/core/error.hpp"
#include "hlab/gamma/expr.hpp"
#include "hlab/gamma/fields.hpp"
#include "hlab/gamma/jet.hpp"

namespace hlab::calculus {

inline constexpr double kJetRounding = 64.0 * std::numeric_limits<double>::epsilon();

/// Γ-calculus for L = Σ_k ∇_{A^k}² on jets about one point. All operators
/// lower the jet order by the number of derivatives they take.
class JetCalculus {
 public:
  explicit JetCalculus(FieldJets a) : a_(std::move(a)) {
    if (a_.empty() || a_[0].empty()) throw DomainError("JetCalculus: empty field set");
  }

  int m() const { return static_cast<int>(a_.size()); }
  int dim() const { return static_cast<int>(a_[0].size()); }
  const FieldJets& fields() const { return a_; }

  /// Same operators with every coefficient replaced by its absolute value, for
  /// rounding-error magnitudes.
  JetCalculus abs() const {
    FieldJets b = a_;
    for (auto& f : b)
      for (auto& c : f) c = c.abs();
    return JetCalculus(std::move(b));
  }

  Jet nabla(int k, const Jet& f) const {
    check_field(k);
    const auto& ak = a_[static_cast<std::size_t>(k)];
    Jet r = ak[0] * f.derivative(0);
    for (int i = 1; i < dim(); ++i) r += ak[static_cast<std::size_t>(i)] * f.derivative(i);
    return r;
  }
  Jet L_k(int k, const Jet& f) const { return nabla(k, nabla(k, f)); }
  Jet L(const Jet& f) const {
    Jet r = L_k(0, f);
    for (int k = 1; k < m(); ++k) r += L_k(k, f);
    return r;
  }
  /// Σ_k Σ_{ij} a_i^k a_j^k ∂²_{ij}f + Σ_k Σ_{ij} a_j^k ∂_j a_i^k ∂_i f.
  Jet L_expanded(const Jet& f) const {
    Jet r = Jet(f.layout(), std::max(0, f.order() - 2));
    for (int k = 0; k < m(); ++k) {
      const auto& ak = a_[static_cast<std::size_t>(k)];
      for (int i = 0; i < dim(); ++i) {
        const Jet fi = f.derivative(i);
        for (int j = 0; j < dim(); ++j) {
          r += ak[static_cast<std::size_t>(i)] * ak[static_cast<std::size_t>(j)] * fi.derivative(j);
          r += ak[static_cast<std::size_t>(j)] * ak[static_cast<std::size_t>(i)].derivative(j) * fi;
        }
      }
    }
    return r;
  }

  Jet gamma(const Jet& f, const Jet& g) const {
    Jet r = nabla(0, f) * nabla(0, g);
    for (int k = 1; k < m(); ++k) r += nabla(k, f) * nabla(k, g);
    return r;
  }
  /// ½(L(fg) − fLg − gLf).
  Jet gamma_defining(const Jet& f, const Jet& g, bool magnitude = false) const {
    const Jet a = L(f * g), b = f * L(g), c = g * L(f);
    return 0.5 * (magnitude ? a + b + c : a - b - c);
  }

  /// Σ_{k,l} (∇_{A^k}∇_{A^l} f)².
  Jet gamma2_squares(const Jet& f) const {
    std::optional<Jet> r;
    for (int l = 0; l < m(); ++l) {
      const Jet fl = nabla(l, f);
      for (int k = 0; k < m(); ++k) {
        const Jet v = nabla(k, fl);
        if (r) *r += v * v;
        else r = v * v;
      }
    }
    return *r;
  }
  /// ½LΓ(f) − Γ(f, Lf).
  Jet gamma2_defining(const Jet& f, bool magnitude = false) const {
    const Jet a = 0.5 * L(gamma(f, f)), b = gamma(f, L(f));
    return magnitude ? a + b : a - b;
  }

  /// L_k(∇_{A^l} f) − ∇_{A^l}(L_k f).
  Jet commutator(int k, int l, const Jet& f, bool magnitude = false) const {
    const Jet a = L_k(k, nabla(l, f)), b = nabla(l, L_k(k, f));
    return magnitude ? a + b : a - b;
  }

 private:
  FieldJets a_;
  void check_field(int k) const {
    if (k < 0 || k >= m()) throw IndexError("field index out of range");
  }
};

/// Exact jet of Ψ∘f given Ψ as a one-variable expression.
inline Jet compose(const Expr& psi, const Jet& f) {
  const std::vector<Jet> arg{f};
  return psi.eval<Jet>(std::span<const Jet>(arg));
}

/// Ψ(u), Ψ′(u), Ψ″(u) at a real point.
inline std::array<double, 3> derivatives_1d(const Expr& psi, double u) {
  const double x[1] = {u};
  const Jet j = psi.jet(std::span<const double>(x, 1), 2);
  return {j.value(), j.partial({1}), j.partial({2})};
}

struct DualValue {
  double value = 0.0;     // primary route
  double defining = 0.0;  // defining combination
  double error_scale = 0.0;
  double residual() const { return std::fabs(value - defining); }
};

struct CdCheck {
  double gamma2 = 0.0;
  double lower = 0.0;
  double slack = 0.0;
  double scale = 0.0;
  double tolerance = 0.0;
};

struct ChainRuleReport {
  double L_residual = 0.0, L_scale = 0.0;
  double gamma_residual = 0.0, gamma_scale = 0.0;
  double gamma2_residual = 0.0, gamma2_scale = 0.0;
  std::optional<double> log_residual;
  double log_scale = 0.0;
};

/// Point evaluation of the operators on expression-valued functions.
class GammaEngine {
 public:
  GammaEngine(const VectorFieldSet& fields, std::span<const double> x)
      : x_(x.begin(), x.end()), calc_(fields.jets(x)), abs_(calc_.abs()) {}
  /// Uses externally supplied jets, e.g. from finite differences.
  GammaEngine(FieldJets a, std::span<const double> x) : x_(x.begin(), x.end()), calc_(std::move(a)), abs_(calc_.abs()) {}

  const JetCalculus& calculus() const { return calc_; }
  Jet jet(const Expr& f) const { return f.jet(x_); }

  double grad_field(const Jet& f, int k) const { return calc_.nabla(k, f).value(); }

  DualValue apply_L(const Jet& f) const {
    DualValue r;
    r.value = calc_.L_expanded(f).value();
    r.defining = calc_.L(f).value();
    r.error_scale = kJetRounding * (abs_.L_expanded(f.abs()).value() + abs_.L(f.abs()).value());
    return r;
  }

  /// Product route Σ_k ∇_k f ∇_k g against ½(L(fg) − fLg − gLf).
  DualValue gamma(const Jet& f, const Jet& g) const {
    DualValue r;
    r.value = calc_.gamma(f, g).value();
    r.defining = calc_.gamma_defining(f, g).value();
    r.error_scale = kJetRounding * abs_.gamma_defining(f.abs(), g.abs(), true).value();
    return r;
  }

  /// Sum-of-squares route against ½LΓ(f) − Γ(f, Lf).
  DualValue gamma2(const Jet& f) const {
    DualValue r;
    r.value = calc_.gamma2_squares(f).value();
    r.defining = calc_.gamma2_defining(f).value();
    r.error_scale = kJetRounding * abs_.gamma2_defining(f.abs(), true).value();
    return r;
  }

  /// Γ₂(f) − (1/m)(Lf)² with Γ₂ from the defining combination.
  CdCheck cd_inequality(const Jet& f, int m) const {
    if (m < 1) throw DomainError("cd_inequality: m must be positive");
    const auto g2 = gamma2(f);
    const double lf = calc_.L(f).value();
    CdCheck c;
    c.gamma2 = g2.defining;
    c.lower = lf * lf / m;
    c.slack = c.gamma2 - c.lower;
    const double lf_abs = abs_.L(f.abs()).value();
    c.scale = abs_.gamma2_defining(f.abs(), true).value() + lf_abs * lf_abs / m;
    c.tolerance = 10.0 * (g2.error_scale + kJetRounding * lf_abs * lf_abs / m);
    return c;
  }

  DualValue commutator(int k, int l, const Jet& f) const {
    DualValue r;
    r.value = std::fabs(calc_.commutator(k, l, f).value());
    r.defining = 0.0;
    r.error_scale = kJetRounding * abs_.commutator(k, l, f.abs(), true).value();
    return r;
  }

  /// Both sides of the chain rules for Ψ(f), each side evaluated independently.
  /// The log identity is checked on f itself and requires f(x) > 0.
  ChainRuleReport chain_rules(const Jet& f, const Jet& g, const Expr& psi, bool log_case) const {
    ChainRuleReport rep;
    const Jet pf = compose(psi, f);
    const auto [p0, p1, p2] = derivatives_1d(psi, f.value());
    (void)p0;
    const double lf = calc_.L(f).value(), gf = calc_.gamma(f, f).value();
    const double ap1 = std::fabs(p1), ap2 = std::fabs(p2);
    const Jet fa = f.abs(), ga = g.abs();

    rep.L_residual = std::fabs(calc_.L(pf).value() - (p1 * lf + p2 * gf));
    rep.L_scale = abs_.L(pf.abs()).value() + ap1 * abs_.L(fa).value() + ap2 * abs_.gamma(fa, fa).value();

    rep.gamma_residual = std::fabs(calc_.gamma(pf, g).value() - p1 * calc_.gamma(f, g).value());
    rep.gamma_scale = abs_.gamma(pf.abs(), ga).value() + ap1 * abs_.gamma(fa, ga).value();

    const Jet gamma_f = calc_.gamma(f, f);
    const double g2 = calc_.gamma2_defining(f).value();
    const double cross = calc_.gamma(f, gamma_f).value();
    rep.gamma2_residual = std::fabs(calc_.gamma2_defining(pf).value() - (p2 * p2 * gf * gf + p1 * p1 * g2 + p1 * p2 * cross));
    const double gfa = abs_.gamma(fa, fa).value();
    rep.gamma2_scale = abs_.gamma2_defining(pf.abs(), true).value() + p2 * p2 * gfa * gfa +
                       p1 * p1 * abs_.gamma2_defining(fa, true).value() + ap1 * ap2 * abs_.gamma(fa, abs_.gamma(fa, fa)).value();

    if (log_case) {
      const double v = f.value();
      if (!(v > 0.0)) throw DomainError("chain_rules: log case needs f > 0 at the point");
      const double lhs = calc_.gamma2_defining(log(f)).value();
      const double rhs = gf * gf / std::pow(v, 4) - cross / std::pow(v, 3) + g2 / (v * v);
      rep.log_residual = std::fabs(lhs - rhs);
      rep.log_scale = abs_.gamma2_defining(log(f).abs(), true).value() + gfa * gfa / std::pow(v, 4) +
                      abs_.gamma(fa, abs_.gamma(fa, fa)).value() / std::pow(v, 3) +
                      abs_.gamma2_defining(fa, true).value() / (v * v);
    }
    return rep;
  }

 private:
  Point x_;
  JetCalculus calc_;
  JetCalculus abs_;
};

// Convenience forms taking expressions.

inline double grad_field(const Expr& f, const VectorFieldSet& fields, int k, std::span<const double> x) {
  if (k < 0 || k >= fields.m()) throw IndexError("grad_field: field index out of range");
  GammaEngine e(fields, x);
  return e.grad_field(e.jet(f), k);
}

inline DualValue apply_L(const Expr& f, const VectorFieldSet& fields, std::span<const double> x) {
  GammaEngine e(fields, x);
  return e.apply_L(e.jet(f));
}

inline DualValue gamma(const Expr& f, const Expr& g, const VectorFieldSet& fields, std::span<const double> x) {
  GammaEngine e(fields, x);
  return e.gamma(e.jet(f), e.jet(g));
}

inline DualValue gamma2(const Expr& f, const VectorFieldSet& fields, std::span<const double> x) {
  GammaEngine e(fields, x);
  return e.gamma2(e.jet(f));
}

inline CdCheck cd_inequality_check(const Expr& f, const VectorFieldSet& fields, std::span<const double> x, int m) {
  GammaEngine e(fields, x);
  return e.cd_inequality(e.jet(f), m);
}

inline DualValue commutator_check(int k, int l, const Expr& f, const VectorFieldSet& fields, std::span<const double> x) {
  if (k < 0 || k >= fields.m() || l < 0 || l >= fields.m()) throw IndexError("commutator_check: field index out of range");
  GammaEngine e(fields, x);
  return e.commutator(k, l, e.jet(f));
}

inline ChainRuleReport chain_rule_checks(const Expr& f, const Expr& psi, const VectorFieldSet& fields,
                                         std::span<const double> x, const Expr& g, bool log_case = false) {
  GammaEngine e(fields, x);
  return e.chain_rules(e.jet(f), e.jet(g), psi, log_case);
}

/// Γ(f, gh) against gΓ(f,h) + hΓ(f,g).
inline DualValue gamma_product_rule(const Expr& f, const Expr& g, const Expr& h, const VectorFieldSet& fields,
                                    std::span<const double> x) {
  GammaEngine e(fields, x);
  const Jet jf = e.jet(f), jg = e.jet(g), jh = e.jet(h);
  const auto& c = e.calculus();
  DualValue r;
  r.value = c.gamma(jf, jg * jh).value();
  r.defining = jg.value() * c.gamma(jf, jh).value() + jh.value() * c.gamma(jf, jg).value();
  const JetCalculus a = c.abs();
  r.error_scale = kJetRounding * (a.gamma(jf.abs(), (jg * jh).abs()).value() + std::fabs(jg.value()) * a.gamma(jf.abs(), jh.abs()).value() +
                                  std::fabs(jh.value()) * a.gamma(jf.abs(), jg.abs()).value());
  return r;
}

}  // namespace hlab::calculus
