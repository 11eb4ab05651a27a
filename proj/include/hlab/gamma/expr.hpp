#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hlab/core/error.hpp"
#include "hlab/gamma/jet.hpp"

namespace hlab::calculus {

/// Immutable arithmetic expression over coordinates x_1..x_d, evaluable on
/// doubles and on jets.
class Expr {
 public:
  enum class Op { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Exp, Log, Sin, Cos, Sqrt, Tanh };

  Expr() : Expr(0.0) {}
  Expr(double c) : node_(std::make_shared<Node>(Node{Op::Const, c, 0, {}})) {}

  static Expr var(int i) {
    if (i < 0) throw IndexError("Expr: negative coordinate index");
    return Expr(std::make_shared<Node>(Node{Op::Var, 0.0, i, {}}));
  }
  static Expr unary(Op op, Expr a) { return Expr(std::make_shared<Node>(Node{op, 0.0, 0, {a.node_}})); }
  static Expr binary(Op op, Expr a, Expr b) { return Expr(std::make_shared<Node>(Node{op, 0.0, 0, {a.node_, b.node_}})); }

  /// Largest coordinate index used, plus one.
  int arity() const { return arity(*node_); }

  template <class T>
  T eval(std::span<const T> x) const {
    return eval_node(*node_, x);
  }
  double operator()(std::span<const double> x) const { return eval<double>(x); }
  Jet jet(std::span<const double> x, int order = kMaxJetOrder) const {
    const auto vars = Jet::variables(x, order);
    return eval<Jet>(std::span<const Jet>(vars));
  }

  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    print(os, *node_);
    return os.str();
  }

  /// Symbolic ∂f/∂x_i with constant folding. Used where the same derivative is
  /// evaluated many times on doubles (SDE drift).
  Expr derivative(int i) const { return Expr(diff(node_, i)); }

 private:
  struct Node {
    Op op;
    double value;
    int index;
    std::vector<std::shared_ptr<const Node>> args;
  };
  std::shared_ptr<const Node> node_;

  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  using NodePtr = std::shared_ptr<const Node>;
  static NodePtr cnode(double v) { return std::make_shared<Node>(Node{Op::Const, v, 0, {}}); }
  static bool is_const(const NodePtr& n, double v) { return n->op == Op::Const && n->value == v; }
  static NodePtr make(Op op, NodePtr a, NodePtr b = nullptr) {
    const bool ca = a->op == Op::Const, cb = b && b->op == Op::Const;
    switch (op) {
      case Op::Add:
        if (is_const(a, 0.0)) return b;
        if (is_const(b, 0.0)) return a;
        break;
      case Op::Sub:
        if (is_const(b, 0.0)) return a;
        if (is_const(a, 0.0)) return make(Op::Neg, b);
        break;
      case Op::Mul:
        if (is_const(a, 0.0) || is_const(b, 0.0)) return cnode(0.0);
        if (is_const(a, 1.0)) return b;
        if (is_const(b, 1.0)) return a;
        break;
      case Op::Div:
        if (is_const(a, 0.0)) return cnode(0.0);
        if (is_const(b, 1.0)) return a;
        break;
      case Op::Neg:
        if (ca) return cnode(-a->value);
        break;
      default: break;
    }
    if (ca && (!b || cb) && op != Op::Div && op != Op::Log) {
      std::vector<double> none;
      Node tmp{op, 0.0, 0, {a}};
      if (b) tmp.args.push_back(b);
      return cnode(eval_node<double>(tmp, std::span<const double>(none)));
    }
    Node n{op, 0.0, 0, {a}};
    if (b) n.args.push_back(b);
    return std::make_shared<Node>(std::move(n));
  }

  static NodePtr diff(const NodePtr& n, int i) {
    const auto& a = n->args;
    switch (n->op) {
      case Op::Const: return cnode(0.0);
      case Op::Var: return cnode(n->index == i ? 1.0 : 0.0);
      case Op::Neg: return make(Op::Neg, diff(a[0], i));
      case Op::Add: return make(Op::Add, diff(a[0], i), diff(a[1], i));
      case Op::Sub: return make(Op::Sub, diff(a[0], i), diff(a[1], i));
      case Op::Mul:
        return make(Op::Add, make(Op::Mul, diff(a[0], i), a[1]), make(Op::Mul, a[0], diff(a[1], i)));
      case Op::Div: {
        // (u'v − uv')/v²
        const NodePtr num = make(Op::Sub, make(Op::Mul, diff(a[0], i), a[1]), make(Op::Mul, a[0], diff(a[1], i)));
        return make(Op::Div, num, make(Op::Mul, a[1], a[1]));
      }
      case Op::Pow: {
        if (a[1]->op == Op::Const) {
          const double p = a[1]->value;
          return make(Op::Mul, make(Op::Mul, cnode(p), make(Op::Pow, a[0], cnode(p - 1.0))), diff(a[0], i));
        }
        // u^v (v' log u + v u'/u)
        const NodePtr t = make(Op::Add, make(Op::Mul, diff(a[1], i), make(Op::Log, a[0])),
                               make(Op::Div, make(Op::Mul, a[1], diff(a[0], i)), a[0]));
        return make(Op::Mul, n, t);
      }
      case Op::Exp: return make(Op::Mul, n, diff(a[0], i));
      case Op::Log: return make(Op::Div, diff(a[0], i), a[0]);
      case Op::Sin: return make(Op::Mul, make(Op::Cos, a[0]), diff(a[0], i));
      case Op::Cos: return make(Op::Neg, make(Op::Mul, make(Op::Sin, a[0]), diff(a[0], i)));
      case Op::Sqrt: return make(Op::Div, diff(a[0], i), make(Op::Mul, cnode(2.0), n));
      case Op::Tanh: {
        const NodePtr s = make(Op::Sub, cnode(1.0), make(Op::Mul, n, n));
        return make(Op::Mul, s, diff(a[0], i));
      }
    }
    throw DomainError("Expr: unknown node");
  }

  static int arity(const Node& n) {
    int r = n.op == Op::Var ? n.index + 1 : 0;
    for (const auto& a : n.args) r = std::max(r, arity(*a));
    return r;
  }

  static Jet constant_like(const Jet& ref, double v) { return Jet(ref.layout(), kMaxJetOrder, v); }
  static double constant_like(double, double v) { return v; }

  template <class T>
  static T eval_node(const Node& n, std::span<const T> x) {
    using std::cos;
    using std::exp;
    using std::log;
    using std::sin;
    using std::sqrt;
    using std::tanh;
    switch (n.op) {
      case Op::Const:
        if constexpr (std::is_same_v<T, double>) {
          return n.value;
        } else {
          if (x.empty()) throw DomainError("Expr: jet evaluation needs at least one coordinate");
          return constant_like(x[0], n.value).truncated(x[0].order());
        }
      case Op::Var:
        if (static_cast<std::size_t>(n.index) >= x.size()) throw IndexError("Expr: coordinate index exceeds point dimension");
        return x[static_cast<std::size_t>(n.index)];
      case Op::Neg: return -eval_node(*n.args[0], x);
      case Op::Add: return eval_node(*n.args[0], x) + eval_node(*n.args[1], x);
      case Op::Sub: return eval_node(*n.args[0], x) - eval_node(*n.args[1], x);
      case Op::Mul: return eval_node(*n.args[0], x) * eval_node(*n.args[1], x);
      case Op::Div: {
        if constexpr (std::is_same_v<T, double>) {
          const double den = eval_node(*n.args[1], x);
          if (den == 0.0) throw DomainError("Expr: division by zero");
          return eval_node(*n.args[0], x) / den;
        } else {
          return eval_node(*n.args[0], x) / eval_node(*n.args[1], x);
        }
      }
      case Op::Pow: {
        const Node& e = *n.args[1];
        if (e.op == Op::Const) {
          if constexpr (std::is_same_v<T, double>) {
            return std::pow(eval_node(*n.args[0], x), e.value);
          } else {
            return pow(eval_node(*n.args[0], x), e.value);
          }
        }
        if constexpr (std::is_same_v<T, double>) {
          return std::pow(eval_node(*n.args[0], x), eval_node(e, x));
        } else {
          return pow(eval_node(*n.args[0], x), eval_node(e, x));
        }
      }
      case Op::Exp: return exp(eval_node(*n.args[0], x));
      case Op::Log: {
        const T v = eval_node(*n.args[0], x);
        if constexpr (std::is_same_v<T, double>) {
          if (!(v > 0.0)) throw DomainError("Expr: log of a non-positive value");
        }
        return log(v);
      }
      case Op::Sin: return sin(eval_node(*n.args[0], x));
      case Op::Cos: return cos(eval_node(*n.args[0], x));
      case Op::Sqrt: return sqrt(eval_node(*n.args[0], x));
      case Op::Tanh: return tanh(eval_node(*n.args[0], x));
    }
    throw DomainError("Expr: unknown node");
  }

  static void print(std::ostream& os, const Node& n) {
    auto fn = [&](const char* name) {
      os << name << '(';
      print(os, *n.args[0]);
      os << ')';
    };
    auto bin = [&](const char* op) {
      os << '(';
      print(os, *n.args[0]);
      os << op;
      print(os, *n.args[1]);
      os << ')';
    };
    switch (n.op) {
      case Op::Const: os << n.value; break;
      case Op::Var: os << 'x' << n.index + 1; break;
      case Op::Neg: os << "(-"; print(os, *n.args[0]); os << ')'; break;
      case Op::Add: bin("+"); break;
      case Op::Sub: bin("-"); break;
      case Op::Mul: bin("*"); break;
      case Op::Div: bin("/"); break;
      case Op::Pow: bin("^"); break;
      case Op::Exp: fn("exp"); break;
      case Op::Log: fn("log"); break;
      case Op::Sin: fn("sin"); break;
      case Op::Cos: fn("cos"); break;
      case Op::Sqrt: fn("sqrt"); break;
      case Op::Tanh: fn("tanh"); break;
    }
  }
};

inline Expr operator+(Expr a, Expr b) { return Expr::binary(Expr::Op::Add, a, b); }
inline Expr operator-(Expr a, Expr b) { return Expr::binary(Expr::Op::Sub, a, b); }
inline Expr operator*(Expr a, Expr b) { return Expr::binary(Expr::Op::Mul, a, b); }
inline Expr operator/(Expr a, Expr b) { return Expr::binary(Expr::Op::Div, a, b); }
inline Expr operator-(Expr a) { return Expr::unary(Expr::Op::Neg, a); }
inline Expr pow(Expr a, Expr b) { return Expr::binary(Expr::Op::Pow, a, b); }
inline Expr exp(Expr a) { return Expr::unary(Expr::Op::Exp, a); }
inline Expr log(Expr a) { return Expr::unary(Expr::Op::Log, a); }
inline Expr sin(Expr a) { return Expr::unary(Expr::Op::Sin, a); }
inline Expr cos(Expr a) { return Expr::unary(Expr::Op::Cos, a); }
inline Expr sqrt(Expr a) { return Expr::unary(Expr::Op::Sqrt, a); }
inline Expr tanh(Expr a) { return Expr::unary(Expr::Op::Tanh, a); }

namespace detail {

class ExprParser {
 public:
  ExprParser(const std::string& text, std::vector<std::string> names) : s_(text), names_(std::move(names)) {}

  Expr parse() {
    Expr e = sum();
    skip();
    if (pos_ != s_.size()) fail("unexpected character");
    return e;
  }

 private:
  const std::string& s_;
  std::vector<std::string> names_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("expression: " + what + " at offset " + std::to_string(pos_) + " in \"" + s_ + "\"");
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr sum() {
    Expr e = product();
    for (;;) {
      if (accept('+')) e = e + product();
      else if (accept('-')) e = e - product();
      else return e;
    }
  }
  Expr product() {
    Expr e = signed_factor();
    for (;;) {
      if (accept('*')) e = e * signed_factor();
      else if (accept('/')) e = e / signed_factor();
      else return e;
    }
  }
  Expr signed_factor() {
    if (accept('-')) return -signed_factor();
    if (accept('+')) return signed_factor();
    return power();
  }
  Expr power() {
    Expr base = primary();
    if (accept('^')) return pow(base, signed_factor());
    return base;
  }
  Expr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = sum();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      return Expr(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string id = s_.substr(start, pos_ - start);
      skip();
      if (pos_ < s_.size() && s_[pos_] == '(') return call(id);
      if (id == "pi") return Expr(M_PI);
      if (id == "e") return Expr(M_E);
      for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == id) return Expr::var(static_cast<int>(i));
      if (id == "x" && names_.size() == 1) return Expr::var(0);
      fail("unknown identifier '" + id + "'");
    }
    fail("unexpected character");
  }
  Expr call(const std::string& id) {
    accept('(');
    Expr a = sum();
    if (id == "pow") {
      if (!accept(',')) fail("pow expects two arguments");
      Expr b = sum();
      if (!accept(')')) fail("expected ')'");
      return pow(a, b);
    }
    if (!accept(')')) fail("expected ')'");
    if (id == "exp") return exp(a);
    if (id == "log") return log(a);
    if (id == "sin") return sin(a);
    if (id == "cos") return cos(a);
    if (id == "sqrt") return sqrt(a);
    if (id == "tanh") return tanh(a);
    fail("unknown function '" + id + "'");
  }
};

}  // namespace detail

inline std::vector<std::string> coordinate_names(int d) {
  std::vector<std::string> names;
  for (int i = 1; i <= d; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

/// Parses +, −, *, /, ^, pow, exp, log, sin, cos, sqrt, tanh, numbers, pi, e
/// and the given variable names. With a single variable, x also names it.
inline Expr parse_expression(const std::string& text, const std::vector<std::string>& names) {
  return detail::ExprParser(text, names).parse();
}

inline Expr parse_expression(const std::string& text, int d) { return parse_expression(text, coordinate_names(d)); }

}  // namespace hlab::calculus
