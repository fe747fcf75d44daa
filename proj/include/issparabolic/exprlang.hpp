#pragma once

// Expression language for coefficient fields, nonlinearities and disturbance
// signals: scalar functions of (r, t, u).
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | 'r' | 't' | 'u' | func '(' expr ')' | '(' expr ')'
//   func    := sin | cos | exp | ln | abs | sqrt | tanh

#include <array>
#include <charconv>
#include <cctype>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>

#include "errors.hpp"

namespace issp::expr {

enum class Var { r, t, u };
enum class Func { sin, cos, exp, ln, abs, sqrt, tanh };
enum class Kind { number, variable, negate, add, sub, mul, div, pow, call };

inline constexpr std::array<std::string_view, 7> func_names = {"sin", "cos",  "exp", "ln",
                                                               "abs", "sqrt", "tanh"};

inline std::string_view name_of(Func f) { return func_names[static_cast<std::size_t>(f)]; }

inline char name_of(Var v)
{
  switch (v) {
    case Var::r: return 'r';
    case Var::t: return 't';
    case Var::u: return 'u';
  }
  return '?';
}

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node
{
  Kind kind = Kind::number;
  double value = 0.0;
  Var var = Var::u;
  Func func = Func::sin;
  NodePtr lhs;  // operand of negate/call, left operand of binaries
  NodePtr rhs;
};

/// Values for r, t, u; any may be left unbound.
struct Bindings
{
  std::optional<double> r;
  std::optional<double> t;
  std::optional<double> u;

  static Bindings at(double r, double t, double u) { return Bindings{r, t, u}; }
};

/// Immutable expression tree. Copies share nodes.
class Expression
{
public:
  Expression() : root_(number_node(0.0)) {}
  explicit Expression(NodePtr root) : root_(std::move(root)) {}

  static Expression constant(double v) { return Expression(number_node(v)); }
  static Expression variable(Var v)
  {
    auto n = std::make_shared<Node>();
    n->kind = Kind::variable;
    n->var = v;
    return Expression(std::move(n));
  }

  const Node& root() const { return *root_; }
  const NodePtr& root_ptr() const { return root_; }

  double evaluate(const Bindings& b) const;
  double operator()(double r, double t, double u) const { return evaluate(Bindings::at(r, t, u)); }

  bool depends_on(Var v) const;
  bool is_constant(double v) const { return root_->kind == Kind::number && root_->value == v; }

  static NodePtr number_node(double v)
  {
    auto n = std::make_shared<Node>();
    n->kind = Kind::number;
    n->value = v;
    return n;
  }

private:
  NodePtr root_;
};

namespace detail {

inline bool depends(const Node& n, Var v)
{
  switch (n.kind) {
    case Kind::number: return false;
    case Kind::variable: return n.var == v;
    case Kind::negate:
    case Kind::call: return depends(*n.lhs, v);
    default: return depends(*n.lhs, v) || depends(*n.rhs, v);
  }
}

inline double checked(double x, const char* what)
{
  if (!std::isfinite(x))
    throw DomainError(std::string("non-finite result in ") + what);
  return x;
}

inline double eval(const Node& n, const Bindings& b)
{
  switch (n.kind) {
    case Kind::number: return n.value;
    case Kind::variable: {
      const auto& slot = n.var == Var::r ? b.r : n.var == Var::t ? b.t : b.u;
      if (!slot)
        throw UnboundVariableError(std::string("unbound variable '") + name_of(n.var) + "'");
      return *slot;
    }
    case Kind::negate: return -eval(*n.lhs, b);
    case Kind::add: return checked(eval(*n.lhs, b) + eval(*n.rhs, b), "+");
    case Kind::sub: return checked(eval(*n.lhs, b) - eval(*n.rhs, b), "-");
    case Kind::mul: return checked(eval(*n.lhs, b) * eval(*n.rhs, b), "*");
    case Kind::div: {
      const double den = eval(*n.rhs, b);
      const double num = eval(*n.lhs, b);
      if (den == 0.0)
        throw DomainError("division by zero");
      return checked(num / den, "/");
    }
    case Kind::pow: {
      const double base = eval(*n.lhs, b);
      const double ex = eval(*n.rhs, b);
      if (base < 0.0 && std::trunc(ex) != ex)
        throw DomainError("negative base raised to a non-integer power");
      if (base == 0.0 && ex < 0.0)
        throw DomainError("zero raised to a negative power");
      return checked(std::pow(base, ex), "^");
    }
    case Kind::call: {
      const double x = eval(*n.lhs, b);
      switch (n.func) {
        case Func::sin: return std::sin(x);
        case Func::cos: return std::cos(x);
        case Func::exp: return checked(std::exp(x), "exp");
        case Func::ln:
          if (x <= 0.0)
            throw DomainError("ln of a non-positive argument");
          return std::log(x);
        case Func::abs: return std::abs(x);
        case Func::sqrt:
          if (x < 0.0)
            throw DomainError("sqrt of a negative argument");
          return std::sqrt(x);
        case Func::tanh: return std::tanh(x);
      }
    }
  }
  throw DomainError("malformed expression node");
}

}  // namespace detail

inline double Expression::evaluate(const Bindings& b) const { return detail::eval(*root_, b); }

inline bool Expression::depends_on(Var v) const { return detail::depends(*root_, v); }

// ---------------------------------------------------------------------------
// Construction helpers with constant folding

inline NodePtr make_unary(Kind k, NodePtr a, Func f = Func::sin)
{
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->func = f;
  n->lhs = std::move(a);
  return n;
}

inline NodePtr make_binary(Kind k, NodePtr a, NodePtr b)
{
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

namespace fold {

inline bool is_num(const NodePtr& n) { return n->kind == Kind::number; }
inline bool is_num(const NodePtr& n, double v) { return is_num(n) && n->value == v; }

inline NodePtr num(double v) { return Expression::number_node(v); }

inline NodePtr neg(NodePtr a)
{
  if (is_num(a))
    return num(-a->value);
  if (a->kind == Kind::negate)
    return a->lhs;
  return make_unary(Kind::negate, std::move(a));
}

inline NodePtr add(NodePtr a, NodePtr b)
{
  if (is_num(a) && is_num(b))
    return num(a->value + b->value);
  if (is_num(a, 0.0))
    return b;
  if (is_num(b, 0.0))
    return a;
  return make_binary(Kind::add, std::move(a), std::move(b));
}

inline NodePtr sub(NodePtr a, NodePtr b)
{
  if (is_num(a) && is_num(b))
    return num(a->value - b->value);
  if (is_num(b, 0.0))
    return a;
  if (is_num(a, 0.0))
    return neg(std::move(b));
  return make_binary(Kind::sub, std::move(a), std::move(b));
}

inline NodePtr mul(NodePtr a, NodePtr b)
{
  if (is_num(a) && is_num(b))
    return num(a->value * b->value);
  if (is_num(a, 0.0) || is_num(b, 0.0))
    return num(0.0);
  if (is_num(a, 1.0))
    return b;
  if (is_num(b, 1.0))
    return a;
  return make_binary(Kind::mul, std::move(a), std::move(b));
}

inline NodePtr div(NodePtr a, NodePtr b)
{
  if (is_num(a, 0.0) && !is_num(b, 0.0))
    return num(0.0);
  if (is_num(b, 1.0))
    return a;
  if (is_num(a) && is_num(b) && b->value != 0.0)
    return num(a->value / b->value);
  return make_binary(Kind::div, std::move(a), std::move(b));
}

inline NodePtr pow(NodePtr a, NodePtr b)
{
  if (is_num(b, 1.0))
    return a;
  if (is_num(b, 0.0))
    return num(1.0);
  return make_binary(Kind::pow, std::move(a), std::move(b));
}

inline NodePtr call(Func f, NodePtr a) { return make_unary(Kind::call, std::move(a), f); }

}  // namespace fold

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class Parser
{
public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse()
  {
    skip_ws();
    if (pos_ == text_.size())
      throw SyntaxError(pos_, "empty expression");
    auto e = parse_expr();
    skip_ws();
    if (pos_ != text_.size())
      throw SyntaxError(pos_, std::string("expected operator or end of input, found '") +
                                  text_[pos_] + "'");
    return e;
  }

private:
  std::string_view text_;
  std::size_t pos_ = 0;

  void skip_ws()
  {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool accept(char c)
  {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr parse_expr()
  {
    auto lhs = parse_term();
    for (;;) {
      if (accept('+'))
        lhs = make_binary(Kind::add, lhs, parse_term());
      else if (accept('-'))
        lhs = make_binary(Kind::sub, lhs, parse_term());
      else
        return lhs;
    }
  }

  NodePtr parse_term()
  {
    auto lhs = parse_unary();
    for (;;) {
      if (accept('*'))
        lhs = make_binary(Kind::mul, lhs, parse_unary());
      else if (accept('/'))
        lhs = make_binary(Kind::div, lhs, parse_unary());
      else
        return lhs;
    }
  }

  NodePtr parse_unary()
  {
    if (accept('-')) {
      auto operand = parse_unary();
      // A negated literal is a literal, so printed negative numbers read back unchanged.
      if (operand->kind == Kind::number)
        return Expression::number_node(-operand->value);
      return make_unary(Kind::negate, operand);
    }
    return parse_power();
  }

  NodePtr parse_power()
  {
    auto base = parse_primary();
    if (accept('^'))
      return make_binary(Kind::pow, base, parse_unary());
    return base;
  }

  NodePtr parse_primary()
  {
    skip_ws();
    if (pos_ == text_.size())
      throw SyntaxError(pos_, "expected a number, variable, function or '(' but input ended");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
      return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
      return parse_identifier();
    if (c == '(') {
      ++pos_;
      auto inner = parse_expr();
      if (!accept(')'))
        throw SyntaxError(pos_, "expected ')'");
      return inner;
    }
    throw SyntaxError(pos_, std::string("expected a number, variable, function or '(' but found '") +
                                c + "'");
  }

  NodePtr parse_number()
  {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
        ++pos_;
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-'))
        ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
        digits();
      else
        pos_ = save;
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (ec != std::errc() || ptr != text_.data() + pos_)
      throw SyntaxError(start, "malformed number");
    return Expression::number_node(v);
  }

  NodePtr parse_identifier()
  {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string_view id = text_.substr(start, pos_ - start);
    if (id == "r" || id == "t" || id == "u")
      return Expression::variable(id == "r" ? Var::r : id == "t" ? Var::t : Var::u).root_ptr();
    for (std::size_t k = 0; k < func_names.size(); ++k) {
      if (id == func_names[k]) {
        if (!accept('('))
          throw SyntaxError(pos_, "expected '(' after function name '" + std::string(id) + "'");
        auto arg = parse_expr();
        if (!accept(')'))
          throw SyntaxError(pos_, "expected ')'");
        return make_unary(Kind::call, arg, static_cast<Func>(k));
      }
    }
    throw SyntaxError(start, "unknown identifier '" + std::string(id) + "'");
  }
};

}  // namespace detail

inline Expression parse(std::string_view text) { return Expression(detail::Parser(text).parse()); }

// ---------------------------------------------------------------------------
// Printing: fully parenthesised, numbers in shortest round-trip form.

namespace detail {

inline std::string format_number(double v)
{
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline void print_to(const Node& n, std::string& out)
{
  switch (n.kind) {
    case Kind::number:
      if (n.value < 0.0 || (n.value == 0.0 && std::signbit(n.value)))
        out += "(-" + format_number(-n.value) + ")";
      else
        out += format_number(n.value);
      return;
    case Kind::variable: out += name_of(n.var); return;
    case Kind::negate:
      out += "(-";
      print_to(*n.lhs, out);
      out += ")";
      return;
    case Kind::call:
      out += name_of(n.func);
      out += "(";
      print_to(*n.lhs, out);
      out += ")";
      return;
    default: break;
  }
  const char op = n.kind == Kind::add   ? '+'
                  : n.kind == Kind::sub ? '-'
                  : n.kind == Kind::mul ? '*'
                  : n.kind == Kind::div ? '/'
                                        : '^';
  out += "(";
  print_to(*n.lhs, out);
  out += ' ';
  out += op;
  out += ' ';
  print_to(*n.rhs, out);
  out += ")";
}

inline bool equal(const Node& a, const Node& b)
{
  if (a.kind != b.kind)
    return false;
  switch (a.kind) {
    case Kind::number: return a.value == b.value;
    case Kind::variable: return a.var == b.var;
    case Kind::negate: return equal(*a.lhs, *b.lhs);
    case Kind::call: return a.func == b.func && equal(*a.lhs, *b.lhs);
    default: return equal(*a.lhs, *b.lhs) && equal(*a.rhs, *b.rhs);
  }
}

}  // namespace detail

inline std::string print(const Expression& e)
{
  std::string out;
  detail::print_to(e.root(), out);
  return out;
}

/// Structural equality of two trees.
inline bool structurally_equal(const Expression& a, const Expression& b)
{
  return detail::equal(a.root(), b.root());
}

// ---------------------------------------------------------------------------
// Symbolic differentiation

namespace detail {

inline NodePtr diff(const NodePtr& n, Var v)
{
  using namespace fold;
  switch (n->kind) {
    case Kind::number: return num(0.0);
    case Kind::variable: return num(n->var == v ? 1.0 : 0.0);
    case Kind::negate: return neg(diff(n->lhs, v));
    case Kind::add: return add(diff(n->lhs, v), diff(n->rhs, v));
    case Kind::sub: return sub(diff(n->lhs, v), diff(n->rhs, v));
    case Kind::mul:
      return add(mul(diff(n->lhs, v), n->rhs), mul(n->lhs, diff(n->rhs, v)));
    case Kind::div: {
      // (f/g)' = f'/g - f g' / g^2
      auto df = diff(n->lhs, v);
      auto dg = diff(n->rhs, v);
      return sub(fold::div(df, n->rhs), fold::div(mul(n->lhs, dg), fold::pow(n->rhs, num(2.0))));
    }
    case Kind::pow: {
      const NodePtr& f = n->lhs;
      const NodePtr& g = n->rhs;
      if (!depends(*g, v)) {
        // (f^c)' = c f^(c-1) f'
        return mul(mul(g, fold::pow(f, sub(g, num(1.0)))), diff(f, v));
      }
      // (f^g)' = f^g (g' ln f + g f' / f)
      return mul(n, add(mul(diff(g, v), call(Func::ln, f)), fold::div(mul(g, diff(f, v)), f)));
    }
    case Kind::call: {
      const NodePtr& x = n->lhs;
      auto dx = diff(x, v);
      if (is_num(dx, 0.0))
        return num(0.0);
      NodePtr outer;
      switch (n->func) {
        case Func::sin: outer = call(Func::cos, x); break;
        case Func::cos: outer = neg(call(Func::sin, x)); break;
        case Func::exp: outer = n; break;
        case Func::ln: return fold::div(dx, x);
        case Func::abs: outer = fold::div(x, call(Func::abs, x)); break;
        case Func::sqrt: return fold::div(dx, mul(num(2.0), n));
        case Func::tanh: outer = sub(num(1.0), fold::pow(n, num(2.0))); break;
      }
      return mul(outer, dx);
    }
  }
  return num(0.0);
}

}  // namespace detail

/// Exact symbolic derivative with respect to `v`; only constant folding is applied.
inline Expression derivative(const Expression& e, Var v)
{
  return Expression(detail::diff(e.root_ptr(), v));
}

// Arithmetic for building expressions programmatically (scenario scaling, tests).
inline Expression operator*(double k, const Expression& e)
{
  return Expression(fold::mul(fold::num(k), e.root_ptr()));
}
inline Expression operator+(const Expression& a, const Expression& b)
{
  return Expression(fold::add(a.root_ptr(), b.root_ptr()));
}
inline Expression operator-(const Expression& a, const Expression& b)
{
  return Expression(fold::sub(a.root_ptr(), b.root_ptr()));
}
inline Expression operator*(const Expression& a, const Expression& b)
{
  return Expression(fold::mul(a.root_ptr(), b.root_ptr()));
}

}  // namespace issp::expr
