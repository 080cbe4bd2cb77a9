#include "wchj/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

namespace wchj {

struct Expression::Node {
  enum class Kind { constant, x, y, u, p1, p2, neg, add, sub, mul, div, sin, cos, tanh, exp };
  Kind kind = Kind::constant;
  double value = 0.0;
  int index = 0;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;
using Kind = Node::Kind;

NodePtr leaf(Kind kind, double value = 0.0, int index = 0) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->value = value;
  n->index = index;
  return n;
}

double eval(const Node& n, const EvalContext& c) {
  switch (n.kind) {
    case Kind::constant: return n.value;
    case Kind::x: return c.x[0];
    case Kind::y: return c.x[1];
    case Kind::u: return c.u[n.index];
    case Kind::p1: return c.p[0];
    case Kind::p2: return c.p[1];
    case Kind::neg: return -eval(*n.lhs, c);
    case Kind::add: return eval(*n.lhs, c) + eval(*n.rhs, c);
    case Kind::sub: return eval(*n.lhs, c) - eval(*n.rhs, c);
    case Kind::mul: return eval(*n.lhs, c) * eval(*n.rhs, c);
    case Kind::div: return eval(*n.lhs, c) / eval(*n.rhs, c);
    case Kind::sin: return std::sin(eval(*n.lhs, c));
    case Kind::cos: return std::cos(eval(*n.lhs, c));
    case Kind::tanh: return std::tanh(eval(*n.lhs, c));
    case Kind::exp: return std::exp(eval(*n.lhs, c));
  }
  return 0.0;
}

NodePtr fold(Kind kind, NodePtr lhs, NodePtr rhs = nullptr) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  const bool constant = n->lhs->kind == Kind::constant && (!n->rhs || n->rhs->kind == Kind::constant);
  if (constant) return leaf(Kind::constant, eval(*n, EvalContext{}));
  return n;
}

class Parser {
 public:
  Parser(const std::string& text, const ExpressionScope& scope) : text_(text), scope_(scope) {}

  NodePtr parse() {
    NodePtr root = expression();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return root;
  }

  bool uses_x = false;
  bool uses_u = false;
  bool uses_p = false;

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ExpressionError("expression \"" + text_ + "\": " + what + " at column " + std::to_string(pos_ + 1));
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expression() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+')) lhs = fold(Kind::add, lhs, term());
      else if (accept('-')) lhs = fold(Kind::sub, lhs, term());
      else return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*')) lhs = fold(Kind::mul, lhs, unary());
      else if (accept('/')) lhs = fold(Kind::div, lhs, unary());
      else return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return fold(Kind::neg, unary());
    if (accept('+')) return unary();
    return primary();
  }

  NodePtr primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end");
    const char c = text_[pos_];
    if (accept('(')) {
      NodePtr inner = expression();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return name();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const char* begin = text_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - begin);
    return leaf(Kind::constant, v);
  }

  NodePtr name() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string id = text_.substr(start, pos_ - start);
    if (id == "pi") return leaf(Kind::constant, std::numbers::pi);
    if (id == "sin" || id == "cos" || id == "tanh" || id == "exp") {
      if (!accept('(')) fail("expected '(' after " + id);
      NodePtr arg = expression();
      if (!accept(')')) fail("expected ')'");
      const Kind k = id == "sin" ? Kind::sin : id == "cos" ? Kind::cos : id == "tanh" ? Kind::tanh : Kind::exp;
      return fold(k, arg);
    }
    if (id == "x") {
      uses_x = true;
      return leaf(Kind::x);
    }
    if (id == "y") {
      if (scope_.dim < 2) fail("'y' needs a two-dimensional torus");
      uses_x = true;
      return leaf(Kind::y);
    }
    if (id == "p" || id == "p_1" || id == "p_2") {
      if (!scope_.momentum) fail("'" + id + "' is not available here");
      if (id == "p" && scope_.dim != 1) fail("'p' is ambiguous in two dimensions; use p_1, p_2");
      if (id == "p_2" && scope_.dim < 2) fail("'p_2' needs a two-dimensional torus");
      uses_p = true;
      return leaf(id == "p_2" ? Kind::p2 : Kind::p1);
    }
    if (id.size() > 2 && id[0] == 'u' && id[1] == '_') {
      const std::string digits = id.substr(2);
      const bool numeric = digits.find_first_not_of("0123456789") == std::string::npos;
      const int j = numeric ? std::atoi(digits.c_str()) : 0;
      if (!numeric || j < 1 || j > scope_.components)
        fail("'" + id + "' is not one of u_1..u_" + std::to_string(scope_.components));
      uses_u = true;
      return leaf(Kind::u, 0.0, j - 1);
    }
    pos_ = start;
    fail("unknown name '" + id + "'");
  }

  const std::string& text_;
  ExpressionScope scope_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(const std::string& text, const ExpressionScope& scope) {
  Parser parser(text, scope);
  Expression e;
  e.root_ = parser.parse();
  e.source_ = text;
  e.uses_x_ = parser.uses_x;
  e.uses_u_ = parser.uses_u;
  e.uses_p_ = parser.uses_p;
  return e;
}

double Expression::operator()(const EvalContext& ctx) const {
  if (!root_) throw ExpressionError("empty expression");
  return eval(*root_, ctx);
}

bool Expression::is_zero() const { return root_ && root_->kind == Kind::constant && root_->value == 0.0; }

}  // namespace wchj
