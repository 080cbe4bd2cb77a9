#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>

#include "wchj/geometry.hpp"

namespace wchj {

class ExpressionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Variables visible to an expression.
struct ExpressionScope {
  int components = 0;     // u_1..u_m allowed when > 0
  int dim = 1;            // y, p_2 only when 2
  bool momentum = false;  // p, p_1, p_2
};

struct EvalContext {
  Point x{};
  std::span<const double> u{};
  Point p{};
};

/// Arithmetic over literals, x, y, u_j, p, p_1, p_2, pi with + - * /, unary
/// minus, parentheses and sin, cos, tanh, exp. Parsed once, evaluated many times.
class Expression {
 public:
  struct Node;

  Expression() = default;
  static Expression parse(const std::string& text, const ExpressionScope& scope);

  double operator()(const EvalContext& ctx) const;
  const std::string& source() const noexcept { return source_; }

  bool uses_x() const noexcept { return uses_x_; }
  bool uses_u() const noexcept { return uses_u_; }
  bool uses_p() const noexcept { return uses_p_; }
  /// True when the expression folds to the literal 0.
  bool is_zero() const;

 private:
  std::shared_ptr<const Node> root_;
  std::string source_;
  bool uses_x_ = false;
  bool uses_u_ = false;
  bool uses_p_ = false;
};

}  // namespace wchj
