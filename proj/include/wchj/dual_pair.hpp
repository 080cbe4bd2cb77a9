#pragma once

#include <functional>

#include "wchj/geometry.hpp"

namespace wchj {

/// h(x, p) or l(x, v).
using PhaseFunction = std::function<double(const Point&, const Point&)>;
/// Gradient of a phase function in its second argument.
using PhaseGradient = std::function<Point(const Point&, const Point&)>;

enum class DualMode { closed_form, numeric };

/// A kinetic term h_i together with its convex dual l_i.
struct DualPair {
  PhaseFunction forward;          // h(x, p)
  PhaseFunction backward;         // l(x, v)
  PhaseGradient forward_grad_p;   // dh/dp; empty -> central differences
  PhaseGradient backward_grad_v;  // dl/dv; empty -> central differences
  DualMode mode = DualMode::closed_form;
  bool x_independent = false;
};

}  // namespace wchj
