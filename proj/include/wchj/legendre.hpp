#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>

#include "wchj/dual_pair.hpp"
#include "wchj/model.hpp"

namespace wchj {

/// Raised when the numeric conjugate fails to converge at (x, v).
class DualSolveError : public std::runtime_error {
 public:
  DualSolveError(const Point& x, const Point& v);
  Point x;
  Point v;
};

/// Kinetic term h(x,p) = c(x)|p|^2 with its closed-form dual l(x,v) = |v|^2 / (4 c(x)).
DualPair quadratic_dual(std::function<double(const Point&)> coefficient, bool x_independent);

/// Dual pair for a general strictly convex kinetic term pinched between a|p|^2
/// and A|p|^2. The dual is evaluated pointwise by damped Newton on
/// max_p <p,v> - h(x,p). Throws std::invalid_argument when sampled second
/// differences of h in p are not positive.
DualPair dualize(PhaseFunction h, double a, double A, int dim, PhaseGradient grad_p = {});

struct ConjugatePoint {
  double value = 0.0;  // sup_p <p,v> - h(x,p)
  Point momentum{};    // the maximizer p*
  int iterations = 0;
};

/// Solves sup_p <p,v> - f(x,p) for f with f >= lower|p|^2 and f(x,0) = 0.
ConjugatePoint conjugate(const PhaseFunction& f, const PhaseGradient& grad_p, double lower, int dim,
                         const Point& x, const Point& v);

/// Central-difference gradient of f(x, .) at p.
Point central_gradient(const PhaseFunction& f, const Point& x, const Point& p, int dim, double step = 1e-6);

/// L_i(x,v,u) = l_i(x,v) - P_i(x,u).
double lagrangian(const CoupledSystem& sys, int i, const Point& x, const Point& v, std::span<const double> u);
/// H_i(x,p,u) = h_i(x,p) + P_i(x,u).
double hamiltonian(const CoupledSystem& sys, int i, const Point& x, const Point& p, std::span<const double> u);
/// dH_i/dp; P_i does not depend on p.
Point hamiltonian_grad_p(const CoupledSystem& sys, int i, const Point& x, const Point& p, std::span<const double> u);
/// dL_i/dv.
Point lagrangian_grad_v(const CoupledSystem& sys, int i, const Point& x, const Point& v);

}  // namespace wchj
