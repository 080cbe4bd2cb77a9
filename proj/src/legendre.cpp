#include "wchj/legendre.hpp"

#include <cmath>
#include <sstream>

#include "wchj/sampling.hpp"

namespace wchj {

namespace {

std::string dual_error_message(const Point& x, const Point& v) {
  std::ostringstream msg;
  msg << "dual solve failed at x=(" << x[0] << ", " << x[1] << "), v=(" << v[0] << ", " << v[1] << ")";
  return msg.str();
}

constexpr int kMaxNewtonIterations = 100;

}  // namespace

DualSolveError::DualSolveError(const Point& x_, const Point& v_)
    : std::runtime_error(dual_error_message(x_, v_)), x(x_), v(v_) {}

Point central_gradient(const PhaseFunction& f, const Point& x, const Point& p, int dim, double step) {
  Point g{0.0, 0.0};
  for (int d = 0; d < dim; ++d) {
    Point pp = p, pm = p;
    pp[d] += step;
    pm[d] -= step;
    g[d] = (f(x, pp) - f(x, pm)) / (2 * step);
  }
  return g;
}

DualPair quadratic_dual(std::function<double(const Point&)> coefficient, bool x_independent) {
  DualPair pair;
  pair.mode = DualMode::closed_form;
  pair.x_independent = x_independent;
  pair.forward = [c = coefficient](const Point& x, const Point& p) { return c(x) * norm_squared(p); };
  pair.backward = [c = coefficient](const Point& x, const Point& v) { return norm_squared(v) / (4.0 * c(x)); };
  pair.forward_grad_p = [c = coefficient](const Point& x, const Point& p) { return (2.0 * c(x)) * p; };
  pair.backward_grad_v = [c = coefficient](const Point& x, const Point& v) { return (1.0 / (2.0 * c(x))) * v; };
  return pair;
}

ConjugatePoint conjugate(const PhaseFunction& f, const PhaseGradient& grad_p, double lower, int dim,
                         const Point& x, const Point& v) {
  auto gradient = [&](const Point& p) { return grad_p ? grad_p(x, p) : central_gradient(f, x, p, dim); };
  auto objective = [&](const Point& p) { return dot(p, v) - f(x, p); };

  // |p*| <= |v| / lower: convexity gives f(p*) <= <v,p*>, and f(p*) >= lower |p*|^2.
  const double radius = norm(v) / lower;
  auto project = [&](Point p) {
    const double r = norm(p);
    return r > radius && r > 0.0 ? (radius / r) * p : p;
  };

  ConjugatePoint out;
  Point p = project((1.0 / (2.0 * lower)) * v);
  double value = objective(p);
  const double grad_tol = 1e-8 * (1.0 + norm(v));

  for (int it = 0; it < kMaxNewtonIterations; ++it) {
    out.iterations = it + 1;
    const Point g = v - gradient(p);
    if (norm(g) <= grad_tol) {
      out.value = value;
      out.momentum = p;
      return out;
    }
    // Hessian of f in p by differences of the gradient.
    constexpr double delta = 1e-5;
    double hess[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
    for (int b = 0; b < dim; ++b) {
      Point pp = p, pm = p;
      pp[b] += delta;
      pm[b] -= delta;
      const Point gp = gradient(pp), gm = gradient(pm);
      for (int a = 0; a < dim; ++a) hess[a][b] = (gp[a] - gm[a]) / (2 * delta);
    }
    Point step{0.0, 0.0};
    if (dim == 1) {
      step[0] = hess[0][0] > 0.0 ? g[0] / hess[0][0] : g[0] / (2.0 * lower);
    } else {
      const double h01 = 0.5 * (hess[0][1] + hess[1][0]);
      const double det = hess[0][0] * hess[1][1] - h01 * h01;
      if (hess[0][0] > 0.0 && det > 0.0) {
        step = {(hess[1][1] * g[0] - h01 * g[1]) / det, (hess[0][0] * g[1] - h01 * g[0]) / det};
      } else {
        step = (1.0 / (2.0 * lower)) * g;
      }
    }
    double t = 1.0;
    bool accepted = false;
    Point next = p;
    double next_value = value;
    while (t > 1e-12) {
      next = project(p + t * step);
      next_value = objective(next);
      if (next_value >= value - 1e-15 * (1.0 + std::abs(value))) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    const double moved = norm(next - p);
    p = next;
    value = next_value;
    if (moved <= 1e-15 * (1.0 + norm(p))) {
      out.value = value;
      out.momentum = p;
      return out;
    }
  }
  throw DualSolveError(x, v);
}

DualPair dualize(PhaseFunction h, double a, double A, int dim, PhaseGradient grad_p) {
  if (!(a > 0.0) || !(A >= a)) throw std::invalid_argument("dualize needs 0 < a <= A");
  // Strict convexity on a quasi-random sample set.
  for (std::uint64_t s = 1; s <= 256; ++s) {
    const Point x{halton(s, 2), dim == 2 ? halton(s, 3) : 0.0};
    const Point p{8 * halton(s, 5) - 4, dim == 2 ? 8 * halton(s, 7) - 4 : 0.0};
    Point e{2 * halton(s, 11) - 1, dim == 2 ? 2 * halton(s, 13) - 1 : 0.0};
    if (norm(e) == 0.0) e = {1.0, 0.0};
    e = (1e-3 / norm(e)) * e;
    if (!(h(x, p + e) + h(x, p - e) - 2 * h(x, p) > 0.0))
      throw std::invalid_argument("kinetic term is not strictly convex in p");
  }

  DualPair pair;
  pair.mode = DualMode::numeric;
  pair.forward = h;
  pair.forward_grad_p = grad_p;
  pair.backward = [h, grad_p, a, dim](const Point& x, const Point& v) {
    return conjugate(h, grad_p, a, dim, x, v).value;
  };
  // Envelope theorem: dl/dv is the maximizing momentum.
  pair.backward_grad_v = [h, grad_p, a, dim](const Point& x, const Point& v) {
    return conjugate(h, grad_p, a, dim, x, v).momentum;
  };
  return pair;
}

double lagrangian(const CoupledSystem& sys, int i, const Point& x, const Point& v, std::span<const double> u) {
  return sys.kinetic[i].backward(x, v) - sys.coupling_value(i, x, u);
}

double hamiltonian(const CoupledSystem& sys, int i, const Point& x, const Point& p, std::span<const double> u) {
  return sys.kinetic[i].forward(x, p) + sys.coupling_value(i, x, u);
}

Point hamiltonian_grad_p(const CoupledSystem& sys, int i, const Point& x, const Point& p, std::span<const double>) {
  const auto& k = sys.kinetic[i];
  if (k.forward_grad_p) return k.forward_grad_p(x, p);
  return central_gradient(k.forward, x, p, sys.dim);
}

Point lagrangian_grad_v(const CoupledSystem& sys, int i, const Point& x, const Point& v) {
  const auto& k = sys.kinetic[i];
  if (k.backward_grad_v) return k.backward_grad_v(x, v);
  return central_gradient(k.backward, x, v, sys.dim);
}

}  // namespace wchj
