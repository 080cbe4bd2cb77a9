#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "wchj/legendre.hpp"
#include "wchj/sampling.hpp"

using namespace wchj;
using test_support::coupling;
using test_support::quadratic_system;
using test_support::zero_coupling;

namespace {

PhaseFunction half_square() {
  return [](const Point&, const Point& p) { return 0.5 * norm_squared(p); };
}

/// A non-quadratic kinetic term between 0.5|p|^2 and 1.5|p|^2.
PhaseFunction bumpy(int dim) {
  return [dim](const Point& x, const Point& p) {
    const double s = norm_squared(p);
    const double w = 1.0 + 0.2 * std::sin(2.0 * M_PI * x[0]) + (dim == 2 ? 0.1 * std::cos(2.0 * M_PI * x[1]) : 0.0);
    return 0.5 * w * s + 0.25 * s * s / (1.0 + s);
  };
}

}  // namespace

TEST_CASE("half square is self-dual") {
  const DualPair q = quadratic_dual([](const Point&) { return 0.5; }, true);
  const DualPair n = dualize(half_square(), 0.4, 1.2, 1);
  for (double v = -5.0; v <= 5.0; v += 0.37) {
    CHECK(q.backward(Point{}, Point{v, 0}) == 0.5 * v * v);
    CHECK(n.backward(Point{0.3, 0}, Point{v, 0}) == doctest::Approx(0.5 * v * v).epsilon(1e-10));
  }
}

TEST_CASE("dual of |p|^2 is |v|^2 / 4") {
  const DualPair n = dualize([](const Point&, const Point& p) { return norm_squared(p); }, 0.9, 1.1, 2);
  for (std::uint64_t s = 1; s <= 50; ++s) {
    const Point v{6 * halton(s, 2) - 3, 6 * halton(s, 3) - 3};
    CHECK(n.backward(Point{}, v) == doctest::Approx(norm_squared(v) / 4.0).epsilon(1e-9));
  }
}

TEST_CASE("x-dependent coefficient: dual matches a dense search over p") {
  auto c = [](const Point& x) { return 0.5 * (1.0 + 0.1 * std::sin(2.0 * M_PI * x[0])); };
  const DualPair closed = quadratic_dual(c, false);
  const DualPair numeric =
      dualize([c](const Point& x, const Point& p) { return c(x) * norm_squared(p); }, 0.4, 1.2, 1);
  const Point x{0.25, 0};
  const double v = 1.0;
  double best = -INFINITY;
  for (long j = 0; j <= 4000000; ++j) {
    const double p = -20.0 + 1e-5 * j;
    best = std::max(best, p * v - c(x) * p * p);
  }
  CHECK(best == doctest::Approx(1.0 / 2.2).epsilon(1e-9));
  CHECK(closed.backward(x, Point{v, 0}) == doctest::Approx(best).epsilon(1e-9));
  CHECK(numeric.backward(x, Point{v, 0}) == doctest::Approx(best).epsilon(1e-9));
}

TEST_CASE("Fenchel-Young inequality, equality at the gradient, and the double transform") {
  for (int dim = 1; dim <= 2; ++dim) {
    const PhaseFunction h = bumpy(dim);
    const DualPair pair = dualize(h, 0.5, 1.5, dim);
    double worst = INFINITY;
    for (std::uint64_t s = 1; s <= 2000; ++s) {
      const Point x{halton(s, 2), dim == 2 ? halton(s, 3) : 0.0};
      const Point p{8 * halton(s, 5) - 4, dim == 2 ? 8 * halton(s, 7) - 4 : 0.0};
      const Point v{8 * halton(s, 11) - 4, dim == 2 ? 8 * halton(s, 13) - 4 : 0.0};
      worst = std::min(worst, h(x, p) + pair.backward(x, v) - dot(p, v));
      if (s % 20 == 0) {
        const Point vp = central_gradient(h, x, p, dim);
        CHECK(std::abs(h(x, p) + pair.backward(x, vp) - dot(p, vp)) <= 1e-8 * (1.0 + norm_squared(vp)));
        // Legendre involution: dl/dv at dh/dp(p) returns p.
        CHECK(norm(pair.backward_grad_v(x, vp) - p) <= 1e-6 * (1.0 + norm(p)));
      }
      if (s % 100 == 0) {
        // Double transform sup_v <p,v> - l(x,v): the maximizer is v = dh/dp(p).
        const Point vp = central_gradient(h, x, p, dim);
        CHECK(dot(p, vp) - pair.backward(x, vp) == doctest::Approx(h(x, p)).epsilon(1e-6));
      }
    }
    CHECK(worst >= -1e-8);
  }
}

TEST_CASE("closed-form quadratic dual is exact for x-independent coefficients") {
  const DualPair q = quadratic_dual([](const Point&) { return 0.8; }, true);
  for (std::uint64_t s = 1; s <= 1000; ++s) {
    const Point v{10 * halton(s, 2) - 5, 10 * halton(s, 3) - 5};
    CHECK(q.backward(Point{}, v) == norm_squared(v) / (4.0 * 0.8));
  }
}

TEST_CASE("dualize rejects a kinetic term that is not strictly convex") {
  CHECK_THROWS_AS(dualize([](const Point&, const Point& p) { return std::abs(p[0]); }, 0.4, 1.2, 1),
                  std::invalid_argument);
}

TEST_CASE("conjugate reports (x, v) when Newton cannot converge") {
  // Gradient that never matches v: the iteration stalls and must throw.
  const PhaseFunction f = [](const Point&, const Point& p) { return 0.5 * norm_squared(p); };
  const PhaseGradient wrong = [](const Point&, const Point&) { return Point{1e6, 0.0}; };
  try {
    conjugate(f, wrong, 0.5, 1, Point{0.25, 0}, Point{1.0, 0});
    FAIL("expected DualSolveError");
  } catch (const DualSolveError& e) {
    CHECK(std::string(e.what()).find("dual solve failed") != std::string::npos);
    CHECK(e.v[0] == 1.0);
    CHECK(e.x[0] == 0.25);
  }
}

TEST_CASE("lagrangian examples") {
  auto sys1 = quadratic_system(1, 0.5, {zero_coupling()}, 0.4, 1.2);
  const double u0[] = {0.0};
  CHECK(lagrangian(sys1, 0, Point{0.1, 0}, Point{2.0, 0}, u0) == 2.0);

  auto sys2 = quadratic_system(
      1, 0.5,
      {coupling([](const Point&, std::span<const double> u) { return u[1]; }),
       coupling([](const Point&, std::span<const double> u) { return u[0]; })},
      0.4, 1.2);
  const double u[] = {0.0, 3.0};
  CHECK(lagrangian(sys2, 0, Point{0.3, 0}, Point{0.0, 0}, u) == -3.0);
}

TEST_CASE("lagrangian and hamiltonian equal the sum of their parts") {
  auto P = coupling([](const Point& x, std::span<const double> u) { return std::sin(2 * M_PI * x[0]) * std::tanh(u[0]); });
  auto sys = quadratic_system(1, 0.7, {P}, 0.4, 1.2);
  sys.kinetic[0] = dualize(bumpy(1), 0.5, 1.5, 1);
  for (std::uint64_t s = 1; s <= 200; ++s) {
    const Point x{halton(s, 2), 0};
    const Point v{6 * halton(s, 3) - 3, 0};
    const double u[] = {4 * halton(s, 5) - 2};
    const double l = sys.kinetic[0].backward(x, v);
    const double pot = std::sin(2 * M_PI * x[0]) * std::tanh(u[0]);
    CHECK(std::abs(lagrangian(sys, 0, x, v, u) - (l - pot)) <= 1e-15);
    CHECK(std::abs(hamiltonian(sys, 0, x, v, u) - (bumpy(1)(x, v) + pot)) <= 1e-15);
  }
}

TEST_CASE("hamiltonian_grad_p examples") {
  auto sys1 = quadratic_system(1, 0.5, {zero_coupling()}, 0.4, 1.2);
  const double u[] = {0.0};
  CHECK(hamiltonian_grad_p(sys1, 0, Point{}, Point{3.0, 0}, u)[0] == 3.0);
  auto sys2 = quadratic_system(2, 0.5, {zero_coupling()}, 0.4, 1.2);
  const Point g = hamiltonian_grad_p(sys2, 0, Point{}, Point{1.0, -2.0}, u);
  CHECK(g[0] == 1.0);
  CHECK(g[1] == -2.0);

  // x-dependent kinetic without an analytic gradient vs. an independent finite difference.
  auto sys3 = sys1;
  sys3.kinetic[0] = dualize(bumpy(1), 0.5, 1.5, 1);
  for (std::uint64_t s = 1; s <= 100; ++s) {
    const Point x{halton(s, 2), 0};
    const double p = 6 * halton(s, 3) - 3;
    const double h = 1e-5;
    const double fd = (bumpy(1)(x, Point{p + h, 0}) - bumpy(1)(x, Point{p - h, 0})) / (2 * h);
    CHECK(hamiltonian_grad_p(sys3, 0, x, Point{p, 0}, u)[0] == doctest::Approx(fd).epsilon(1e-6));
  }
}
