#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "wchj/legendre.hpp"
#include "wchj/model.hpp"

namespace test_support {

using wchj::Point;

inline wchj::Coupling zero_coupling() {
  wchj::Coupling c;
  c.value = [](const Point&, std::span<const double>) { return 0.0; };
  c.identically_zero = true;
  return c;
}

inline wchj::Coupling coupling(std::function<double(const Point&, std::span<const double>)> f) {
  wchj::Coupling c;
  c.value = std::move(f);
  return c;
}

/// h_i = c |p|^2 for every component, with the given couplings.
inline wchj::CoupledSystem quadratic_system(int dim, double c, std::vector<wchj::Coupling> couplings,
                                            double a = 0.5, double A = 1.05, double theta = 1.0) {
  wchj::CoupledSystem sys;
  sys.m = static_cast<int>(couplings.size());
  sys.dim = dim;
  sys.a = a;
  sys.A = A;
  sys.theta = theta;
  for (int i = 0; i < sys.m; ++i) sys.kinetic.push_back(wchj::quadratic_dual([c](const Point&) { return c; }, true));
  sys.coupling = std::move(couplings);
  return sys;
}

/// P_i = u_{i+1 mod m}.
inline wchj::CoupledSystem cyclic_system(int m, int dim = 1) {
  std::vector<wchj::Coupling> cs;
  for (int i = 0; i < m; ++i) {
    const int j = (i + 1) % m;
    cs.push_back(coupling([j](const Point&, std::span<const double> u) { return u[j]; }));
  }
  return quadratic_system(dim, 0.5, std::move(cs));
}

inline double cos2pi(double x) { return std::cos(2.0 * std::numbers::pi * x); }
inline double sin2pi(double x) { return std::sin(2.0 * std::numbers::pi * x); }

/// Brute-force Hopf-Lax value min_y phi(y) + |x - y|^2 / (2t) in 1D.
inline double hopf_lax_1d(const std::function<double(double)>& phi, double x, double t, int candidates,
                          double radius = 1.0) {
  double best = INFINITY;
  for (int c = 0; c < candidates; ++c) {
    const double d = -radius + 2.0 * radius * (c + 0.5) / candidates;
    best = std::min(best, phi(x - d) + d * d / (2.0 * t));
  }
  return best;
}

inline wchj::VectorField random_field(const wchj::TorusGrid& g, int m, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  wchj::VectorField f(g, m);
  for (auto& v : f.values()) v = dist(rng);
  return f;
}

}  // namespace test_support
