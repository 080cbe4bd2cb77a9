#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "support.hpp"
#include "wchj/model.hpp"

using namespace wchj;
using test_support::coupling;
using test_support::quadratic_system;
using test_support::zero_coupling;

TEST_CASE("grid spacing and periodic indices") {
  const TorusGrid g(1, 64, 0.5, 32);
  CHECK(g.dx() == 1.0 / 64);
  CHECK(std::abs(g.dt() * g.n_t() - g.t_final()) <= 1e-15);
  CHECK(g.period() == 1.0);
  for (int i = -130; i < 130; ++i) CHECK(g.flat(i) == g.flat(i + 64));

  const TorusGrid g2(2, 16, 1.0, 4);
  CHECK(g2.num_points() == 256);
  CHECK(g2.flat(3, 5) == g2.flat(3 + 16, 5 - 32));
  const auto idx = g2.index(g2.flat(7, 9));
  CHECK(idx[0] == 7);
  CHECK(idx[1] == 9);

  CHECK_THROWS_AS(TorusGrid(3, 16, 1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(TorusGrid(1, 4, 1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(TorusGrid(1, 16, 0.0, 4), std::invalid_argument);
}

TEST_CASE("minimal image displacement") {
  const TorusGrid g(1, 16, 1.0, 4);
  CHECK(g.distance(Point{0.95, 0}, Point{0.05, 0}) == doctest::Approx(0.1));
  CHECK(g.displacement(Point{0.95, 0}, Point{0.05, 0})[0] == doctest::Approx(0.1));
  CHECK(g.wrap_point(Point{-0.25, 0})[0] == doctest::Approx(0.75));
  CHECK_THROWS_AS(g.wrap_point(Point{NAN, 0}), std::invalid_argument);
}

TEST_CASE("sup_norm examples") {
  const TorusGrid g(1, 16, 1.0, 4);
  VectorField f(g, 2);
  CHECK(sup_norm(f) == 0.0);
  f.at(1, 3, 7) = -3.5;
  CHECK(sup_norm(f) == 3.5);
  CHECK(sup_norm(f, {0, 2}) == 0.0);
  CHECK_THROWS_WITH_AS(sup_norm(f, {3, 2}), "empty norm domain", std::invalid_argument);
}

TEST_CASE("sup_norm agrees with a brute-force loop and is monotone in the slice range") {
  const TorusGrid g(2, 8, 1.0, 5);
  const VectorField f = test_support::random_field(g, 3, 42, 10.0);
  double brute = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k <= 5; ++k)
      for (std::size_t p = 0; p < g.num_points(); ++p) brute = std::max(brute, std::abs(f.at(i, k, p)));
  CHECK(sup_norm(f) == brute);
  for (int a = 0; a <= 5; ++a)
    for (int b = a; b <= 5; ++b) CHECK(sup_norm(f, {a, b}) <= sup_norm(f, {0, 5}));
}

TEST_CASE("interpolation is exact at nodes and linear between them") {
  const TorusGrid g(1, 16, 1.0, 2);
  VectorField f(g, 1);
  for (std::size_t p = 0; p < 16; ++p) f.at(0, 1, p) = 2.0 * p + 1.0;
  for (std::size_t p = 0; p < 16; ++p) CHECK(interpolate(f, 0, g.position(p), 1) == f.at(0, 1, p));
  CHECK(interpolate(f, 0, Point{(3 + 0.5) / 16.0, 0}, 1) == doctest::Approx(0.5 * (f.at(0, 1, 3) + f.at(0, 1, 4))));
  CHECK_THROWS_AS(interpolate(f, 0, Point{INFINITY, 0}, 1), std::invalid_argument);
}

TEST_CASE("interpolation matches an independent bilinear formula and is periodic") {
  const TorusGrid g(2, 8, 1.0, 1);
  const VectorField f = test_support::random_field(g, 1, 7);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int s = 0; s < 200; ++s) {
    const double x = u(rng), y = u(rng);
    const double gx = x * 8, gy = y * 8;
    const int i0 = static_cast<int>(gx), j0 = static_cast<int>(gy);
    const double tx = gx - i0, ty = gy - j0;
    auto node = [&](int i, int j) { return f.at(0, 1, static_cast<std::size_t>(((i % 8) * 8) + (j % 8))); };
    const double expect = node(i0, j0) * (1 - tx) * (1 - ty) + node(i0 + 1, j0) * tx * (1 - ty) +
                          node(i0, j0 + 1) * (1 - tx) * ty + node(i0 + 1, j0 + 1) * tx * ty;
    CHECK(std::abs(interpolate(f, 0, Point{x, y}, 1) - expect) <= 1e-12);
    CHECK(std::abs(interpolate(f, 0, Point{x + 1.0, y}, 1) - expect) <= 1e-12);
    CHECK(std::abs(interpolate(f, 0, Point{x, y - 1.0}, 1) - expect) <= 1e-12);
  }
}

TEST_CASE("validate_system: quadratic kinetic bracketed by the declared constants passes") {
  const auto sys = quadratic_system(1, 0.5, {zero_coupling()}, 0.4, 1.2);
  const auto rep = validate_system(sys, 2000);
  CHECK(rep.passed());
  for (const auto& c : rep.checks) CHECK(c.worst_margin >= 0.0);
}

TEST_CASE("validate_system: a above the kinetic coefficient fails the lower bound") {
  const auto sys = quadratic_system(1, 0.5, {zero_coupling()}, 0.6, 1.2);
  const auto rep = validate_system(sys, 500);
  CHECK_FALSE(rep.passed());
  bool lower_failed = false;
  for (const auto& c : rep.checks)
    if (c.name.rfind("a|p|^2", 0) == 0) lower_failed = !c.passed;
  CHECK(lower_failed);
}

TEST_CASE("validate_system: sin(2 pi x) tanh(u_1) is 1-Lipschitz in u") {
  auto P = coupling([](const Point& x, std::span<const double> u) { return test_support::sin2pi(x[0]) * std::tanh(u[0]); });
  auto sys = quadratic_system(1, 0.5, {P}, 0.4, 1.2, 1.0);
  CHECK(validate_system(sys, 4000).passed());
  // Dense oracle on (u, v) pairs: the largest difference quotient stays below 1.
  double worst = 0.0;
  for (int a = 0; a < 400; ++a)
    for (int b = 0; b < 400; ++b) {
      const double u = -3 + 6.0 * a / 399, v = -3 + 6.0 * b / 399;
      if (u == v) continue;
      const double q = std::abs(std::tanh(u) - std::tanh(v)) / std::abs(u - v);
      worst = std::max(worst, q);
    }
  CHECK(worst <= 1.0);
  sys.theta = 0.5;
  CHECK_FALSE(validate_system(sys, 4000).passed());
}

TEST_CASE("check_shape enforces 0<a<1<A") {
  auto sys = quadratic_system(1, 0.5, {zero_coupling()}, 0.4, 1.2);
  sys.a = 1.5;
  CHECK_THROWS_WITH_AS(sys.check_shape(), doctest::Contains("0<a<1<A"), std::invalid_argument);
}

TEST_CASE("field CSV layout") {
  const TorusGrid g(1, 8, 1.0, 2);
  VectorField f(g, 1);
  f.at(0, 2, 3) = 0.1;
  std::ostringstream out;
  write_field_csv(out, f);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "component,k,ix,t,x,value");
  int rows = 0;
  std::string found;
  while (std::getline(in, line)) {
    ++rows;
    if (line.rfind("1,2,3,", 0) == 0) found = line;
  }
  CHECK(rows == 24);
  CHECK(found == "1,2,3,1,0.375,0.10000000000000001");
}

TEST_CASE("initial data CSV: round trip and row-level errors") {
  const auto dir = std::filesystem::temp_directory_path() / "wchj_model_csv";
  std::filesystem::create_directories(dir);
  const TorusGrid g(1, 8, 1.0, 1);
  {
    std::ofstream f(dir / "ok.csv");
    f << "component,ix,value\n";
    for (int p = 0; p < 8; ++p) f << "1," << p << ',' << format_real(0.25 * p) << '\n';
  }
  const auto d = read_initial_csv((dir / "ok.csv").string(), g, 1);
  for (std::size_t p = 0; p < 8; ++p) CHECK(d.at(0, p) == 0.25 * p);

  {
    std::ofstream f(dir / "nan.csv");
    f << "component,ix,value\n";
    for (int p = 0; p < 8; ++p) f << "1," << p << ',' << (p == 5 ? "nan" : "0") << '\n';
  }
  CHECK_THROWS_WITH(read_initial_csv((dir / "nan.csv").string(), g, 1), doctest::Contains("row 7"));

  {
    std::ofstream f(dir / "seam.csv");
    f << "component,ix,value\n";
    for (int p = 0; p <= 8; ++p) f << "1," << p << ",0\n";
  }
  CHECK_THROWS_WITH(read_initial_csv((dir / "seam.csv").string(), g, 1), doctest::Contains("seam"));

  {
    std::ofstream f(dir / "short.csv");
    f << "component,ix,value\n1,0,0\n";
  }
  CHECK_THROWS_WITH(read_initial_csv((dir / "short.csv").string(), g, 1), doctest::Contains("cover"));
}

TEST_CASE("initial data validation names the offending entry") {
  const TorusGrid g(1, 8, 1.0, 1);
  auto d = InitialData::sample(g, 2, [](int, const Point&) { return 0.0; });
  d.values[8 + 3] = NAN;
  CHECK_THROWS_WITH(d.validate(g), doctest::Contains("component 2, point 3"));
}
