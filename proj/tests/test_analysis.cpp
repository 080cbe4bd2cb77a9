#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "support.hpp"
#include "wchj/analysis.hpp"
#include "wchj/fixed_point.hpp"

using namespace wchj;
using test_support::cyclic_system;
using test_support::quadratic_system;
using test_support::zero_coupling;

namespace {

OperatorConfig config(double v_max, int S) {
  OperatorConfig c;
  c.v_max = v_max;
  c.max_segment_slices = S;
  return c;
}

VectorField constant_field(const TorusGrid& g, int m, double c) {
  VectorField f(g, m);
  for (auto& v : f.values()) v = c;
  return f;
}

}  // namespace

TEST_CASE("ledger arithmetic examples") {
  CHECK(t_theta(1.0) == 1.0 / 16.0);
  CHECK(t_theta(0.1) == 1.0);
  CHECK(kappa_infinity(1.0, 1.0, 0.0) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(holder_exponent(1) == 0.5);
  for (int n = 1; n < 40; ++n) CHECK(holder_exponent(n) < holder_exponent(n + 1));
}

TEST_CASE("kappa recursion converges geometrically to its fixed point") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double C = 1.0 + u(rng), F1 = u(rng), s1 = u(rng), B1 = u(rng);
    const double inf = kappa_infinity(C, F1, s1);
    std::vector<double> k{kappa_one(C, B1, F1)};
    for (int n = 1; n < 20; ++n) k.push_back(kappa_next(k.back(), C, F1, s1));
    CHECK(std::abs(k[19] - inf) <= std::ldexp(1.0, -19) * std::abs(k[0] - inf) + 1e-14 * inf);
    CHECK(kappa_next(inf, C, F1, s1) == doctest::Approx(inf).epsilon(1e-15));
  }
}

TEST_CASE("ledger from a cross-coupled solve is monotone in the horizon") {
  const auto sys = cyclic_system(2);
  const TorusGrid g(1, 32, 0.5, 32);
  const auto phi = InitialData::sample(g, 2, [](int i, const Point& x) {
    return i == 0 ? 0.5 * test_support::cos2pi(x[0]) : 0.5 * test_support::sin2pi(x[0]);
  });
  const Solution sol = solve(sys, g, phi, config(8.0, 2), 1e-10, 100);
  const ConstantLedger L = build_ledger(sys, sol.field);
  CHECK(L.C == sys.A / sys.a);
  for (std::size_t k = 1; k < L.Q.size(); ++k) {
    CHECK(L.Q[k] >= L.Q[k - 1]);
    CHECK(L.B[k] >= L.B[k - 1]);
    CHECK(L.F[k] >= L.F[k - 1]);
    CHECK(L.sigma[k] >= L.sigma[k - 1]);
  }
  // |P_i| = |u_j| <= Q: the sampled supremum reaches Q at the cube corners.
  CHECK(L.B_sampled.back() == doctest::Approx(L.Q.back()));
  CHECK(L.sigma.back() == 0.0);
  for (int n = 1; n < 30; ++n)
    CHECK(std::abs((L.kappa_n(n + 1) - L.kappa_inf) - 0.5 * (L.kappa_n(n) - L.kappa_inf)) <= 1e-12 * L.kappa_inf);
}

TEST_CASE("holder audit: constant field gives zero ratios; no eligible slices is an error") {
  const auto sys = quadratic_system(1, 0.5, {zero_coupling()});
  const TorusGrid g(1, 32, 0.25, 16);
  const VectorField c = constant_field(g, 1, 2.0);
  const ConstantLedger L = build_ledger(sys, c);
  const AuditReport rep = holder_audit(c, L, 1);
  CHECK(rep.passed);
  for (const auto& row : rep.rows) CHECK(row.ratio == 0.0);

  const TorusGrid coarse(1, 32, 1.0, 4);  // first slice at 0.25 > 1/16
  const VectorField cc = constant_field(coarse, 1, 2.0);
  CHECK_THROWS_WITH_AS(holder_audit(cc, build_ledger(sys, cc), 1), "t_Θ below first slice; refine dt or reduce Θ",
                       std::invalid_argument);
}

TEST_CASE("lipschitz audit: stationary constant solution has zero increments") {
  const auto sys = quadratic_system(1, 0.5, {zero_coupling()});
  const TorusGrid g(1, 32, 0.25, 16);
  const auto phi = InitialData::sample(g, 1, [](int, const Point&) { return -0.7; });
  const Solution sol = solve(sys, g, phi, config(8.0, 2), 1e-12, 10);
  const ConstantLedger L = build_ledger(sys, sol.field);
  const AuditReport rep = lipschitz_audit(sol.field, L);
  CHECK(rep.passed);
  for (const auto& row : rep.rows) CHECK(row.measured == 0.0);
}

TEST_CASE("lipschitz audit: nearest-neighbour slopes are covered by the pair scan") {
  const auto sys = quadratic_system(1, 0.5, {zero_coupling()});
  const TorusGrid g(1, 64, 0.25, 32);
  const auto phi = InitialData::sample(g, 1, [](int, const Point& x) { return test_support::cos2pi(x[0]); });
  const Solution sol = solve(sys, g, phi, config(8.0, 6), 1e-12, 10);
  const ConstantLedger L = build_ledger(sys, sol.field);
  const AuditReport rep = lipschitz_audit(sol.field, L);
  CHECK(rep.passed);
  for (const auto& row : rep.rows) {
    if (row.audit != "lipschitz_x") continue;
    double slope = 0.0;
    for (std::size_t p = 0; p < 64; ++p)
      slope = std::max(slope, std::abs(sol.field.at(0, row.k, g.flat(static_cast<int>(p) + 1)) - sol.field.at(0, row.k, p)) / g.dx());
    CHECK(slope <= row.measured + 1e-12);
    CHECK(row.measured <= 2 * M_PI + 0.1);
  }
}

TEST_CASE("pde residual vanishes on constant solutions") {
  const auto sys = quadratic_system(1, 0.5, {zero_coupling()});
  const TorusGrid g(1, 16, 0.25, 8);
  for (double c : {0.0, 1.5}) {
    const auto r = pde_residual(sys, constant_field(g, 1, c));
    for (double v : r) CHECK(v == 0.0);
  }
  const TorusGrid tiny(1, 16, 0.25, 2);
  CHECK_THROWS_AS(pde_residual(sys, constant_field(tiny, 1, 0.0)), std::invalid_argument);

  // u = 0 with P(x, 0) = 0 for a genuinely coupled system.
  const auto cyc = cyclic_system(2);
  for (double v : pde_residual(cyc, constant_field(g, 2, 0.0))) CHECK(v == 0.0);
}

TEST_CASE("residual summary quantiles") {
  const ResidualSummary s = summarize_residual({5, 1, 4, 2, 3, 10, 9, 8, 7, 6});
  CHECK(s.median == 5.5);
  CHECK(s.p90 == 9.0);
  CHECK(s.max == 10.0);
}

TEST_CASE("duality at the end point: zero data, zero coupling") {
  const auto sys = quadratic_system(1, 0.5, {zero_coupling()});
  const TorusGrid g(1, 32, 0.25, 16);
  const auto phi = InitialData::sample(g, 1, [](int, const Point&) { return 0.0; });
  const LaxOleinikOperator op(sys, g, phi, config(8.0, 2));
  const Solution sol = solve(op, 1e-12, 10);
  const ConstantLedger L = build_ledger(sys, sol.field);
  const MinimizingCurve c = op.backtrack(sol.image, sol.field, 0, 7, g.n_t());
  const DualityCheck d = curve_regularity(sys, c, sol.field, L);
  CHECK(d.differentiable);
  CHECK(d.velocity[0] == 0.0);
  CHECK(d.momentum[0] == 0.0);
  CHECK(d.fenchel_defect == 0.0);
}

TEST_CASE("duality at smooth points of a Hopf-Lax solution") {
  const auto sys = quadratic_system(1, 0.5, {zero_coupling()});
  const TorusGrid g(1, 256, 0.25, 128);
  const auto phi = InitialData::sample(g, 1, [](int, const Point& x) { return test_support::cos2pi(x[0]); });
  const LaxOleinikOperator op(sys, g, phi, config(8.0, OperatorConfig::default_segment_slices(g, 8.0)));
  const Solution sol = solve(op, 1e-12, 10);
  const ConstantLedger L = build_ledger(sys, sol.field);
  std::vector<MinimizingCurve> curves;
  const AuditReport eq = calibration_equality_audit(op, sol.image, sol.field, g.n_t(), &curves);
  CHECK(eq.passed);
  const AuditReport dual = curve_regularity_audit(sys, curves, sol.field, L);
  CHECK(dual.passed);
  CHECK(dual.rows.size() >= 0.9 * curves.size());
  // Kink at x = 0 by symmetry of phi about its maximum.
  CHECK_FALSE(curve_regularity(sys, curves[0], sol.field, L).differentiable);
}

TEST_CASE("calibration audits on a coupled solve") {
  const auto sys = cyclic_system(2);
  const TorusGrid g(1, 32, 0.5, 32);
  const auto phi = InitialData::sample(g, 2, [](int i, const Point& x) {
    return i == 0 ? 0.5 * test_support::cos2pi(x[0]) : 0.5 * test_support::sin2pi(x[0]);
  });
  const LaxOleinikOperator op(sys, g, phi, config(8.0, 2));
  const Solution sol = solve(op, 1e-10, 100);
  const AuditReport eq = calibration_equality_audit(op, sol.image, sol.field, g.n_t());
  CHECK(eq.passed);
  CHECK(eq.hard);
  const AuditReport ineq = calibration_inequality_audit(op, sol.image, sol.field, 300, 9);
  CHECK(ineq.passed);

  // Tilting the value field upward in time costs every chain at least 10 dt,
  // more than the slack of any short near-optimal chain.
  VectorField bad = sol.image;
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k <= g.n_t(); ++k)
      for (std::size_t p = 0; p < 32; ++p) bad.at(i, k, p) += 10.0 * g.time(k);
  const AuditReport broken = calibration_inequality_audit(op, bad, sol.field, 300, 9);
  CHECK_FALSE(broken.passed);
}

TEST_CASE("semiconcavity constant of a concave-kinked solution stays finite") {
  const auto sys = quadratic_system(1, 0.5, {zero_coupling()});
  double previous = 0.0;
  for (int n : {64, 128}) {
    const TorusGrid g(1, n, 0.25, n / 2);
    const auto phi = InitialData::sample(g, 1, [](int, const Point& x) { return test_support::cos2pi(x[0]); });
    const Solution sol = solve(sys, g, phi, config(8.0, OperatorConfig::default_segment_slices(g, 8.0)), 1e-12, 10);
    const double K = semiconcavity_constant(sol.field, t_theta(1.0));
    CHECK(std::isfinite(K));
    if (previous > 0.0) CHECK(K <= 2.0 * previous);
    previous = K;
  }
}

TEST_CASE("audit CSV layout") {
  AuditReport r;
  r.name = "x";
  r.add({"x", 3, 0.5, 1.0, 2.0, 0.0, true});
  std::ostringstream out;
  write_audit_csv(out, {r});
  CHECK(out.str() == "audit,k,t,measured,bound,ratio,pass\nx,3,0.5,1,2,0.5,1\n");
}
