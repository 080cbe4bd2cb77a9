#include "wchj/fixed_point.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace wchj {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

VectorField constant_in_time(const TorusGrid& grid, const InitialData& phi) {
  VectorField u(grid, phi.components);
  for (int i = 0; i < phi.components; ++i) {
    const auto src = phi.component(i);
    for (int k = 0; k <= grid.n_t(); ++k) std::copy(src.begin(), src.end(), u.slice(i, k).begin());
  }
  return u;
}

}  // namespace

double factorial_envelope(double t_final, double theta, int j) {
  double v = 1.0;
  for (int l = 1; l <= j; ++l) v *= t_final * theta / l;
  return v;
}

Solution solve(const LaxOleinikOperator& op, double tol, int max_iter) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
  const auto start = Clock::now();
  const double T = op.grid().t_final();
  const double theta = op.system().theta;

  SolveReport report;
  VectorField u = constant_in_time(op.grid(), op.initial_data());
  for (int j = 0; j < max_iter; ++j) {
    const auto step_start = Clock::now();
    VectorField next = op.apply(u);
    const double r = sup_distance(next, u);
    report.wall_times.push_back(seconds_since(step_start));
    report.residuals.push_back(r);
    report.predicted_bounds.push_back(factorial_envelope(T, theta, j) * report.residuals.front());
    report.iterations = j + 1;
    if (r <= tol) {
      report.converged = true;
      report.wall_time = seconds_since(start);
      report.error_bound = std::exp(T * theta) * r;
      return {std::move(u), std::move(next), std::move(report)};
    }
    u = std::move(next);
  }
  report.wall_time = seconds_since(start);
  report.error_bound = std::exp(T * theta) * report.residuals.back();
  std::ostringstream msg;
  msg << "fixed-point iteration did not reach tol " << tol << " within " << max_iter
      << " iterations (last residual " << report.residuals.back() << ")";
  throw SolveError(msg.str(), std::move(report));
}

Solution solve(const CoupledSystem& sys, const TorusGrid& grid, const InitialData& phi, const OperatorConfig& cfg,
               double tol, int max_iter) {
  return solve(LaxOleinikOperator(sys, grid, phi, cfg), tol, max_iter);
}

InitialData semigroup_step(const CoupledSystem& sys, const TorusGrid& grid, const InitialData& state, double t,
                           const OperatorConfig& cfg, double tol, int max_iter) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("non-grid time");
  const double steps = t / grid.dt();
  const long n = std::lround(steps);
  if (std::abs(steps - static_cast<double>(n)) > 1e-9 * std::max(1.0, steps))
    throw std::invalid_argument("non-grid time");
  state.validate(grid);
  if (n == 0) return state;
  const TorusGrid sub = TorusGrid::with_step(grid.dim(), grid.points_per_axis(), grid.dt(), static_cast<int>(n));
  const Solution sol = solve(sys, sub, state, cfg, tol, max_iter);
  return slice_as_initial_data(sol.field, sub.n_t());
}

std::vector<ContractionRow> contraction_probe(const LaxOleinikOperator& op, const VectorField& u,
                                              const VectorField& v) {
  const VectorField au = op.apply(u);
  const VectorField av = op.apply(v);
  const TorusGrid& g = op.grid();
  std::vector<ContractionRow> rows;
  double input_gap = 0.0;
  for (int k = 0; k <= g.n_t(); ++k) {
    input_gap = std::max(input_gap, sup_distance(u, v, {k, k}));
    ContractionRow row;
    row.k = k;
    row.t = g.time(k);
    row.measured = sup_distance(au, av, {k, k});
    row.bound = k * g.dt() * op.system().theta * input_gap;
    row.violated = row.measured > row.bound + 1e-9;
    rows.push_back(row);
  }
  return rows;
}

VectorField random_smooth_field(const TorusGrid& grid, int m, std::uint64_t seed, double amplitude) {
  constexpr int kModes = 4;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 1.0);
  VectorField f(grid, m);
  const double two_pi = 2.0 * std::numbers::pi;
  for (int i = 0; i < m; ++i) {
    double c[kModes], px[kModes], py[kModes], pt[kModes];
    double total = 0.0;
    for (int q = 0; q < kModes; ++q) {
      c[q] = coef(rng) / (q + 1);
      px[q] = phase(rng);
      py[q] = phase(rng);
      pt[q] = phase(rng);
      total += std::abs(c[q]);
    }
    const double scale = total > 0.0 ? amplitude / total : 0.0;
    for (int k = 0; k <= grid.n_t(); ++k)
      for (std::size_t p = 0; p < grid.num_points(); ++p) {
        const Point x = grid.position(p);
        double v = 0.0;
        for (int q = 0; q < kModes; ++q) {
          const double wy = grid.dim() == 2 ? std::cos(two_pi * ((q % 2 + 1) * x[1] + py[q])) : 1.0;
          v += c[q] * std::sin(two_pi * ((q + 1) * x[0] + px[q])) * wy * std::cos(two_pi * (grid.time(k) + pt[q]));
        }
        f.at(i, k, p) = scale * v;
      }
  }
  return f;
}

void write_report_csv(std::ostream& out, const SolveReport& report, bool with_timing) {
  out << "iter,residual,predicted_bound,wall_time_s\n";
  for (std::size_t j = 0; j < report.residuals.size(); ++j) {
    out << j + 1 << ',' << format_real(report.residuals[j]) << ',' << format_real(report.predicted_bounds[j]) << ','
        << format_real(with_timing ? report.wall_times[j] : 0.0) << '\n';
  }
}

}  // namespace wchj
