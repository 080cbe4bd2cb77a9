#include "wchj/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "wchj/sampling.hpp"

namespace wchj {

namespace {

void check_grid_args(int dim, int n_x, double t_final, int n_t) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("torus dimension must be 1 or 2");
  if (n_x < 8) throw std::invalid_argument("points_per_axis must be at least 8");
  if (!(t_final > 0.0) || !std::isfinite(t_final)) throw std::invalid_argument("t_final must be positive");
  if (n_t < 1) throw std::invalid_argument("n_t must be at least 1");
}

double wrap_unit(double v) {
  double r = v - std::floor(v);
  if (r >= 1.0) r = 0.0;  // floor rounding for tiny negative v
  return r;
}

double minimal_image(double d) { return d - std::nearbyint(d); }

}  // namespace

// ---------------------------------------------------------------------------
// TorusGrid

TorusGrid::TorusGrid(int dim, int points_per_axis, double t_final, int n_t) {
  check_grid_args(dim, points_per_axis, t_final, n_t);
  dim_ = dim;
  n_x_ = points_per_axis;
  dx_ = 1.0 / points_per_axis;
  t_final_ = t_final;
  n_t_ = n_t;
  dt_ = t_final / n_t;
  num_points_ = dim == 1 ? static_cast<std::size_t>(n_x_)
                         : static_cast<std::size_t>(n_x_) * static_cast<std::size_t>(n_x_);
}

TorusGrid TorusGrid::with_step(int dim, int points_per_axis, double dt, int n_t) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  TorusGrid g(dim, points_per_axis, dt * n_t, n_t);
  g.dt_ = dt;
  return g;
}

Point TorusGrid::wrap_point(const Point& x) const {
  if (!is_finite(x)) throw std::invalid_argument("non-finite point");
  return {wrap_unit(x[0]), dim_ == 1 ? 0.0 : wrap_unit(x[1])};
}

Point TorusGrid::displacement(const Point& from, const Point& to) const {
  return {minimal_image(to[0] - from[0]), dim_ == 1 ? 0.0 : minimal_image(to[1] - from[1])};
}

// ---------------------------------------------------------------------------
// VectorField

VectorField::VectorField(const TorusGrid& grid, int components) : grid_(grid), m_(components) {
  if (components < 1) throw std::invalid_argument("field needs at least one component");
  values_.assign(static_cast<std::size_t>(m_) * slices() * grid_.num_points(), 0.0);
}

std::vector<double> VectorField::state(int k, std::size_t p) const {
  std::vector<double> u(static_cast<std::size_t>(m_));
  for (int i = 0; i < m_; ++i) u[i] = at(i, k, p);
  return u;
}

bool VectorField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// InitialData

InitialData InitialData::sample(const TorusGrid& grid, int m, std::function<double(int, const Point&)> f) {
  InitialData d;
  d.components = m;
  d.points = grid.num_points();
  d.values.resize(static_cast<std::size_t>(m) * d.points);
  for (int i = 0; i < m; ++i)
    for (std::size_t p = 0; p < d.points; ++p) d.values[i * d.points + p] = f(i, grid.position(p));
  d.analytic = std::move(f);
  return d;
}

void InitialData::validate(const TorusGrid& grid) const {
  if (points != grid.num_points() || values.size() != static_cast<std::size_t>(components) * points)
    throw std::invalid_argument("initial data shape does not match the grid");
  for (std::size_t n = 0; n < values.size(); ++n) {
    if (!std::isfinite(values[n])) {
      std::ostringstream msg;
      msg << "initial data entry (component " << n / points + 1 << ", point " << n % points
          << ") is not finite";
      throw std::invalid_argument(msg.str());
    }
  }
}

double InitialData::sup_norm() const {
  double s = 0.0;
  for (double v : values) s = std::max(s, std::abs(v));
  return s;
}

InitialData slice_as_initial_data(const VectorField& f, int k) {
  InitialData d;
  d.components = f.components();
  d.points = f.grid().num_points();
  d.values.reserve(static_cast<std::size_t>(d.components) * d.points);
  for (int i = 0; i < d.components; ++i) {
    auto s = f.slice(i, k);
    d.values.insert(d.values.end(), s.begin(), s.end());
  }
  return d;
}

// ---------------------------------------------------------------------------
// CoupledSystem

bool CoupledSystem::decoupled() const {
  return std::all_of(coupling.begin(), coupling.end(), [](const Coupling& c) { return c.identically_zero; });
}

double CoupledSystem::coupling_value(int i, const Point& x, std::span<const double> u) const {
  const auto& c = coupling[i];
  if (c.identically_zero) return 0.0;
  return c.value(x, u);
}

Point CoupledSystem::coupling_grad_x(int i, const Point& x, std::span<const double> u) const {
  const auto& c = coupling[i];
  if (c.identically_zero) return {0.0, 0.0};
  if (c.grad_x) return c.grad_x(x, u);
  constexpr double h = 1e-6;
  Point g{0.0, 0.0};
  for (int d = 0; d < dim; ++d) {
    Point xp = x, xm = x;
    xp[d] += h;
    xm[d] -= h;
    g[d] = (c.value(xp, u) - c.value(xm, u)) / (2 * h);
  }
  return g;
}

void CoupledSystem::check_shape() const {
  if (m < 1) throw std::invalid_argument("system needs at least one equation");
  if (dim != 1 && dim != 2) throw std::invalid_argument("torus dimension must be 1 or 2");
  if (kinetic.size() != static_cast<std::size_t>(m) || coupling.size() != static_cast<std::size_t>(m))
    throw std::invalid_argument("system needs one kinetic term and one coupling per equation");
  if (!(a > 0.0 && a < 1.0 && A > 1.0)) throw std::invalid_argument("assumption (A) requires 0<a<1<A");
  if (!(theta > 0.0)) throw std::invalid_argument("Lipschitz constant theta must be positive");
  for (const auto& k : kinetic)
    if (!k.forward || !k.backward) throw std::invalid_argument("kinetic term lacks forward or dual function");
  for (const auto& c : coupling)
    if (!c.identically_zero && !c.value) throw std::invalid_argument("coupling function missing");
}

// ---------------------------------------------------------------------------
// Norms and interpolation

double sup_norm(const VectorField& f, SliceRange range) {
  if (range.first > range.last || range.first < 0 || range.last >= f.slices())
    throw std::invalid_argument("empty norm domain");
  double s = 0.0;
  for (int i = 0; i < f.components(); ++i)
    for (int k = range.first; k <= range.last; ++k)
      for (double v : f.slice(i, k)) s = std::max(s, std::abs(v));
  return s;
}

double sup_norm(const VectorField& f) { return sup_norm(f, {0, f.slices() - 1}); }

double sup_distance(const VectorField& f, const VectorField& g, SliceRange range) {
  if (!(f.grid() == g.grid()) || f.components() != g.components())
    throw std::invalid_argument("fields live on different grids");
  if (range.first > range.last || range.first < 0 || range.last >= f.slices())
    throw std::invalid_argument("empty norm domain");
  double s = 0.0;
  for (int i = 0; i < f.components(); ++i)
    for (int k = range.first; k <= range.last; ++k) {
      auto a = f.slice(i, k);
      auto b = g.slice(i, k);
      for (std::size_t p = 0; p < a.size(); ++p) s = std::max(s, std::abs(a[p] - b[p]));
    }
  return s;
}

double sup_distance(const VectorField& f, const VectorField& g) { return sup_distance(f, g, {0, f.slices() - 1}); }

double interpolate_slice(const TorusGrid& grid, std::span<const double> slice, const Point& x) {
  const Point w = grid.wrap_point(x);
  const int n = grid.points_per_axis();
  double sx = w[0] * n;
  int ix = static_cast<int>(std::floor(sx));
  double fx = sx - ix;
  if (grid.dim() == 1) {
    const double a = slice[grid.flat(ix)];
    if (fx == 0.0) return a;
    return (1.0 - fx) * a + fx * slice[grid.flat(ix + 1)];
  }
  double sy = w[1] * n;
  int iy = static_cast<int>(std::floor(sy));
  double fy = sy - iy;
  const double a00 = slice[grid.flat(ix, iy)];
  const double a10 = slice[grid.flat(ix + 1, iy)];
  const double a01 = slice[grid.flat(ix, iy + 1)];
  const double a11 = slice[grid.flat(ix + 1, iy + 1)];
  return (1.0 - fx) * ((1.0 - fy) * a00 + fy * a01) + fx * ((1.0 - fy) * a10 + fy * a11);
}

double interpolate(const VectorField& f, int i, const Point& x, int k) {
  if (k < 0 || k >= f.slices()) throw std::invalid_argument("slice index out of range");
  return interpolate_slice(f.grid(), f.slice(i, k), x);
}

// ---------------------------------------------------------------------------
// validate_system

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const InequalityCheck& c) { return c.passed; });
}

std::string ValidationReport::summary() const {
  std::ostringstream out;
  for (const auto& c : checks)
    out << (c.passed ? "pass " : "FAIL ") << c.name << "  worst margin " << format_real(c.worst_margin)
        << "  (" << c.evaluations << " samples)\n";
  return out.str();
}

namespace {

// Relative slack for rounding in the sampled inequalities.
constexpr double kRoundingSlack = 1e-9;

struct MarginTracker {
  InequalityCheck check;
  explicit MarginTracker(std::string name) { check.name = std::move(name); check.worst_margin = std::numeric_limits<double>::infinity(); }
  void add(double margin, double scale) {
    ++check.evaluations;
    check.worst_margin = std::min(check.worst_margin, margin);
    if (!(margin >= -kRoundingSlack * (1.0 + std::abs(scale)))) check.passed = false;
  }
  void add_strict(double margin) {
    ++check.evaluations;
    check.worst_margin = std::min(check.worst_margin, margin);
    if (!(margin > 0.0)) check.passed = false;
  }
};

Point grad_x_of(const PhaseFunction& f, const Point& x, const Point& p, int dim) {
  constexpr double h = 1e-6;
  Point g{0.0, 0.0};
  for (int d = 0; d < dim; ++d) {
    Point xp = x, xm = x;
    xp[d] += h;
    xm[d] -= h;
    g[d] = (f(xp, p) - f(xm, p)) / (2 * h);
  }
  return g;
}

}  // namespace

ValidationReport validate_system(const CoupledSystem& sys, int samples) {
  if (samples < 1) throw std::invalid_argument("samples must be at least 1");
  sys.check_shape();

  constexpr double kMomentumRange = 4.0;
  constexpr double kStateRange = 3.0;
  const int dim = sys.dim;
  const double lower_dual = 1.0 / (4.0 * sys.A);
  const double upper_dual = 1.0 / (4.0 * sys.a);

  MarginTracker lower("a|p|^2 <= h_i(x,p)");
  MarginTracker upper("h_i(x,p) <= A|p|^2");
  MarginTracker dx_bound("|d_x h_i(x,p)| <= A|p|^2");
  MarginTracker convex("h_i strictly convex in p (second differences > 0)");
  MarginTracker dual_lower("|v|^2/(4A) <= l_i(x,v)");
  MarginTracker dual_upper("l_i(x,v) <= |v|^2/(4a)");
  MarginTracker lipschitz("|P_i(x,u) - P_i(x,v)| <= theta ||u - v||");

  std::vector<double> u(sys.m), w(sys.m);
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int s = 1; s <= samples; ++s) {
    const auto q = static_cast<std::uint64_t>(s);
    int b = 0;
    auto next = [&]() { return halton(q, kHaltonBases[b++ % std::size(kHaltonBases)]); };
    Point x{next(), dim == 2 ? next() : 0.0};
    Point p{kMomentumRange * (2 * next() - 1), dim == 2 ? kMomentumRange * (2 * next() - 1) : 0.0};
    Point dir{2 * next() - 1, dim == 2 ? 2 * next() - 1 : 0.0};
    if (norm(dir) == 0.0) dir = {1.0, 0.0};
    const bool close = (s % 2) == 0;
    for (int j = 0; j < sys.m; ++j) {
      u[j] = kStateRange * (2 * unit(rng) - 1);
      const double r = 2 * unit(rng) - 1;
      // half the pairs are close to probe the local slope
      w[j] = close ? u[j] + 1e-3 * r : kStateRange * r;
    }
    const double p2 = norm_squared(p);
    for (int i = 0; i < sys.m; ++i) {
      const auto& kin = sys.kinetic[i];
      const double h = kin.forward(x, p);
      lower.add(h - sys.a * p2, h);
      upper.add(sys.A * p2 - h, h);
      dx_bound.add(sys.A * p2 - norm(grad_x_of(kin.forward, x, p, dim)), sys.A * p2);
      constexpr double eps = 1e-3;
      const Point e = (eps / norm(dir)) * dir;
      convex.add_strict(kin.forward(x, p + e) + kin.forward(x, p - e) - 2 * h);

      const Point& v = p;  // reuse the sample as a velocity
      const double l = kin.backward(x, v);
      dual_lower.add(l - lower_dual * p2, l);
      dual_upper.add(upper_dual * p2 - l, l);

      if (!sys.coupling[i].identically_zero) {
        double dist = 0.0;
        for (int j = 0; j < sys.m; ++j) dist = std::max(dist, std::abs(u[j] - w[j]));
        const double diff = std::abs(sys.coupling_value(i, x, u) - sys.coupling_value(i, x, w));
        lipschitz.add(sys.theta * dist - diff, diff);
      } else {
        lipschitz.add(0.0, 0.0);
      }
    }
  }

  ValidationReport report;
  for (auto* t : {&lower, &upper, &dx_bound, &convex, &dual_lower, &dual_upper, &lipschitz})
    report.checks.push_back(t->check);
  return report;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_field_csv(std::ostream& out, const VectorField& f) {
  const auto& g = f.grid();
  out << (g.dim() == 1 ? "component,k,ix,t,x,value\n" : "component,k,ix,iy,t,x,y,value\n");
  for (int i = 0; i < f.components(); ++i)
    for (int k = 0; k < f.slices(); ++k) {
      const std::string t = format_real(g.time(k));
      for (std::size_t p = 0; p < g.num_points(); ++p) {
        const auto idx = g.index(p);
        const Point x = g.position(p);
        out << i + 1 << ',' << k << ',' << idx[0] << ',';
        if (g.dim() == 2) out << idx[1] << ',';
        out << t << ',' << format_real(x[0]) << ',';
        if (g.dim() == 2) out << format_real(x[1]) << ',';
        out << format_real(f.at(i, k, p)) << '\n';
      }
    }
}

InitialData read_initial_csv(const std::string& path, const TorusGrid& grid, int m) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open initial data file " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty initial data file");
  const std::size_t expected_cols = grid.dim() == 1 ? 3 : 4;

  InitialData d;
  d.components = m;
  d.points = grid.num_points();
  d.values.assign(static_cast<std::size_t>(m) * d.points, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> seen(d.values.size(), 0);

  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    auto fail = [&](const std::string& what) {
      throw std::runtime_error(path + ": row " + std::to_string(row) + ": " + what);
    };
    if (cols.size() != expected_cols) fail("expected " + std::to_string(expected_cols) + " columns");
    int comp = 0, ix = 0, iy = 0;
    double value = 0.0;
    try {
      comp = std::stoi(cols[0]);
      ix = std::stoi(cols[1]);
      if (grid.dim() == 2) iy = std::stoi(cols[2]);
      value = std::stod(cols.back());
    } catch (const std::exception&) {
      fail("unparsable entry");
    }
    if (!std::isfinite(value)) fail("non-finite value");
    if (comp < 1 || comp > m) fail("component out of range");
    const int n = grid.points_per_axis();
    if (ix < 0 || ix >= n || iy < 0 || iy >= n) fail("grid index out of range (seam column must not be duplicated)");
    const std::size_t pos = static_cast<std::size_t>(comp - 1) * d.points + grid.flat(ix, iy);
    if (seen[pos]) fail("duplicate grid point");
    seen[pos] = 1;
    d.values[pos] = value;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw std::runtime_error(path + ": initial data does not cover every grid point");
  return d;
}

}  // namespace wchj
