#include "wchj/lax_oleinik.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "wchj/parallel.hpp"

namespace wchj {

namespace {

constexpr double kCapSlack = 1e-9;
constexpr double kStaleTolerance = 1e-9;
// Kinetic tables larger than this many entries are evaluated on the fly.
constexpr std::size_t kMaxKineticTable = std::size_t{1} << 25;

int floor_div(int n, int d) {
  int q = n / d;
  if ((n % d != 0) && ((n < 0) != (d < 0))) --q;
  return q;
}

}  // namespace

// ---------------------------------------------------------------------------
// OperatorConfig

int OperatorConfig::stencil_radius(const TorusGrid& grid, int s) const {
  return static_cast<int>(std::floor(v_max * s * grid.dt() / grid.dx() + kCapSlack));
}

void OperatorConfig::validate(const TorusGrid& grid) const {
  if (!(v_max > 0.0) || !std::isfinite(v_max)) throw std::invalid_argument("v_max must be positive");
  if (max_segment_slices < 1) throw std::invalid_argument("segment span must be at least one slice");
  if (stencil_radius(grid, 1) < 1)
    throw std::invalid_argument("speed cap below one cell per step (v_max * dt < dx); raise v_max or dt");
  if (v_max * max_segment_slices * grid.dt() > 0.5 + 1e-12)
    throw std::invalid_argument("v_max * segment span * dt exceeds half the torus");
}

double OperatorConfig::default_v_max(double phi_sup, double a, const TorusGrid& grid) {
  const double v = 4.0 * (1.0 + phi_sup / (a * grid.dt() * grid.n_t()));
  return std::min(v, 0.5 / grid.dt());
}

int OperatorConfig::default_segment_slices(const TorusGrid& grid, double v_max) {
  const int by_resolution = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(grid.n_t())) - 1e-12));
  const int by_wrap = static_cast<int>(std::floor(0.5 / (v_max * grid.dt()) + 1e-12));
  return std::max(1, std::min(by_resolution, by_wrap));
}

// ---------------------------------------------------------------------------
// MinimizingCurve

double MinimizingCurve::max_speed() const {
  double s = 0.0;
  for (const auto& v : velocities) s = std::max(s, norm(v));
  return s;
}

double MinimizingCurve::max_speed_late() const {
  double s = 0.0;
  for (int k = end_slice / 2; k < end_slice; ++k) s = std::max(s, norm(velocities[k]));
  return s;
}

// ---------------------------------------------------------------------------
// LaxOleinikOperator

LaxOleinikOperator::LaxOleinikOperator(const CoupledSystem& sys, const TorusGrid& grid, InitialData phi,
                                       OperatorConfig cfg)
    : sys_(sys), grid_(grid), phi_(std::move(phi)), cfg_(cfg), decoupled_(sys.decoupled()) {
  sys_.check_shape();
  if (sys_.dim != grid_.dim()) throw std::invalid_argument("system and grid dimensions differ");
  if (phi_.components != sys_.m) throw std::invalid_argument("initial data has the wrong number of components");
  phi_.validate(grid_);
  cfg_.validate(grid_);

  const int S = cfg_.max_segment_slices;
  const int dim = grid_.dim();
  const double dx = grid_.dx();
  const double dt = grid_.dt();
  const int mid = cfg_.quadrature == Quadrature::midpoint ? 1 : 0;

  offsets_.resize(S + 1);
  quad_.resize(S + 1);
  for (int s = 1; s <= S; ++s) {
    const int r = cfg_.stencil_radius(grid_, s);
    const double reach = v_max_cells(s);
    for (int d0 = -r; d0 <= r; ++d0) {
      for (int d1 = (dim == 2 ? -r : 0); d1 <= (dim == 2 ? r : 0); ++d1) {
        if (dim == 2 && static_cast<double>(d0) * d0 + static_cast<double>(d1) * d1 > reach * reach) continue;
        Offset o{{d0, d1}, {d0 * dx / (s * dt), d1 * dx / (s * dt)}};
        offsets_[s].push_back(o);
        for (int j = 0; j < s; ++j) {
          QuadNode q{};
          for (int c = 0; c < 2; ++c) {
            const int num = (2 * j + mid) * o.d[c];
            const int den = 2 * s;
            q.base[c] = floor_div(num, den);
            q.frac[c] = static_cast<double>(num - q.base[c] * den) / den;
          }
          quad_[s].push_back(q);
        }
      }
    }
  }

  pad_ = cfg_.stencil_radius(grid_, S) + 1;
  const int span = grid_.points_per_axis() + 2 * pad_;
  row_ = dim == 2 ? span : 1;
  padded_size_ = static_cast<std::size_t>(dim == 2 ? span * span : span);
  for (int s = 1; s <= S; ++s)
    for (auto& q : quad_[s]) q.rel = static_cast<std::ptrdiff_t>(q.base[0]) * row_ + (dim == 2 ? q.base[1] : 0);

  // Kinetic part of each segment cost.
  kinetic_x_independent_.resize(sys_.m);
  std::size_t entries = 0;
  for (int i = 0; i < sys_.m; ++i) {
    kinetic_x_independent_[i] = sys_.kinetic[i].x_independent;
    for (int s = 1; s <= S; ++s)
      entries += offsets_[s].size() * (kinetic_x_independent_[i] ? 1 : grid_.num_points());
  }
  kinetic_tabulated_ = entries <= kMaxKineticTable;
  if (!kinetic_tabulated_) return;

  kinetic_.resize(sys_.m);
  for (int i = 0; i < sys_.m; ++i) {
    kinetic_[i].resize(S + 1);
    const std::size_t stride = kinetic_x_independent_[i] ? 1 : grid_.num_points();
    for (int s = 1; s <= S; ++s) {
      auto& table = kinetic_[i][s];
      table.resize(offsets_[s].size() * stride);
      for (std::size_t o = 0; o < offsets_[s].size(); ++o)
        for (std::size_t y = 0; y < stride; ++y) {
          double sum = 0.0;
          for (int j = 0; j < s; ++j)
            sum += dt * sys_.kinetic[i].backward(quad_point(y, s, o, j), offsets_[s][o].velocity);
          table[o * stride + y] = sum;
        }
    }
  }
}

double LaxOleinikOperator::v_max_cells(int s) const { return cfg_.v_max * s * grid_.dt() / grid_.dx() + kCapSlack; }

std::size_t LaxOleinikOperator::shift(std::size_t p, int dx, int dy) const {
  if (grid_.dim() == 1) return static_cast<std::size_t>(grid_.wrap(static_cast<int>(p) + dx));
  const auto idx = grid_.index(p);
  return grid_.flat(idx[0] + dx, idx[1] + dy);
}

Point LaxOleinikOperator::quad_point(std::size_t y, int s, std::size_t offset, int j) const {
  const auto idx = grid_.index(y);
  const QuadNode& q = quad_[s][offset * s + j];
  const double dx = grid_.dx();
  Point p{(idx[0] + q.base[0] + q.frac[0]) * dx, 0.0};
  if (grid_.dim() == 2) p[1] = (idx[1] + q.base[1] + q.frac[1]) * dx;
  return grid_.wrap_point(p);
}

double LaxOleinikOperator::kinetic_cost(int i, int s, std::size_t offset, std::size_t y) const {
  if (kinetic_tabulated_) {
    const auto& table = kinetic_[i][s];
    return kinetic_x_independent_[i] ? table[offset] : table[offset * grid_.num_points() + y];
  }
  double sum = 0.0;
  for (int j = 0; j < s; ++j)
    sum += grid_.dt() * sys_.kinetic[i].backward(quad_point(y, s, offset, j), offsets_[s][offset].velocity);
  return sum;
}

std::vector<double> LaxOleinikOperator::coupling_table(const VectorField& u_in) const {
  if (decoupled_) return {};
  if (!(u_in.grid() == grid_) || u_in.components() != sys_.m)
    throw std::invalid_argument("frozen field is not shaped for the operator grid");
  const int n = grid_.points_per_axis();
  const int nt = grid_.n_t();
  const int span = n + 2 * pad_;
  std::vector<double> nodal(grid_.num_points());
  std::vector<double> w(static_cast<std::size_t>(sys_.m) * nt * padded_size_, 0.0);
  std::vector<double> state(sys_.m);
  for (int i = 0; i < sys_.m; ++i)
    for (int k = 0; k < nt; ++k) {
      for (std::size_t p = 0; p < grid_.num_points(); ++p) {
        for (int j = 0; j < sys_.m; ++j) state[j] = u_in.at(j, k, p);
        nodal[p] = sys_.coupling_value(i, grid_.position(p), state);
      }
      double* dst = w.data() + (static_cast<std::size_t>(i) * nt + k) * padded_size_;
      if (grid_.dim() == 1) {
        for (int c = 0; c < span; ++c) dst[c] = nodal[grid_.flat(c - pad_)];
      } else {
        for (int cx = 0; cx < span; ++cx)
          for (int cy = 0; cy < span; ++cy) dst[cx * row_ + cy] = nodal[grid_.flat(cx - pad_, cy - pad_)];
      }
    }
  return w;
}

std::ptrdiff_t LaxOleinikOperator::padded_origin(std::size_t y) const {
  const auto idx = grid_.index(y);
  if (grid_.dim() == 1) return idx[0] + pad_;
  return (idx[0] + pad_) * row_ + (idx[1] + pad_);
}

const double* LaxOleinikOperator::padded_slice(const std::vector<double>& w, int i, int k) const {
  return w.data() + (static_cast<std::size_t>(i) * grid_.n_t() + k) * padded_size_;
}

double LaxOleinikOperator::coupling_term(const double* slice, std::ptrdiff_t origin, const QuadNode& q) const {
  const double* a = slice + origin + q.rel;
  const double fx = q.frac[0];
  if (grid_.dim() == 1) return (1.0 - fx) * a[0] + fx * a[1];
  const double fy = q.frac[1];
  return (1.0 - fx) * ((1.0 - fy) * a[0] + fy * a[1]) + fx * ((1.0 - fy) * a[row_] + fy * a[row_ + 1]);
}

LaxOleinikOperator::Candidate LaxOleinikOperator::best_candidate(int i, std::size_t x, int k,
                                                                 const VectorField& value,
                                                                 const std::vector<double>& w) const {
  Candidate best{std::numeric_limits<double>::infinity(), 0, 0, std::numeric_limits<std::size_t>::max()};
  const int S = std::min(cfg_.max_segment_slices, k);
  const std::size_t np = grid_.num_points();
  const bool x_independent = kinetic_x_independent_[i];
  std::vector<const double*> slices(S);
  for (int s = 1; s <= S; ++s) {
    const auto& offs = offsets_[s];
    const double* prev = value.slice(i, k - s).data();
    const double* kin = kinetic_tabulated_ ? kinetic_[i][s].data() : nullptr;
    if (!decoupled_)
      for (int j = 0; j < s; ++j) slices[j] = padded_slice(w, i, k - s + j);
    for (std::size_t o = 0; o < offs.size(); ++o) {
      const std::size_t y = shift(x, -offs[o].d[0], -offs[o].d[1]);
      const double kc = kin ? kin[x_independent ? o : o * np + y] : kinetic_cost(i, s, o, y);
      double potential = 0.0;
      if (!decoupled_) {
        const QuadNode* q = &quad_[s][o * s];
        const std::ptrdiff_t origin = padded_origin(y);
        for (int j = 0; j < s; ++j) potential += coupling_term(slices[j], origin, q[j]);
        potential *= grid_.dt();
      }
      const double c = prev[y] + kc - potential;
      if (std::isnan(c)) return {c, s, o, y};
      if (c < best.cost || (c == best.cost && y < best.y)) best = {c, s, o, y};
    }
  }
  return best;
}

VectorField LaxOleinikOperator::apply(const VectorField& u_in) const {
  if (!(u_in.grid() == grid_) || u_in.components() != sys_.m)
    throw std::invalid_argument("frozen field is not shaped for the operator grid");
  const auto w = coupling_table(u_in);
  VectorField out(grid_, sys_.m);
  const std::size_t np = grid_.num_points();
  for (int i = 0; i < sys_.m; ++i) {
    auto s0 = out.slice(i, 0);
    auto phi = phi_.component(i);
    std::copy(phi.begin(), phi.end(), s0.begin());
  }

  const long long npoints = static_cast<long long>(np);
  for (int k = 1; k <= grid_.n_t(); ++k) {
    for (int i = 0; i < sys_.m; ++i) {
      double* dst = out.slice(i, k).data();
      long long bad_x = -1;
      std::size_t bad_y = 0;
#ifdef WCHJ_HAVE_OPENMP
#pragma omp parallel for schedule(static) num_threads(worker_threads())
#endif
      for (long long x = 0; x < npoints; ++x) {
        const Candidate c = best_candidate(i, static_cast<std::size_t>(x), k, out, w);
        dst[x] = c.cost;
        if (std::isnan(c.cost)) {
#ifdef WCHJ_HAVE_OPENMP
#pragma omp critical
#endif
          if (bad_x < 0 || x < bad_x) {
            bad_x = x;
            bad_y = c.y;
          }
        }
      }
      if (bad_x >= 0) {
        std::ostringstream msg;
        msg << "NaN in Lagrangian evaluation at component " << i + 1 << ", slice " << k << ", x index "
            << bad_x << ", y index " << bad_y;
        throw std::runtime_error(msg.str());
      }
    }
  }
  return out;
}

MinimizingCurve LaxOleinikOperator::backtrack(const VectorField& value, const VectorField& u_in, int i,
                                              std::size_t x, int k) const {
  return backtrack(value, u_in, i, std::vector<std::size_t>{x}, k).front();
}

std::vector<MinimizingCurve> LaxOleinikOperator::backtrack(const VectorField& value, const VectorField& u_in, int i,
                                                           const std::vector<std::size_t>& xs, int k) const {
  if (!(value.grid() == grid_) || value.components() != sys_.m)
    throw std::invalid_argument("value field is not shaped for the operator grid");
  if (i < 0 || i >= sys_.m || k < 0 || k > grid_.n_t()) throw std::invalid_argument("backtrack query out of range");
  for (std::size_t x : xs)
    if (x >= grid_.num_points()) throw std::invalid_argument("backtrack query out of range");
  const auto w = coupling_table(u_in);
  std::vector<MinimizingCurve> curves;
  curves.reserve(xs.size());
  for (std::size_t x : xs) curves.push_back(trace(value, w, i, x, k));
  return curves;
}

MinimizingCurve LaxOleinikOperator::trace(const VectorField& value, const std::vector<double>& w, int i,
                                          std::size_t x, int k) const {
  const double dt = grid_.dt();
  const double dx = grid_.dx();

  MinimizingCurve curve;
  curve.component = i;
  curve.end_point = x;
  curve.end_slice = k;
  curve.nodes.assign(k + 1, Point{});
  curve.velocities.assign(k, Point{});
  curve.step_actions.assign(k, 0.0);

  std::size_t cur = x;
  int kk = k;
  curve.knot_slices.push_back(kk);
  curve.knot_points.push_back(cur);
  while (kk > 0) {
    const Candidate c = best_candidate(i, cur, kk, value, w);
    if (!(std::abs(c.cost - value.at(i, kk, cur)) <= kStaleTolerance)) throw std::runtime_error("stale value field");
    const int s = c.s;
    const Offset& off = offsets_[s][c.offset];
    const auto yidx = grid_.index(c.y);
    for (int j = 0; j < s; ++j) {
      const int step = kk - s + j;
      Point node{(yidx[0] + static_cast<double>(j * off.d[0]) / s) * dx, 0.0};
      if (grid_.dim() == 2) node[1] = (yidx[1] + static_cast<double>(j * off.d[1]) / s) * dx;
      curve.nodes[step] = grid_.wrap_point(node);
      curve.velocities[step] = off.velocity;
      const Point q = quad_point(c.y, s, c.offset, j);
      const double potential =
          decoupled_ ? 0.0 : coupling_term(padded_slice(w, i, step), padded_origin(c.y), quad_[s][c.offset * s + j]);
      curve.step_actions[step] = dt * sys_.kinetic[i].backward(q, off.velocity) - dt * potential;
    }
    cur = c.y;
    kk -= s;
    curve.knot_slices.push_back(kk);
    curve.knot_points.push_back(cur);
  }
  curve.nodes[0] = grid_.position(cur);
  curve.nodes[k] = grid_.position(x);
  curve.start_value = value.at(i, 0, cur);
  std::reverse(curve.knot_slices.begin(), curve.knot_slices.end());
  std::reverse(curve.knot_points.begin(), curve.knot_points.end());
  curve.action = 0.0;
  for (double a : curve.step_actions) curve.action += a;
  return curve;
}

// ---------------------------------------------------------------------------
// Free functions

VectorField apply_operator(const CoupledSystem& sys, const TorusGrid& grid, const InitialData& phi,
                           const VectorField& u_in, const OperatorConfig& cfg) {
  return LaxOleinikOperator(sys, grid, phi, cfg).apply(u_in);
}

MinimizingCurve backtrack(const CoupledSystem& sys, const TorusGrid& grid, const VectorField& value,
                          const VectorField& u_in, int i, std::size_t x, int k, const OperatorConfig& cfg) {
  return LaxOleinikOperator(sys, grid, slice_as_initial_data(value, 0), cfg).backtrack(value, u_in, i, x, k);
}

double interpolated_potential(const CoupledSystem& sys, const VectorField& u_in, int i, const Point& q, int k) {
  if (sys.coupling[i].identically_zero) return 0.0;
  const TorusGrid& g = u_in.grid();
  const Point w = g.wrap_point(q);
  const int n = g.points_per_axis();
  const double sx = w[0] * n;
  const int ix = static_cast<int>(std::floor(sx));
  const double fx = sx - ix;
  auto nodal = [&](int cx, int cy) {
    const std::size_t p = g.flat(cx, cy);
    const auto state = u_in.state(k, p);
    return sys.coupling_value(i, g.position(p), state);
  };
  if (g.dim() == 1) {
    const double a = nodal(ix, 0);
    return fx == 0.0 ? a : (1.0 - fx) * a + fx * nodal(ix + 1, 0);
  }
  const double sy = w[1] * n;
  const int iy = static_cast<int>(std::floor(sy));
  const double fy = sy - iy;
  return (1.0 - fx) * ((1.0 - fy) * nodal(ix, iy) + fy * nodal(ix, iy + 1)) +
         fx * ((1.0 - fy) * nodal(ix + 1, iy) + fy * nodal(ix + 1, iy + 1));
}

double curve_action(const CoupledSystem& sys, const TorusGrid& grid, const MinimizingCurve& curve,
                    const VectorField& u_in, const OperatorConfig& cfg, int first_step) {
  const double dt = grid.dt();
  const int i = curve.component;
  double action = 0.0;
  for (int k = first_step; k < curve.end_slice; ++k) {
    const Point& v = curve.velocities[k];
    if (norm(v) > cfg.v_max * (1.0 + kCapSlack)) throw std::invalid_argument("curve step exceeds the speed cap");
    const Point q = cfg.quadrature == Quadrature::midpoint ? grid.wrap_point(curve.nodes[k] + (0.5 * dt) * v)
                                                           : curve.nodes[k];
    action += dt * sys.kinetic[i].backward(q, v) - dt * interpolated_potential(sys, u_in, i, q, k);
  }
  return action;
}

void write_curve_csv(std::ostream& out, const TorusGrid& grid, const MinimizingCurve& curve) {
  const bool two = grid.dim() == 2;
  out << (two ? "slice,t,x,y,vx,vy,step_action\n" : "slice,t,x,vx,step_action\n");
  for (int k = 0; k <= curve.end_slice; ++k) {
    const Point v = k > 0 ? curve.velocities[k - 1] : Point{0.0, 0.0};
    const double a = k > 0 ? curve.step_actions[k - 1] : 0.0;
    out << k << ',' << format_real(grid.time(k)) << ',' << format_real(curve.nodes[k][0]) << ',';
    if (two) out << format_real(curve.nodes[k][1]) << ',';
    out << format_real(v[0]) << ',';
    if (two) out << format_real(v[1]) << ',';
    out << format_real(a) << '\n';
  }
}

}  // namespace wchj
