#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "wchj/dual_pair.hpp"
#include "wchj/geometry.hpp"

namespace wchj {

/// Uniform periodic grid on the flat torus [0,1)^N (N = 1 or 2) together with
/// a uniform partition of [0, T] into n_t steps.
class TorusGrid {
 public:
  TorusGrid(int dim, int points_per_axis, double t_final, int n_t);

  /// Grid whose time step is given exactly; t_final = n_t * dt.
  static TorusGrid with_step(int dim, int points_per_axis, double dt, int n_t);

  int dim() const noexcept { return dim_; }
  int points_per_axis() const noexcept { return n_x_; }
  double period() const noexcept { return 1.0; }
  double dx() const noexcept { return dx_; }
  double t_final() const noexcept { return t_final_; }
  int n_t() const noexcept { return n_t_; }
  double dt() const noexcept { return dt_; }
  std::size_t num_points() const noexcept { return num_points_; }
  double time(int k) const noexcept { return k * dt_; }

  int wrap(int i) const noexcept {
    const int r = i % n_x_;
    return r < 0 ? r + n_x_ : r;
  }
  /// Flat index with x-major ordering; indices are wrapped periodically.
  std::size_t flat(int ix, int iy = 0) const noexcept {
    return dim_ == 1 ? static_cast<std::size_t>(wrap(ix))
                     : static_cast<std::size_t>(wrap(ix)) * n_x_ + wrap(iy);
  }
  std::array<int, 2> index(std::size_t flat) const noexcept {
    if (dim_ == 1) return {static_cast<int>(flat), 0};
    return {static_cast<int>(flat / n_x_), static_cast<int>(flat % n_x_)};
  }
  Point position(std::size_t flat) const noexcept {
    const auto idx = index(flat);
    return {idx[0] * dx_, dim_ == 1 ? 0.0 : idx[1] * dx_};
  }

  /// Maps every active coordinate into [0, 1).
  Point wrap_point(const Point& x) const;
  /// Minimal-image displacement from `from` to `to`.
  Point displacement(const Point& from, const Point& to) const;
  double distance(const Point& a, const Point& b) const { return norm(displacement(a, b)); }

  bool operator==(const TorusGrid& other) const = default;

 private:
  TorusGrid() = default;

  int dim_ = 1;
  int n_x_ = 8;
  double dx_ = 0.125;
  double t_final_ = 1.0;
  int n_t_ = 1;
  double dt_ = 1.0;
  std::size_t num_points_ = 8;
};

/// Sampled field u: components x time slices x grid points -> R, stored as
/// values[(i * (n_t + 1) + k) * num_points + p].
class VectorField {
 public:
  VectorField(const TorusGrid& grid, int components);

  const TorusGrid& grid() const noexcept { return grid_; }
  int components() const noexcept { return m_; }
  int slices() const noexcept { return grid_.n_t() + 1; }

  double& at(int i, int k, std::size_t p) { return values_[offset(i, k) + p]; }
  double at(int i, int k, std::size_t p) const { return values_[offset(i, k) + p]; }

  std::span<double> slice(int i, int k) { return {values_.data() + offset(i, k), grid_.num_points()}; }
  std::span<const double> slice(int i, int k) const {
    return {values_.data() + offset(i, k), grid_.num_points()};
  }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  /// u(x_p, t_k) as an m-vector.
  std::vector<double> state(int k, std::size_t p) const;

  bool all_finite() const;

 private:
  std::size_t offset(int i, int k) const {
    return (static_cast<std::size_t>(i) * slices() + k) * grid_.num_points();
  }

  TorusGrid grid_;
  int m_;
  std::vector<double> values_;
};

/// phi: M -> R^m sampled on the grid nodes, values[i * num_points + p].
struct InitialData {
  int components = 0;
  std::size_t points = 0;
  std::vector<double> values;
  /// Optional continuous closure (i, x) -> phi_i(x) for refinement studies.
  std::function<double(int, const Point&)> analytic;

  double at(int i, std::size_t p) const { return values[static_cast<std::size_t>(i) * points + p]; }
  std::span<const double> component(int i) const {
    return {values.data() + static_cast<std::size_t>(i) * points, points};
  }

  static InitialData sample(const TorusGrid& grid, int m, std::function<double(int, const Point&)> f);
  /// Throws std::invalid_argument when shapes mismatch or an entry is not finite.
  void validate(const TorusGrid& grid) const;
  double sup_norm() const;
};

/// Extracts slice k of a field as initial data.
InitialData slice_as_initial_data(const VectorField& f, int k);

using CouplingFunction = std::function<double(const Point&, std::span<const double>)>;
using CouplingGradient = std::function<Point(const Point&, std::span<const double>)>;

/// P_i(x, u) and its x-gradient. `identically_zero` lets the operator skip work.
struct Coupling {
  CouplingFunction value;
  CouplingGradient grad_x;  // empty -> central differences
  bool identically_zero = false;
};

/// The model problem H_i(x,p,u) = h_i(x,p) + P_i(x,u) with declared constants
/// a|p|^2 <= h_i <= A|p|^2 and Lipschitz constant theta of P_i in u.
struct CoupledSystem {
  int m = 1;
  int dim = 1;
  std::vector<DualPair> kinetic;
  std::vector<Coupling> coupling;
  double a = 0.5;
  double A = 2.0;
  double theta = 1.0;

  bool decoupled() const;
  double coupling_value(int i, const Point& x, std::span<const double> u) const;
  Point coupling_grad_x(int i, const Point& x, std::span<const double> u) const;
  /// Throws std::invalid_argument on inconsistent sizes or constants.
  void check_shape() const;
};

struct SliceRange {
  int first = 0;
  int last = 0;  // inclusive
};

/// max over components, slices in range and grid points of |value|.
double sup_norm(const VectorField& f, SliceRange range);
double sup_norm(const VectorField& f);
/// sup_norm(f - g) over the given slices.
double sup_distance(const VectorField& f, const VectorField& g, SliceRange range);
double sup_distance(const VectorField& f, const VectorField& g);

/// Multilinear periodic interpolation of a single slice.
double interpolate_slice(const TorusGrid& grid, std::span<const double> slice, const Point& x);
/// Multilinear periodic interpolation of component i of slice k.
double interpolate(const VectorField& f, int i, const Point& x, int k);

struct InequalityCheck {
  std::string name;
  bool passed = true;
  double worst_margin = 0.0;
  int evaluations = 0;
};

struct ValidationReport {
  std::vector<InequalityCheck> checks;
  bool passed() const;
  std::string summary() const;
};

/// Samples the declared kinetic bounds and Lipschitz inequalities.
ValidationReport validate_system(const CoupledSystem& sys, int samples);

/// CSV `component,k,ix[,iy],t,x[,y],value`, 17 significant digits.
void write_field_csv(std::ostream& out, const VectorField& f);
/// Reads initial data in the CSV layout `component,ix[,iy],value`.
InitialData read_initial_csv(const std::string& path, const TorusGrid& grid, int m);

/// "%.17g" formatting shared by all CSV writers.
std::string format_real(double v);

}  // namespace wchj
