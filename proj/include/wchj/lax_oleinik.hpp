#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "wchj/model.hpp"

namespace wchj {

enum class Quadrature { left_endpoint, midpoint };

/// Discretization of the admissible curves.
///
/// Curves are piecewise linear with knots on grid nodes. A segment spans
/// s = 1..max_segment_slices time slices and moves at most v_max * s * dt, so
/// its velocity is a multiple of dx / (s dt). The running cost along a segment
/// is accumulated one slice at a time with the chosen quadrature rule. Ties
/// between equal candidates go to the lowest flat index of the segment start,
/// then to the shortest segment.
struct OperatorConfig {
  double v_max = 8.0;
  int max_segment_slices = 1;
  Quadrature quadrature = Quadrature::left_endpoint;

  /// Largest per-axis displacement in cells for a segment of s slices.
  int stencil_radius(const TorusGrid& grid, int s = 1) const;
  /// Throws std::invalid_argument unless radius >= 1 and v_max * S * dt <= 0.5.
  void validate(const TorusGrid& grid) const;

  /// 4 (1 + ||phi|| / (a T)), clamped so that one step never exceeds half the torus.
  static double default_v_max(double phi_sup, double a, const TorusGrid& grid);
  /// min(ceil(sqrt(n_t)), floor(0.5 / (v_max dt))), at least 1.
  static int default_segment_slices(const TorusGrid& grid, double v_max);
};

/// A backtracked discrete minimizer xi of component i ending at (x, t_k).
struct MinimizingCurve {
  int component = 0;
  std::size_t end_point = 0;
  int end_slice = 0;
  std::vector<Point> nodes;          // xi(t_k), k = 0..end_slice, wrapped into [0,1)^N
  std::vector<Point> velocities;     // velocity on (t_k, t_{k+1}], k = 0..end_slice-1
  std::vector<double> step_actions;  // quadrature term of step k
  std::vector<int> knot_slices;      // slices where the curve sits on a grid node, ascending
  std::vector<std::size_t> knot_points;
  double start_value = 0.0;          // phi_i(xi(0))
  double action = 0.0;               // sum of step_actions

  double max_speed() const;
  /// Largest speed over steps that end in (t_end/2, t_end].
  double max_speed_late() const;
};

/// The discrete Lax-Oleinik operator for fixed (system, grid, phi, config).
///
/// apply() maps a frozen field u_in to v_out with v_out(., 0) = phi and
///   v_out_i(x, k) = min over segments (y, k-s) -> (x, k) of
///                   v_out_i(y, k-s) + sum_j dt L_i(q_j, (x-y)/(s dt), u_in(q_j, t_{k-s+j})).
/// The running value is v_out; the coupling always reads the frozen u_in.
class LaxOleinikOperator {
 public:
  LaxOleinikOperator(const CoupledSystem& sys, const TorusGrid& grid, InitialData phi, OperatorConfig cfg);

  VectorField apply(const VectorField& u_in) const;

  /// Follows the argmin chain of `value` back to slice 0. Throws
  /// std::runtime_error("stale value field") when value is inconsistent
  /// with (phi, u_in) beyond 1e-9.
  MinimizingCurve backtrack(const VectorField& value, const VectorField& u_in, int i, std::size_t x, int k) const;
  /// Same for several end points on slice k, sharing the coupling table.
  std::vector<MinimizingCurve> backtrack(const VectorField& value, const VectorField& u_in, int i,
                                         const std::vector<std::size_t>& xs, int k) const;

  /// Admissible displacement (in cells) of a segment spanning s slices.
  struct Offset {
    int d[2];
    Point velocity;
  };
  /// Stencil of segments spanning s slices, 1 <= s <= max_segment_slices.
  const std::vector<Offset>& offsets(int s) const { return offsets_[s]; }

  const CoupledSystem& system() const { return sys_; }
  const TorusGrid& grid() const { return grid_; }
  const OperatorConfig& config() const { return cfg_; }
  const InitialData& initial_data() const { return phi_; }

 private:
  struct QuadNode {
    int base[2];
    double frac[2];
    std::ptrdiff_t rel;  // base as an offset into a padded potential slice
  };
  struct Candidate {
    double cost;
    int s;
    std::size_t offset;
    std::size_t y;
  };

  std::vector<double> coupling_table(const VectorField& u_in) const;
  double kinetic_cost(int i, int s, std::size_t offset, std::size_t y) const;
  double coupling_term(const double* slice, std::ptrdiff_t origin, const QuadNode& q) const;
  std::ptrdiff_t padded_origin(std::size_t y) const;
  const double* padded_slice(const std::vector<double>& w, int i, int k) const;
  Candidate best_candidate(int i, std::size_t x, int k, const VectorField& value, const std::vector<double>& w) const;
  std::size_t shift(std::size_t p, int dx, int dy) const;
  MinimizingCurve trace(const VectorField& value, const std::vector<double>& w, int i, std::size_t x, int k) const;
  Point quad_point(std::size_t y, int s, std::size_t offset, int j) const;
  double v_max_cells(int s) const;

  CoupledSystem sys_;
  TorusGrid grid_;
  InitialData phi_;
  OperatorConfig cfg_;
  bool decoupled_;
  // The potential table holds each slice with a halo of pad_ cells per side so
  // that quadrature lookups never wrap.
  int pad_ = 0;
  std::ptrdiff_t row_ = 1;
  std::size_t padded_size_ = 0;
  // offsets_[s], quad_[s][offset * s + j] for s = 1..S
  std::vector<std::vector<Offset>> offsets_;
  std::vector<std::vector<QuadNode>> quad_;
  // kinetic_[i][s][offset * stride + y]; empty when evaluated on the fly
  std::vector<std::vector<std::vector<double>>> kinetic_;
  std::vector<bool> kinetic_x_independent_;
  bool kinetic_tabulated_ = true;
};

/// Free-function forms of the operator.
VectorField apply_operator(const CoupledSystem& sys, const TorusGrid& grid, const InitialData& phi,
                           const VectorField& u_in, const OperatorConfig& cfg);
MinimizingCurve backtrack(const CoupledSystem& sys, const TorusGrid& grid, const VectorField& value,
                          const VectorField& u_in, int i, std::size_t x, int k, const OperatorConfig& cfg);

/// Recomputes the discrete action of `curve` over steps first_step..end_slice-1
/// from its nodes and velocities, evaluating l_i and P_i directly (no operator
/// tables). Throws std::invalid_argument if a step exceeds the speed cap.
double curve_action(const CoupledSystem& sys, const TorusGrid& grid, const MinimizingCurve& curve,
                    const VectorField& u_in, const OperatorConfig& cfg, int first_step = 0);

/// Nodal potential P_i(x_p, u_in(x_p, t_k)) interpolated multilinearly at q.
double interpolated_potential(const CoupledSystem& sys, const VectorField& u_in, int i, const Point& q, int k);

/// CSV `slice,t,x[,y],vx[,vy],step_action`; row k carries the step ending at slice k.
void write_curve_csv(std::ostream& out, const TorusGrid& grid, const MinimizingCurve& curve);

}  // namespace wchj
