#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "wchj/lax_oleinik.hpp"

namespace wchj {

struct SolveReport {
  int iterations = 0;
  std::vector<double> residuals;         // ||u^(j+1) - u^(j)||, j = 0..iterations-1
  std::vector<double> predicted_bounds;  // (T theta)^j / j! * residuals[0]
  std::vector<double> wall_times;        // seconds spent in application j
  bool converged = false;
  double wall_time = 0.0;
  /// Bound on ||u_returned - u*|| from the factorial envelope: exp(T theta) * final residual.
  double error_bound = 0.0;
};

/// Thrown when the iteration budget runs out; carries the partial report.
class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& what, SolveReport report) : std::runtime_error(what), report_(std::move(report)) {}
  const SolveReport& report() const noexcept { return report_; }

 private:
  SolveReport report_;
};

struct Solution {
  VectorField field;  // u^(j)
  VectorField image;  // A[u^(j)], the field the minimizing curves calibrate
  SolveReport report;
};

/// (T theta)^j / j!.
double factorial_envelope(double t_final, double theta, int j);

/// Plain fixed-point iteration started from phi extended constantly in time.
/// Stops at the first iterate u^(j) with ||A[u^(j)] - u^(j)|| <= tol and
/// returns that iterate.
Solution solve(const LaxOleinikOperator& op, double tol, int max_iter);
Solution solve(const CoupledSystem& sys, const TorusGrid& grid, const InitialData& phi, const OperatorConfig& cfg,
               double tol, int max_iter);

/// Evolves single-time data by time t on a grid with the same spacing and dt.
/// Throws std::invalid_argument("non-grid time") unless t is a multiple of dt.
InitialData semigroup_step(const CoupledSystem& sys, const TorusGrid& grid, const InitialData& state, double t,
                           const OperatorConfig& cfg, double tol, int max_iter = 500);

struct ContractionRow {
  int k = 0;
  double t = 0.0;
  double measured = 0.0;  // ||A[u](., t_k) - A[v](., t_k)||
  double bound = 0.0;     // t_k theta ||u - v|| over slices 0..k
  bool violated = false;  // measured > bound + 1e-9
};

std::vector<ContractionRow> contraction_probe(const LaxOleinikOperator& op, const VectorField& u,
                                              const VectorField& v);

/// Seeded smooth field: a few random Fourier modes in x and t per component,
/// scaled so that its sup norm is at most `amplitude`.
VectorField random_smooth_field(const TorusGrid& grid, int m, std::uint64_t seed, double amplitude);

/// CSV `iter,residual,predicted_bound,wall_time_s`; wall times are written as 0 unless requested.
void write_report_csv(std::ostream& out, const SolveReport& report, bool with_timing);

}  // namespace wchj
