#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wchj/lax_oleinik.hpp"

namespace wchj {

// Ledger arithmetic.
double kappa_one(double C, double B1, double F1);
double kappa_next(double kappa_n, double C, double F1, double sigma1);
double kappa_infinity(double C, double F1, double sigma1);
double holder_exponent(int n);  // 1 - 2^-n
double t_theta(double theta);   // min{1, 1/(16 theta^2)}

/// Constants of the regularity estimates, evaluated on a computed field.
///
/// Q, B, F, sigma are tabulated per slice horizon t_k. B and sigma are sampled
/// suprema (lower estimates); the kappa constants and every audit bound use
/// them multiplied by `inflation`.
struct ConstantLedger {
  double a = 0.0;
  double A = 0.0;
  double theta = 0.0;
  double C = 0.0;
  double t_theta = 0.0;
  double inflation = 1.05;
  double dt = 0.0;
  double t_final = 0.0;
  /// Horizon standing in for 1 in F_1, sigma_1, B_1: min(1, t_final).
  double reference_horizon = 0.0;

  std::vector<double> Q;              // ||u|| over slices 0..k
  std::vector<double> B_sampled;      // max_i sup |P_i| over M x [-Q_k, Q_k]^m
  std::vector<double> sigma_sampled;  // max_i sup |d_x P_i| over the same set
  std::vector<double> B;              // inflated, monotone
  std::vector<double> sigma;          // inflated, monotone
  std::vector<double> F;              // 2 Q + t_k B

  double B1 = 0.0;
  double F1 = 0.0;
  double sigma1 = 0.0;
  std::vector<double> kappa;  // kappa[n - 1] = kappa_n, n = 1..30
  double kappa_inf = 0.0;

  /// Index of the slice horizon covering t (clamped to the grid).
  int horizon_index(double t) const;
  double B_at(double t) const { return B[horizon_index(t)]; }
  double F_at(double t) const { return F[horizon_index(t)]; }
  double sigma_at(double t) const { return sigma[horizon_index(t)]; }
  double kappa_n(int n) const;
  /// kappa_inf(C, F_h, sigma_h) with h = min(t + 1 - t_theta, t_final).
  double kappa_t(double t) const;
  /// kappa_inf / sqrt(t) for t <= t_theta, kappa_t / sqrt(t_theta) beyond.
  double lipschitz_bound(double t) const;
};

ConstantLedger build_ledger(const CoupledSystem& sys, const VectorField& u, int samples = 10000);

struct AuditRow {
  std::string audit;
  int k = 0;
  double t = 0.0;
  double measured = 0.0;
  double bound = 0.0;
  double ratio = 0.0;
  bool pass = true;
};

struct AuditReport {
  std::string name;
  bool passed = true;
  /// A failed hard audit fails the run; soft audits only report.
  bool hard = false;
  bool skipped = false;
  std::vector<AuditRow> rows;
  std::vector<std::string> notes;
  double worst_ratio = 0.0;

  void add(AuditRow row);
};

/// Pairs |x - y| <= t_k on slices 0 < t_k < t_theta against kappa_n / sqrt(t) |x - y|^alpha_n.
/// Throws std::invalid_argument when no slice lies in (0, t_theta).
AuditReport holder_audit(const VectorField& u, const ConstantLedger& ledger, int n);

/// Slice Lipschitz constants and the t-direction bounds.
AuditReport lipschitz_audit(const VectorField& u, const ConstantLedger& ledger);

struct ResidualSummary {
  double median = 0.0;
  double p90 = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

/// |d_t u_i + H_i(x, d_x u_i, u)| by central differences on slices 1..n_t-1, all components and points.
/// Throws std::invalid_argument when n_t < 3.
std::vector<double> pde_residual(const CoupledSystem& sys, const VectorField& u);
ResidualSummary summarize_residual(std::vector<double> residuals);

struct DualityCheck {
  bool differentiable = false;
  double second_difference = 0.0;
  double threshold = 0.0;
  Point velocity{};
  Point momentum{};
  double fenchel_defect = 0.0;   // |<P,V> - L - H|
  double gradient_defect = 0.0;  // |V - dH/dp(P)|
  double tolerance = 0.0;        // 10 (dx + dt)
  double late_speed = 0.0;       // max speed on steps ending in (t/2, t]
};

/// Endpoint classification and the duality relation at the curve's end point.
DualityCheck curve_regularity(const CoupledSystem& sys, const MinimizingCurve& curve, const VectorField& u,
                              const ConstantLedger& ledger);
AuditReport curve_regularity_audit(const CoupledSystem& sys, const std::vector<MinimizingCurve>& curves,
                                   const VectorField& u, const ConstantLedger& ledger);

/// Backtracks every end point of slice k for every component from value = A[u]
/// and checks u-differences between every pair of knots against recomputed actions.
AuditReport calibration_equality_audit(const LaxOleinikOperator& op, const VectorField& value,
                                       const VectorField& u_in, int k, std::vector<MinimizingCurve>* curves = nullptr);

/// Random admissible segment chains between grid nodes; the value increment
/// never exceeds the action (slack >= -1e-9).
AuditReport calibration_inequality_audit(const LaxOleinikOperator& op, const VectorField& value,
                                         const VectorField& u_in, int trials, std::uint64_t seed);

/// Largest (u(x+dx) + u(x-dx) - 2u(x)) / dx^2 along each axis on slices t >= t_theta / 2.
double semiconcavity_constant(const VectorField& u, double t_theta);

void write_audit_csv(std::ostream& out, const std::vector<AuditReport>& reports);
void write_audit_summary(std::ostream& out, const std::vector<AuditReport>& reports);

}  // namespace wchj
