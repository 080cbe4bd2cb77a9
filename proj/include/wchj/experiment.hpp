#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wchj/config.hpp"

namespace wchj {

struct RunOptions {
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::optional<std::string> audits;  // all | comma list of holder, lipschitz, residual, curves
  std::optional<std::string> out_dir;
  bool timing = false;  // write measured wall times to report.csv
};

/// validate_system -> solve -> audits; writes solution.csv, report.csv,
/// audit.csv, audit.txt and curves/*.csv under the output directory.
/// Returns 0 iff the fixed-point residual, contraction and calibration
/// equality checks pass, 1 when one of them fails, 2 on any error.
int run_experiment(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log, std::ostream& err);

struct RefineLevel {
  int n_x = 0;
  int n_t = 0;
  double diff_to_previous = 0.0;  // sup over shared nodes and slices
  double order = 0.0;             // log2(diff_{l-1} / diff_l)
  double reference_error = -1.0;  // vs brute-force Hopf-Lax at t_final, -1 when unavailable
  double reference_order = 0.0;
};

/// Memory needed to solve at the given resolution, in bytes.
double estimate_memory_bytes(const ExperimentConfig& cfg, int n_x, int n_t);

/// Brute-force Hopf-Lax value min_y phi_i(y) + T l_i((x - y) / T) over a dense
/// 1D search with `candidates` points in |x - y| <= radius.
double hopf_lax_value(const CoupledSystem& sys, const ExperimentConfig& cfg, int i, double x, double t,
                      double radius, int candidates);

/// Doubles (n_x, n_t) per level. Throws std::runtime_error when the finest
/// level would exceed cfg.memory_cap_mb.
std::vector<RefineLevel> refine(const ExperimentConfig& cfg, int levels, std::ostream& log);

void write_refine_csv(std::ostream& out, const std::vector<RefineLevel>& levels);

}  // namespace wchj
