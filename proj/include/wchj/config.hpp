#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "wchj/expression.hpp"
#include "wchj/lax_oleinik.hpp"

namespace wchj {

/// Problem description read from a key=value file with sections
/// [system], [grid], [operator], [initial] and [run].
struct ExperimentConfig {
  // [system]
  int m = 1;
  int dim = 1;
  double a = 0.0;
  double A = 0.0;
  double theta = 0.0;
  std::string kinetic = "quadratic";     // quadratic: h = c(x)|p|^2; general: h(x,p) given
  std::vector<std::string> kinetic_expr;  // coefficient_i or h_i
  std::vector<std::string> coupling_expr;

  // [grid]
  int n_x = 0;
  double t_final = 0.0;
  int n_t = 0;

  // [operator]
  double v_max = 0.0;      // 0 picks the default cap
  int segment_slices = 0;  // 0 picks the default span
  Quadrature quadrature = Quadrature::left_endpoint;
  double tol = 1e-9;
  int max_iter = 200;

  // [initial]
  std::vector<std::string> phi_expr;
  std::string phi_csv;  // as written; resolved against base_dir

  // [run]
  std::string audits = "all";
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int validate_samples = 2000;
  std::string oracle_csv;
  double oracle_tol = 5e-3;
  double memory_cap_mb = 2048.0;

  /// Directory of the config file, for relative paths. Not serialized.
  std::string base_dir = ".";

  bool operator==(const ExperimentConfig& other) const;

  std::string resolve(const std::string& path) const;
};

/// Carries every problem found in a config, one message per entry.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const noexcept { return errors_; }

 private:
  std::vector<std::string> errors_;
};

ExperimentConfig parse_config_text(const std::string& text, const std::string& base_dir = ".");
ExperimentConfig parse_config(const std::string& path);

/// Canonical form: every key, fixed order, 17 significant digits.
std::string emit_config(const ExperimentConfig& cfg);

CoupledSystem build_system(const ExperimentConfig& cfg);
TorusGrid build_grid(const ExperimentConfig& cfg);
InitialData build_initial(const ExperimentConfig& cfg, const TorusGrid& grid);
OperatorConfig build_operator(const ExperimentConfig& cfg, const TorusGrid& grid, const InitialData& phi);

}  // namespace wchj
