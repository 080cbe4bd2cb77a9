#include "wchj/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "wchj/analysis.hpp"
#include "wchj/fixed_point.hpp"

namespace fs = std::filesystem;

namespace wchj {

namespace {

std::set<std::string> parse_audits(const std::string& list) {
  static const std::set<std::string> known = {"holder", "lipschitz", "residual", "curves"};
  std::set<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
    if (item.empty()) continue;
    if (item == "all") {
      out.insert(known.begin(), known.end());
    } else if (item == "none") {
      continue;
    } else if (!known.count(item)) {
      throw std::invalid_argument("unknown audit '" + item + "' (expected all, holder, lipschitz, residual, curves)");
    } else {
      out.insert(item);
    }
  }
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

AuditReport contraction_report(const LaxOleinikOperator& op, const VectorField& u, const VectorField& v,
                               const std::string& label) {
  AuditReport rep;
  rep.name = "contraction_" + label;
  rep.hard = true;
  for (const auto& row : contraction_probe(op, u, v))
    rep.add({"contraction_" + label, row.k, row.t, row.measured, row.bound, 0.0, !row.violated});
  return rep;
}

AuditReport ledger_report(const ConstantLedger& L) {
  AuditReport rep;
  rep.name = "ledger";
  rep.notes.push_back("C = " + fmt(L.C) + ", t_theta = " + fmt(L.t_theta) + ", reference horizon " +
                      fmt(L.reference_horizon));
  rep.notes.push_back("Q_T = " + fmt(L.Q.back()) + ", B_T = " + fmt(L.B.back()) + ", F_T = " + fmt(L.F.back()) +
                      ", sigma_T = " + fmt(L.sigma.back()) + " at T = " + fmt(L.t_final));
  rep.notes.push_back("B_1 = " + fmt(L.B1) + ", F_1 = " + fmt(L.F1) + ", sigma_1 = " + fmt(L.sigma1));
  rep.notes.push_back("kappa_1 = " + fmt(L.kappa.front()) + ", kappa_30 = " + fmt(L.kappa.back()) +
                      ", kappa_inf = " + fmt(L.kappa_inf));
  rep.notes.push_back("B and sigma are sampled suprema inflated by " + fmt(L.inflation));
  return rep;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg_in, const RunOptions& opts, std::ostream& log, std::ostream& err) {
  ExperimentConfig cfg = cfg_in;
  if (opts.tol) cfg.tol = *opts.tol;
  if (opts.max_iter) cfg.max_iter = *opts.max_iter;
  if (opts.audits) cfg.audits = *opts.audits;
  if (opts.out_dir) cfg.out_dir = *opts.out_dir;

  try {
    if (!(cfg.tol > 0.0)) throw std::invalid_argument("tol must be positive");
    if (cfg.max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
    const auto audits = parse_audits(cfg.audits);
    const CoupledSystem sys = build_system(cfg);
    const ValidationReport validation = validate_system(sys, cfg.validate_samples);
    if (!validation.passed()) {
      err << "system validation failed:\n" << validation.summary();
      return 2;
    }
    const TorusGrid grid = build_grid(cfg);
    const InitialData phi = build_initial(cfg, grid);
    const OperatorConfig opcfg = build_operator(cfg, grid, phi);
    const LaxOleinikOperator op(sys, grid, phi, opcfg);
    log << "grid n_x=" << grid.points_per_axis() << " n_t=" << grid.n_t() << " dim=" << grid.dim()
        << ", v_max=" << fmt(opcfg.v_max) << ", segment slices=" << opcfg.max_segment_slices << '\n';

    const fs::path out(cfg.out_dir);
    fs::create_directories(out / "curves");

    Solution sol = [&] {
      try {
        return solve(op, cfg.tol, cfg.max_iter);
      } catch (const SolveError& e) {
        std::ostringstream report;
        write_report_csv(report, e.report(), opts.timing);
        write_file(out / "report.csv", report.str());
        throw;
      }
    }();
    log << "converged in " << sol.report.iterations << " applications, final residual "
        << fmt(sol.report.residuals.back()) << '\n';

    std::vector<AuditReport> reports;
    {
      AuditReport fp;
      fp.name = "fixed_point_residual";
      fp.hard = true;
      const double r = sol.report.residuals.back();
      fp.add({"fixed_point_residual", grid.n_t(), grid.t_final(), r, cfg.tol, 0.0, r <= cfg.tol});
      fp.notes.push_back(std::to_string(sol.report.iterations) + " applications; a-posteriori error bound " +
                         fmt(sol.report.error_bound));
      reports.push_back(std::move(fp));
    }
    {
      AuditReport env;
      env.name = "factorial_envelope";
      const auto& res = sol.report.residuals;
      for (std::size_t j = 0; j < res.size(); ++j) {
        const double bound = sol.report.predicted_bounds[j] + static_cast<double>(j) * 1e-12;
        env.add({"factorial_envelope", static_cast<int>(j + 1), grid.t_final(), res[j], bound, 0.0, res[j] <= bound});
      }
      reports.push_back(std::move(env));
    }
    {
      const double amp = 0.1 * (1.0 + sup_norm(sol.field));
      const VectorField start = [&] {
        VectorField f(grid, sys.m);
        for (int i = 0; i < sys.m; ++i)
          for (int k = 0; k <= grid.n_t(); ++k) {
            const auto src = phi.component(i);
            std::copy(src.begin(), src.end(), f.slice(i, k).begin());
          }
        return f;
      }();
      reports.push_back(contraction_report(op, start, sol.field, "initial"));
      VectorField shifted = random_smooth_field(grid, sys.m, cfg.seed, amp);
      for (std::size_t n = 0; n < shifted.values().size(); ++n) shifted.values()[n] += sol.field.values()[n];
      reports.push_back(contraction_report(op, sol.field, shifted, "random"));
    }

    const ConstantLedger ledger = build_ledger(sys, sol.field);
    reports.push_back(ledger_report(ledger));

    if (audits.count("holder")) {
      for (int n = 1; n <= 3; ++n) {
        try {
          reports.push_back(holder_audit(sol.field, ledger, n));
        } catch (const std::invalid_argument& e) {
          AuditReport skip;
          skip.name = "holder_n" + std::to_string(n);
          skip.skipped = true;
          skip.notes.push_back(e.what());
          reports.push_back(std::move(skip));
        }
      }
    }
    if (audits.count("lipschitz")) reports.push_back(lipschitz_audit(sol.field, ledger));
    if (audits.count("residual")) {
      AuditReport res;
      res.name = "pde_residual";
      if (grid.n_t() < 3) {
        res.skipped = true;
        res.notes.push_back("PDE residual needs n_t >= 3");
      } else {
        const ResidualSummary s = summarize_residual(pde_residual(sys, sol.field));
        res.notes.push_back("median |r| = " + fmt(s.median) + ", p90 = " + fmt(s.p90) + ", max = " + fmt(s.max) +
                            " over " + std::to_string(s.count) + " interior values");
      }
      reports.push_back(std::move(res));
    }

    // Curves for curves/*.csv: four end points per component on the last slice.
    std::vector<std::size_t> sample_points;
    {
      const int n = grid.points_per_axis();
      for (int q = 0; q < 4; ++q) sample_points.push_back(grid.flat(q * n / 4, q * n / 4));
    }
    std::vector<MinimizingCurve> sample_curves;
    for (int i = 0; i < sys.m; ++i) {
      auto c = op.backtrack(sol.image, sol.field, i, sample_points, grid.n_t());
      std::move(c.begin(), c.end(), std::back_inserter(sample_curves));
    }

    double top_speed = 0.0;
    for (const auto& c : sample_curves) top_speed = std::max(top_speed, c.max_speed());
    if (audits.count("curves")) {
      std::vector<MinimizingCurve> all;
      reports.push_back(calibration_equality_audit(op, sol.image, sol.field, grid.n_t(), &all));
      reports.push_back(calibration_inequality_audit(op, sol.image, sol.field, 1000, cfg.seed));
      reports.push_back(curve_regularity_audit(sys, all, sol.field, ledger));
      for (const auto& c : all) top_speed = std::max(top_speed, c.max_speed());
      AuditReport sc;
      sc.name = "semiconcavity";
      sc.notes.push_back("K = " + fmt(semiconcavity_constant(sol.field, ledger.t_theta)) + " on slices t >= " +
                         fmt(0.5 * ledger.t_theta));
      reports.push_back(std::move(sc));
    }
    if (top_speed >= opcfg.v_max * (1.0 - 1e-9))
      log << "warning: backtracked curves reach the speed cap v_max=" << fmt(opcfg.v_max)
          << "; raise v_max if the minimizers are being truncated\n";

    if (!cfg.oracle_csv.empty()) {
      const InitialData oracle = read_initial_csv(cfg.resolve(cfg.oracle_csv), grid, sys.m);
      double worst = 0.0;
      for (int i = 0; i < sys.m; ++i)
        for (std::size_t p = 0; p < grid.num_points(); ++p)
          worst = std::max(worst, std::abs(sol.field.at(i, grid.n_t(), p) - oracle.at(i, p)));
      AuditReport orc;
      orc.name = "oracle";
      orc.add({"oracle", grid.n_t(), grid.t_final(), worst, cfg.oracle_tol, 0.0, worst <= cfg.oracle_tol});
      reports.push_back(std::move(orc));
    }

    // Outputs
    {
      std::ostringstream s;
      write_field_csv(s, sol.field);
      write_file(out / "solution.csv", s.str());
    }
    {
      std::ostringstream s;
      write_report_csv(s, sol.report, opts.timing);
      write_file(out / "report.csv", s.str());
    }
    {
      std::ostringstream s;
      write_audit_csv(s, reports);
      write_file(out / "audit.csv", s.str());
    }
    {
      std::ostringstream s;
      write_audit_summary(s, reports);
      write_file(out / "audit.txt", s.str());
      log << s.str();
    }
    for (const auto& c : sample_curves) {
      std::ostringstream s;
      write_curve_csv(s, grid, c);
      write_file(out / "curves" / ("component" + std::to_string(c.component + 1) + "_point" +
                                   std::to_string(c.end_point) + ".csv"),
                 s.str());
    }

    bool ok = true;
    for (const auto& r : reports)
      if (r.hard && !r.passed) {
        ok = false;
        err << "hard check failed: " << r.name << '\n';
      }
    return ok ? 0 : 1;
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    return 2;
  }
}

double estimate_memory_bytes(const ExperimentConfig& cfg, int n_x, int n_t) {
  const double points = std::pow(static_cast<double>(n_x), cfg.dim);
  const double field = 8.0 * cfg.m * (n_t + 1.0) * points;
  // iterate, image, coupling table and the previous level kept for comparison
  return 5.0 * field;
}

double hopf_lax_value(const CoupledSystem& sys, const ExperimentConfig& cfg, int i, double x, double t,
                      double radius, int candidates) {
  const Expression phi = Expression::parse(cfg.phi_expr[i], {0, cfg.dim, false});
  double best = std::numeric_limits<double>::infinity();
  for (int c = 0; c < candidates; ++c) {
    const double d = -radius + 2.0 * radius * (c + 0.5) / candidates;
    const double y = x - d;
    const double v = phi({Point{y - std::floor(y), 0.0}, {}, {}}) + t * sys.kinetic[i].backward(Point{x, 0.0}, Point{d / t, 0.0});
    best = std::min(best, v);
  }
  return best;
}

std::vector<RefineLevel> refine(const ExperimentConfig& cfg, int levels, std::ostream& log) {
  if (levels < 2) throw std::invalid_argument("refine needs at least 2 levels");
  const int scale = 1 << (levels - 1);
  const double bytes = estimate_memory_bytes(cfg, cfg.n_x * scale, cfg.n_t * scale);
  if (bytes > cfg.memory_cap_mb * 1024.0 * 1024.0) {
    std::ostringstream msg;
    msg << "refusing to refine: finest level needs about " << fmt(bytes / (1024.0 * 1024.0))
        << " MB, above memory_cap_mb = " << fmt(cfg.memory_cap_mb);
    throw std::runtime_error(msg.str());
  }
  const CoupledSystem sys = build_system(cfg);
  bool reference = sys.decoupled() && cfg.dim == 1 && cfg.phi_csv.empty();
  for (const auto& k : sys.kinetic) reference = reference && k.x_independent;

  std::vector<RefineLevel> out;
  std::optional<VectorField> previous;
  for (int l = 0; l < levels; ++l) {
    ExperimentConfig c = cfg;
    c.n_x = cfg.n_x << l;
    c.n_t = cfg.n_t << l;
    if (cfg.segment_slices > 0) c.segment_slices = cfg.segment_slices << l;
    const TorusGrid grid = build_grid(c);
    const InitialData phi = build_initial(c, grid);
    const OperatorConfig opcfg = build_operator(c, grid, phi);
    Solution sol = solve(sys, grid, phi, opcfg, c.tol, c.max_iter);

    RefineLevel lev;
    lev.n_x = c.n_x;
    lev.n_t = c.n_t;
    if (previous) {
      const TorusGrid& coarse = previous->grid();
      double diff = 0.0;
      for (int i = 0; i < sys.m; ++i)
        for (int k = 0; k <= coarse.n_t(); ++k)
          for (std::size_t p = 0; p < coarse.num_points(); ++p) {
            const auto idx = coarse.index(p);
            const double fine = sol.field.at(i, 2 * k, grid.flat(2 * idx[0], 2 * idx[1]));
            diff = std::max(diff, std::abs(fine - previous->at(i, k, p)));
          }
      lev.diff_to_previous = diff;
      if (out.size() >= 2 && out.back().diff_to_previous > 0.0 && diff > 0.0)
        lev.order = std::log2(out.back().diff_to_previous / diff);
    }
    if (reference) {
      double err = 0.0;
      for (int i = 0; i < sys.m; ++i)
        for (std::size_t p = 0; p < grid.num_points(); ++p) {
          const double exact =
              hopf_lax_value(sys, c, i, grid.position(p)[0], c.t_final, opcfg.v_max * c.t_final, 100000);
          err = std::max(err, std::abs(exact - sol.field.at(i, grid.n_t(), p)));
        }
      lev.reference_error = err;
      if (!out.empty() && out.back().reference_error > 0.0 && err > 0.0)
        lev.reference_order = std::log2(out.back().reference_error / err);
    }
    log << "level " << l << ": n_x=" << lev.n_x << " n_t=" << lev.n_t << " diff=" << fmt(lev.diff_to_previous)
        << " order=" << fmt(lev.order);
    if (reference) log << " reference_error=" << fmt(lev.reference_error) << " order=" << fmt(lev.reference_order);
    log << '\n';
    out.push_back(lev);
    previous = std::move(sol.field);
  }
  return out;
}

void write_refine_csv(std::ostream& out, const std::vector<RefineLevel>& levels) {
  out << "level,n_x,n_t,diff_to_previous,order,reference_error,reference_order\n";
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto& v = levels[l];
    out << l << ',' << v.n_x << ',' << v.n_t << ',' << format_real(v.diff_to_previous) << ','
        << format_real(v.order) << ',' << format_real(v.reference_error) << ',' << format_real(v.reference_order)
        << '\n';
  }
}

}  // namespace wchj
