#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "wchj/experiment.hpp"
#include "wchj/model.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Variational solver for weakly coupled Hamilton-Jacobi systems on the torus"};
  app.require_subcommand(1);

  std::string config_path;
  wchj::RunOptions opts;
  double tol = 0.0;
  int max_iter = 0;
  std::string audits;
  std::string out_dir;

  auto* run = app.add_subcommand("run", "solve, audit and write CSV artifacts");
  run->add_option("config", config_path, "config file")->required();
  auto* tol_opt = run->add_option("--tol", tol, "fixed-point tolerance (sup norm)");
  auto* iter_opt = run->add_option("--max-iter", max_iter, "iteration budget");
  auto* audit_opt = run->add_option("--audit", audits, "all | comma list of holder, lipschitz, residual, curves");
  auto* out_opt = run->add_option("--out", out_dir, "output directory");
  run->add_flag("--timing", opts.timing, "write measured wall times to report.csv");

  int levels = 3;
  std::string refine_out;
  auto* refine = app.add_subcommand("refine", "convergence table under grid doubling");
  refine->add_option("config", config_path, "config file")->required();
  refine->add_option("--levels", levels, "number of levels (>= 2)")->required();
  refine->add_option("--out", refine_out, "output directory (default: the config's out)");

  auto* validate = app.add_subcommand("validate", "parse the config and sample the structural inequalities");
  validate->add_option("config", config_path, "config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const wchj::ExperimentConfig cfg = wchj::parse_config(config_path);
    if (run->parsed()) {
      if (*tol_opt) opts.tol = tol;
      if (*iter_opt) opts.max_iter = max_iter;
      if (*audit_opt) opts.audits = audits;
      if (*out_opt) opts.out_dir = out_dir;
      return wchj::run_experiment(cfg, opts, std::cout, std::cerr);
    }
    if (refine->parsed()) {
      const auto table = wchj::refine(cfg, levels, std::cout);
      const std::filesystem::path dir(refine_out.empty() ? cfg.out_dir : refine_out);
      std::filesystem::create_directories(dir);
      std::ofstream csv(dir / "refine.csv", std::ios::binary);
      wchj::write_refine_csv(csv, table);
      return 0;
    }
    const wchj::CoupledSystem sys = wchj::build_system(cfg);
    const wchj::ValidationReport report = wchj::validate_system(sys, cfg.validate_samples);
    std::cout << report.summary();
    if (!report.passed()) return 1;
    const wchj::TorusGrid grid = wchj::build_grid(cfg);
    const wchj::InitialData phi = wchj::build_initial(cfg, grid);
    const wchj::OperatorConfig op = wchj::build_operator(cfg, grid, phi);
    std::cout << "config ok: v_max=" << op.v_max << ", segment slices=" << op.max_segment_slices << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
}
