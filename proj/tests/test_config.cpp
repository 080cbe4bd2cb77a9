#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wchj/config.hpp"
#include "wchj/experiment.hpp"

using namespace wchj;

namespace {

const char* kMinimal = R"(
[system]
m = 1
a = 0.5
A = 1.05
theta = 1
coefficient_1 = 0.5
coupling_1 = 0

[grid]
n_x = 32
t_final = 0.25
n_t = 16

[initial]
phi_1 = cos(2*pi*x)
)";

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  REQUIRE(at != std::string::npos);
  return text.replace(at, from.size(), to);
}

double eval(const std::string& src, const ExpressionScope& scope, const EvalContext& ctx = {}) {
  return Expression::parse(src, scope)(ctx);
}

}  // namespace

TEST_CASE("expression parser: precedence, functions and variables") {
  const ExpressionScope none;
  CHECK(eval("1 + 2 * 3", none) == 7.0);
  CHECK(eval("(1 + 2) * 3", none) == 9.0);
  CHECK(eval("-2 * -3", none) == 6.0);
  CHECK(eval("8 / 4 / 2", none) == 1.0);
  CHECK(eval("1 - 2 - 3", none) == -4.0);
  CHECK(eval("2.5e-1", none) == 0.25);
  CHECK(eval("cos(2*pi*0)", none) == 1.0);
  CHECK(eval("tanh(0) + exp(0)", none) == 1.0);

  const double u[] = {0.5, -1.5};
  EvalContext ctx;
  ctx.x = Point{0.25, 0.75};
  ctx.u = u;
  ctx.p = Point{2.0, 3.0};
  CHECK(eval("sin(2*pi*x)", {0, 1, false}, ctx) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(eval("u_1 * u_2", {2, 1, false}, ctx) == -0.75);
  CHECK(eval("x + y", {0, 2, false}, ctx) == 1.0);
  CHECK(eval("p_1 * p_2", {0, 2, true}, ctx) == 6.0);
  CHECK(eval("p * p", {0, 1, true}, ctx) == 4.0);
  CHECK_THROWS_AS(Expression::parse("p", {0, 2, true}), ExpressionError);

  CHECK(Expression::parse("0", none).is_zero());
  CHECK(Expression::parse("0 * 3", none).is_zero());
  CHECK_FALSE(Expression::parse("x", {0, 1, false}).is_zero());
  CHECK(Expression::parse("u_1", {1, 1, false}).uses_u());
  CHECK_FALSE(Expression::parse("u_1", {1, 1, false}).uses_x());
}

TEST_CASE("expression parser: errors point at the column") {
  CHECK_THROWS_WITH_AS(Expression::parse("1 + ", {}), doctest::Contains("column"), ExpressionError);
  CHECK_THROWS_AS(Expression::parse("u_3", {2, 1, false}), ExpressionError);
  CHECK_THROWS_AS(Expression::parse("y", {0, 1, false}), ExpressionError);
  CHECK_THROWS_AS(Expression::parse("p", {0, 1, false}), ExpressionError);
  CHECK_THROWS_AS(Expression::parse("foo(1)", {}), ExpressionError);
  CHECK_THROWS_AS(Expression::parse("(1", {}), ExpressionError);
  CHECK_THROWS_WITH(Expression::parse("2 $ 3", {}), doctest::Contains("column 3"));
}

TEST_CASE("minimal decoupled config parses and validates") {
  const ExperimentConfig cfg = parse_config_text(kMinimal);
  CHECK(cfg.m == 1);
  CHECK(cfg.n_x == 32);
  CHECK(cfg.tol == 1e-9);
  const CoupledSystem sys = build_system(cfg);
  CHECK(validate_system(sys, 500).passed());
  const TorusGrid g = build_grid(cfg);
  const InitialData phi = build_initial(cfg, g);
  CHECK(phi.at(0, 0) == 1.0);
  const OperatorConfig op = build_operator(cfg, g, phi);
  CHECK_NOTHROW(op.validate(g));
}

TEST_CASE("a outside (0, 1) is rejected citing 0<a<1<A") {
  try {
    parse_config_text(replace(kMinimal, "a = 0.5", "a = 1.5"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("0<a<1<A") != std::string::npos);
  }
}

TEST_CASE("unknown keys are reported with their line, and every error is collected") {
  const std::string text = replace(replace(kMinimal, "n_t = 16", "n_t = 16\nspeed = 3"), "theta = 1", "theta = -1");
  try {
    parse_config_text(text);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.errors().size() >= 2);
    bool key = false, theta = false;
    for (const auto& msg : e.errors()) {
      key |= msg == "line 14: unknown key 'speed' in [grid]";
      theta |= msg.find("theta") != std::string::npos;
    }
    CHECK(key);
    CHECK(theta);
  }
}

TEST_CASE("missing required keys and bad expressions are errors") {
  CHECK_THROWS_AS(parse_config_text(replace(kMinimal, "n_x = 32", "")), ConfigError);
  CHECK_THROWS_AS(parse_config_text(replace(kMinimal, "coupling_1 = 0", "coupling_1 = u_2")), ConfigError);
  CHECK_THROWS_AS(parse_config_text(replace(kMinimal, "phi_1 = cos(2*pi*x)", "phi_1 = cos(")), ConfigError);
}

TEST_CASE("canonical form round trips") {
  const std::string dir = std::filesystem::path(WCHJ_CONFIG_DIR).string();
  for (const char* name : {"hopf_lax.cfg", "cross_coupling.cfg"}) {
    const ExperimentConfig cfg = parse_config(dir + "/" + name);
    const std::string text = emit_config(cfg);
    const ExperimentConfig again = parse_config_text(text, cfg.base_dir);
    CHECK(again == cfg);
    CHECK(emit_config(again) == text);
  }
  ExperimentConfig odd = parse_config_text(kMinimal);
  odd.t_final = 0.1;  // 0.1 has no short binary form
  odd.tol = 1.0 / 3.0;
  CHECK(parse_config_text(emit_config(odd)) == odd);
}

TEST_CASE("run with NaN initial data exits nonzero naming the row") {
  const auto dir = std::filesystem::temp_directory_path() / "wchj_config_nan";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "phi.csv");
    f << "component,ix,value\n";
    for (int p = 0; p < 32; ++p) f << "1," << p << ',' << (p == 10 ? "nan" : "0.5") << '\n';
  }
  const std::string text = replace(kMinimal, "phi_1 = cos(2*pi*x)", "csv = phi.csv");
  const ExperimentConfig cfg = parse_config_text(text, dir.string());
  RunOptions opts;
  opts.out_dir = (dir / "out").string();
  std::ostringstream log, err;
  CHECK(run_experiment(cfg, opts, log, err) != 0);
  CHECK(err.str().find("row 12") != std::string::npos);
}

TEST_CASE("refine refuses resolutions above the memory cap") {
  ExperimentConfig cfg = parse_config_text(kMinimal);
  cfg.memory_cap_mb = 1e-3;
  std::ostringstream log;
  CHECK_THROWS_WITH_AS(refine(cfg, 2, log), doctest::Contains("memory"), std::runtime_error);
  CHECK(estimate_memory_bytes(cfg, 64, 32) > estimate_memory_bytes(cfg, 32, 16));
}
