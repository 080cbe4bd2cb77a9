#include "wchj/config.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "wchj/legendre.hpp"

namespace wchj {

namespace {

struct Entry {
  std::string value;
  int line = 0;
};

using Section = std::map<std::string, Entry>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Splits "name_<n>" into name and n; n = 0 when absent or malformed.
std::pair<std::string, int> indexed_key(const std::string& key) {
  const auto us = key.rfind('_');
  if (us == std::string::npos || us + 1 == key.size()) return {key, 0};
  const std::string digits = key.substr(us + 1);
  if (digits.find_first_not_of("0123456789") != std::string::npos) return {key, 0};
  return {key.substr(0, us), std::atoi(digits.c_str())};
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"system", {"m", "dim", "a", "A", "theta", "kinetic", "coefficient_*", "h_*", "coupling_*"}},
      {"grid", {"n_x", "t_final", "n_t"}},
      {"operator", {"v_max", "segment_slices", "quadrature", "tol", "max_iter"}},
      {"initial", {"phi_*", "csv"}},
      {"run", {"audit", "out", "seed", "validate_samples", "oracle", "oracle_tol", "memory_cap_mb"}},
  };
  return keys;
}

class Reader {
 public:
  Reader(std::map<std::string, Section> sections, std::vector<std::string>& errors)
      : sections_(std::move(sections)), errors_(errors) {}

  const Entry* find(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    auto e = s->second.find(key);
    return e == s->second.end() ? nullptr : &e->second;
  }

  void real(const std::string& section, const std::string& key, double& out, bool required) {
    const Entry* e = find(section, key);
    if (!e) {
      if (required) errors_.push_back("missing [" + section + "] " + key);
      return;
    }
    char* end = nullptr;
    const double v = std::strtod(e->value.c_str(), &end);
    if (e->value.empty() || *end != '\0' || !std::isfinite(v)) {
      errors_.push_back("line " + std::to_string(e->line) + ": " + key + ": '" + e->value + "' is not a finite number");
      return;
    }
    out = v;
  }

  template <class Int>
  void integer(const std::string& section, const std::string& key, Int& out, bool required) {
    const Entry* e = find(section, key);
    if (!e) {
      if (required) errors_.push_back("missing [" + section + "] " + key);
      return;
    }
    char* end = nullptr;
    const long long v = std::strtoll(e->value.c_str(), &end, 10);
    if (e->value.empty() || *end != '\0' || v < 0) {
      errors_.push_back("line " + std::to_string(e->line) + ": " + key + ": '" + e->value +
                        "' is not a non-negative integer");
      return;
    }
    out = static_cast<Int>(v);
  }

  void text(const std::string& section, const std::string& key, std::string& out) {
    if (const Entry* e = find(section, key)) out = e->value;
  }

  /// Collects key_1..key_n, reporting gaps and indices beyond n.
  std::vector<std::string> series(const std::string& section, const std::string& key, int n, bool required) {
    std::vector<std::string> out;
    auto s = sections_.find(section);
    if (s != sections_.end())
      for (const auto& [k, e] : s->second) {
        auto [name, idx] = indexed_key(k);
        if (name == key && (idx < 1 || idx > n))
          errors_.push_back("line " + std::to_string(e.line) + ": " + k + " exceeds m = " + std::to_string(n));
      }
    bool any = false;
    for (int i = 1; i <= n; ++i) any = any || find(section, key + "_" + std::to_string(i));
    if (!any && !required) return out;
    for (int i = 1; i <= n; ++i) {
      const Entry* e = find(section, key + "_" + std::to_string(i));
      if (!e) {
        errors_.push_back("missing [" + section + "] " + key + "_" + std::to_string(i));
        out.emplace_back();
      } else {
        out.push_back(e->value);
      }
    }
    return out;
  }

  void expression(const std::string& section, const std::string& key, const std::string& source,
                  const ExpressionScope& scope) {
    if (source.empty()) return;
    try {
      Expression::parse(source, scope);
    } catch (const ExpressionError& ex) {
      const Entry* e = find(section, key);
      errors_.push_back((e ? "line " + std::to_string(e->line) + ": " : std::string()) + key + ": " + ex.what());
    }
  }

 private:
  std::map<std::string, Section> sections_;
  std::vector<std::string>& errors_;
};

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out = "invalid config:";
  for (const auto& e : errors) out += "\n  " + e;
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return m == o.m && dim == o.dim && a == o.a && A == o.A && theta == o.theta && kinetic == o.kinetic &&
         kinetic_expr == o.kinetic_expr && coupling_expr == o.coupling_expr && n_x == o.n_x &&
         t_final == o.t_final && n_t == o.n_t && v_max == o.v_max && segment_slices == o.segment_slices &&
         quadrature == o.quadrature && tol == o.tol && max_iter == o.max_iter && phi_expr == o.phi_expr &&
         phi_csv == o.phi_csv && audits == o.audits && out_dir == o.out_dir && seed == o.seed &&
         validate_samples == o.validate_samples && oracle_csv == o.oracle_csv && oracle_tol == o.oracle_tol &&
         memory_cap_mb == o.memory_cap_mb;
}

std::string ExperimentConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& base_dir) {
  std::vector<std::string> errors;
  std::map<std::string, Section> sections;
  std::string current;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  const auto& known = known_keys();
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    const std::string where = "line " + std::to_string(line) + ": ";
    if (s.front() == '[') {
      if (s.back() != ']') {
        errors.push_back(where + "malformed section header '" + s + "'");
        continue;
      }
      current = trim(s.substr(1, s.size() - 2));
      if (!known.count(current)) errors.push_back(where + "unknown section [" + current + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      errors.push_back(where + "expected key = value");
      continue;
    }
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (current.empty()) {
      errors.push_back(where + "key '" + key + "' outside any section");
      continue;
    }
    auto sec = known.find(current);
    if (sec == known.end()) continue;
    auto [name, idx] = indexed_key(key);
    const bool ok = sec->second.count(key) || (idx > 0 && sec->second.count(name + "_*"));
    if (!ok) {
      errors.push_back(where + "unknown key '" + key + "' in [" + current + "]");
      continue;
    }
    if (sections[current].count(key)) {
      errors.push_back(where + "duplicate key '" + key + "'");
      continue;
    }
    sections[current][key] = {value, line};
  }

  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  Reader r(std::move(sections), errors);

  r.integer("system", "m", cfg.m, true);
  r.integer("system", "dim", cfg.dim, false);
  r.real("system", "a", cfg.a, true);
  r.real("system", "A", cfg.A, true);
  r.real("system", "theta", cfg.theta, true);
  r.text("system", "kinetic", cfg.kinetic);
  if (cfg.m < 1) errors.push_back("m must be at least 1");
  if (cfg.dim != 1 && cfg.dim != 2) errors.push_back("dim must be 1 or 2");
  if (!(0.0 < cfg.a && cfg.a < 1.0 && 1.0 < cfg.A))
    errors.push_back("assumption (A) requires 0<a<1<A (got a=" + format_real(cfg.a) + ", A=" + format_real(cfg.A) + ")");
  if (!(cfg.theta > 0.0)) errors.push_back("theta must be positive");
  const int m = std::max(cfg.m, 1);
  const int dim = (cfg.dim == 2) ? 2 : 1;

  if (cfg.kinetic == "quadratic") {
    cfg.kinetic_expr = r.series("system", "coefficient", m, true);
    if (r.find("system", "h_1")) errors.push_back("h_i keys need kinetic = general");
    for (int i = 0; i < static_cast<int>(cfg.kinetic_expr.size()); ++i)
      r.expression("system", "coefficient_" + std::to_string(i + 1), cfg.kinetic_expr[i], {0, dim, false});
  } else if (cfg.kinetic == "general") {
    cfg.kinetic_expr = r.series("system", "h", m, true);
    if (r.find("system", "coefficient_1")) errors.push_back("coefficient_i keys need kinetic = quadratic");
    for (int i = 0; i < static_cast<int>(cfg.kinetic_expr.size()); ++i)
      r.expression("system", "h_" + std::to_string(i + 1), cfg.kinetic_expr[i], {0, dim, true});
  } else {
    const Entry* e = r.find("system", "kinetic");
    errors.push_back((e ? "line " + std::to_string(e->line) + ": " : std::string()) + "kinetic must be quadratic or general");
  }
  cfg.coupling_expr = r.series("system", "coupling", m, true);
  for (int i = 0; i < static_cast<int>(cfg.coupling_expr.size()); ++i)
    r.expression("system", "coupling_" + std::to_string(i + 1), cfg.coupling_expr[i], {m, dim, false});

  r.integer("grid", "n_x", cfg.n_x, true);
  r.real("grid", "t_final", cfg.t_final, true);
  r.integer("grid", "n_t", cfg.n_t, true);
  if (r.find("grid", "n_x") && cfg.n_x < 8) errors.push_back("n_x must be at least 8");
  if (r.find("grid", "n_t") && cfg.n_t < 1) errors.push_back("n_t must be at least 1");
  if (r.find("grid", "t_final") && !(cfg.t_final > 0.0)) errors.push_back("t_final must be positive");

  r.real("operator", "v_max", cfg.v_max, false);
  r.integer("operator", "segment_slices", cfg.segment_slices, false);
  std::string quad = "left_endpoint";
  r.text("operator", "quadrature", quad);
  if (quad == "left_endpoint") cfg.quadrature = Quadrature::left_endpoint;
  else if (quad == "midpoint") cfg.quadrature = Quadrature::midpoint;
  else errors.push_back("quadrature must be left_endpoint or midpoint");
  r.real("operator", "tol", cfg.tol, false);
  r.integer("operator", "max_iter", cfg.max_iter, false);
  if (cfg.v_max < 0.0) errors.push_back("v_max must be positive (or 0 for the default)");
  if (!(cfg.tol > 0.0)) errors.push_back("tol must be positive");
  if (cfg.max_iter < 1) errors.push_back("max_iter must be at least 1");

  r.text("initial", "csv", cfg.phi_csv);
  cfg.phi_expr = r.series("initial", "phi", m, cfg.phi_csv.empty());
  if (!cfg.phi_csv.empty() && !cfg.phi_expr.empty()) errors.push_back("[initial] takes either csv or phi_i, not both");
  for (int i = 0; i < static_cast<int>(cfg.phi_expr.size()); ++i)
    r.expression("initial", "phi_" + std::to_string(i + 1), cfg.phi_expr[i], {0, dim, false});
  if (!cfg.phi_csv.empty() && !std::filesystem::exists(cfg.resolve(cfg.phi_csv)))
    errors.push_back("initial data file not found: " + cfg.resolve(cfg.phi_csv));

  r.text("run", "audit", cfg.audits);
  r.text("run", "out", cfg.out_dir);
  r.integer("run", "seed", cfg.seed, false);
  r.integer("run", "validate_samples", cfg.validate_samples, false);
  r.text("run", "oracle", cfg.oracle_csv);
  r.real("run", "oracle_tol", cfg.oracle_tol, false);
  r.real("run", "memory_cap_mb", cfg.memory_cap_mb, false);
  if (!cfg.oracle_csv.empty() && !std::filesystem::exists(cfg.resolve(cfg.oracle_csv)))
    errors.push_back("oracle file not found: " + cfg.resolve(cfg.oracle_csv));
  if (cfg.validate_samples < 1) errors.push_back("validate_samples must be at least 1");

  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config " + path});
  std::stringstream buf;
  buf << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_config_text(buf.str(), dir.empty() ? "." : dir.string());
}

std::string emit_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "[system]\n";
  o << "m = " << c.m << "\ndim = " << c.dim << "\na = " << format_real(c.a) << "\nA = " << format_real(c.A)
    << "\ntheta = " << format_real(c.theta) << "\nkinetic = " << c.kinetic << '\n';
  const char* kkey = c.kinetic == "general" ? "h_" : "coefficient_";
  for (std::size_t i = 0; i < c.kinetic_expr.size(); ++i) o << kkey << i + 1 << " = " << c.kinetic_expr[i] << '\n';
  for (std::size_t i = 0; i < c.coupling_expr.size(); ++i)
    o << "coupling_" << i + 1 << " = " << c.coupling_expr[i] << '\n';
  o << "\n[grid]\nn_x = " << c.n_x << "\nt_final = " << format_real(c.t_final) << "\nn_t = " << c.n_t << '\n';
  o << "\n[operator]\nv_max = " << format_real(c.v_max) << "\nsegment_slices = " << c.segment_slices
    << "\nquadrature = " << (c.quadrature == Quadrature::midpoint ? "midpoint" : "left_endpoint")
    << "\ntol = " << format_real(c.tol) << "\nmax_iter = " << c.max_iter << '\n';
  o << "\n[initial]\n";
  if (!c.phi_csv.empty()) o << "csv = " << c.phi_csv << '\n';
  for (std::size_t i = 0; i < c.phi_expr.size(); ++i) o << "phi_" << i + 1 << " = " << c.phi_expr[i] << '\n';
  o << "\n[run]\naudit = " << c.audits << "\nout = " << c.out_dir << "\nseed = " << c.seed
    << "\nvalidate_samples = " << c.validate_samples << '\n';
  if (!c.oracle_csv.empty()) o << "oracle = " << c.oracle_csv << '\n';
  o << "oracle_tol = " << format_real(c.oracle_tol) << "\nmemory_cap_mb = " << format_real(c.memory_cap_mb) << '\n';
  return o.str();
}

CoupledSystem build_system(const ExperimentConfig& cfg) {
  CoupledSystem sys;
  sys.m = cfg.m;
  sys.dim = cfg.dim;
  sys.a = cfg.a;
  sys.A = cfg.A;
  sys.theta = cfg.theta;
  for (int i = 0; i < cfg.m; ++i) {
    if (cfg.kinetic == "quadratic") {
      const Expression c = Expression::parse(cfg.kinetic_expr[i], {0, cfg.dim, false});
      sys.kinetic.push_back(quadratic_dual([c](const Point& x) { return c({x, {}, {}}); }, !c.uses_x()));
    } else {
      const Expression h = Expression::parse(cfg.kinetic_expr[i], {0, cfg.dim, true});
      DualPair pair = dualize([h](const Point& x, const Point& p) { return h({x, {}, p}); }, cfg.a, cfg.A, cfg.dim);
      pair.x_independent = !h.uses_x();
      sys.kinetic.push_back(std::move(pair));
    }
    const Expression p = Expression::parse(cfg.coupling_expr[i], {cfg.m, cfg.dim, false});
    Coupling c;
    c.value = [p](const Point& x, std::span<const double> u) { return p({x, u, {}}); };
    c.identically_zero = p.is_zero();
    sys.coupling.push_back(std::move(c));
  }
  sys.check_shape();
  return sys;
}

TorusGrid build_grid(const ExperimentConfig& cfg) { return TorusGrid(cfg.dim, cfg.n_x, cfg.t_final, cfg.n_t); }

InitialData build_initial(const ExperimentConfig& cfg, const TorusGrid& grid) {
  if (!cfg.phi_csv.empty()) return read_initial_csv(cfg.resolve(cfg.phi_csv), grid, cfg.m);
  std::vector<Expression> phi;
  for (const auto& src : cfg.phi_expr) phi.push_back(Expression::parse(src, {0, cfg.dim, false}));
  InitialData d = InitialData::sample(grid, cfg.m, [phi](int i, const Point& x) { return phi[i]({x, {}, {}}); });
  d.validate(grid);
  return d;
}

OperatorConfig build_operator(const ExperimentConfig& cfg, const TorusGrid& grid, const InitialData& phi) {
  OperatorConfig op;
  op.v_max = cfg.v_max > 0.0 ? cfg.v_max : OperatorConfig::default_v_max(phi.sup_norm(), cfg.a, grid);
  op.max_segment_slices =
      cfg.segment_slices > 0 ? cfg.segment_slices : OperatorConfig::default_segment_slices(grid, op.v_max);
  op.quadrature = cfg.quadrature;
  op.validate(grid);
  return op;
}

}  // namespace wchj
