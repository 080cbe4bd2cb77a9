#include "wchj/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "wchj/legendre.hpp"
#include "wchj/sampling.hpp"

namespace wchj {

namespace {

constexpr int kKappaTerms = 30;
constexpr double kCalibrationTolerance = 1e-9;

double safe_ratio(double measured, double bound) {
  if (bound > 0.0) return measured / bound;
  return measured > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

struct SampledSup {
  double value = 0.0;
  double gradient = 0.0;
};

/// sup |P_i| and sup |d_x P_i| over M x [-q, q]^m from a fixed Halton design.
class CouplingSampler {
 public:
  CouplingSampler(const CoupledSystem& sys, int samples) : sys_(sys) {
    const int dims = sys.dim + sys.m;
    for (int s = 1; s <= samples; ++s) {
      std::vector<double> row(dims);
      for (int d = 0; d < dims; ++d) row[d] = halton(static_cast<std::uint64_t>(s), kHaltonBases[d]);
      for (int d = sys.dim; d < dims; ++d) row[d] = 2.0 * row[d] - 1.0;
      design_.push_back(std::move(row));
    }
    // Corners of the u-cube at the first few sampled points.
    const int corners = 1 << sys.m;
    for (int s = 0; s < std::min(samples, 64); ++s)
      for (int c = 0; c < corners; ++c) {
        std::vector<double> row = design_[s];
        for (int j = 0; j < sys.m; ++j) row[sys.dim + j] = (c >> j) & 1 ? 1.0 : -1.0;
        design_.push_back(std::move(row));
      }
  }

  SampledSup operator()(double q) {
    if (auto it = cache_.find(q); it != cache_.end()) return it->second;
    SampledSup out;
    bool all_zero = true;
    for (const auto& c : sys_.coupling) all_zero = all_zero && c.identically_zero;
    if (!all_zero) {
      std::vector<double> u(sys_.m);
      for (const auto& row : design_) {
        const Point x{row[0], sys_.dim == 2 ? row[1] : 0.0};
        for (int j = 0; j < sys_.m; ++j) u[j] = q * row[sys_.dim + j];
        for (int i = 0; i < sys_.m; ++i) {
          if (sys_.coupling[i].identically_zero) continue;
          out.value = std::max(out.value, std::abs(sys_.coupling_value(i, x, u)));
          out.gradient = std::max(out.gradient, norm(sys_.coupling_grad_x(i, x, u)));
        }
      }
    }
    cache_[q] = out;
    return out;
  }

 private:
  const CoupledSystem& sys_;
  std::vector<std::vector<double>> design_;
  std::map<double, SampledSup> cache_;
};

/// Cell offsets d with 0 < |d| dx <= max_dist, one per unordered pair.
std::vector<std::array<int, 2>> pair_offsets(const TorusGrid& g, double max_dist) {
  const int n = g.points_per_axis();
  const int half = n / 2;
  const int r = std::min(half, static_cast<int>(std::floor(max_dist / g.dx() + 1e-9)));
  std::vector<std::array<int, 2>> out;
  for (int d0 = 0; d0 <= r; ++d0)
    for (int d1 = (g.dim() == 2 ? -r : 0); d1 <= (g.dim() == 2 ? r : 0); ++d1) {
      if (d0 == 0 && d1 <= 0) continue;
      const double len = std::hypot(static_cast<double>(d0), static_cast<double>(d1)) * g.dx();
      if (len > max_dist + 1e-12) continue;
      out.push_back({d0, d1});
    }
  return out;
}

/// max over pairs of ||u(x) - u(y)||_max / |x - y|^exponent on slice k.
double pair_constant(const VectorField& u, int k, const std::vector<std::array<int, 2>>& offsets, double exponent) {
  const TorusGrid& g = u.grid();
  double worst = 0.0;
  for (const auto& d : offsets) {
    const Point disp{d[0] * g.dx(), d[1] * g.dx()};
    const double len = g.distance(Point{0.0, 0.0}, disp);
    const double scale = std::pow(len, exponent);
    for (std::size_t p = 0; p < g.num_points(); ++p) {
      const auto idx = g.index(p);
      const std::size_t q = g.flat(idx[0] + d[0], idx[1] + d[1]);
      double diff = 0.0;
      for (int i = 0; i < u.components(); ++i) diff = std::max(diff, std::abs(u.at(i, k, p) - u.at(i, k, q)));
      worst = std::max(worst, diff / scale);
    }
  }
  return worst;
}

double second_difference(const VectorField& u, int i, int k, std::size_t p, int axis) {
  const TorusGrid& g = u.grid();
  const auto idx = g.index(p);
  const int e0 = axis == 0 ? 1 : 0;
  const int e1 = axis == 1 ? 1 : 0;
  return u.at(i, k, g.flat(idx[0] + e0, idx[1] + e1)) + u.at(i, k, g.flat(idx[0] - e0, idx[1] - e1)) -
         2.0 * u.at(i, k, p);
}

Point central_gradient_x(const VectorField& u, int i, int k, std::size_t p) {
  const TorusGrid& g = u.grid();
  const auto idx = g.index(p);
  Point grad{};
  grad[0] = (u.at(i, k, g.flat(idx[0] + 1, idx[1])) - u.at(i, k, g.flat(idx[0] - 1, idx[1]))) / (2.0 * g.dx());
  if (g.dim() == 2)
    grad[1] = (u.at(i, k, g.flat(idx[0], idx[1] + 1)) - u.at(i, k, g.flat(idx[0], idx[1] - 1))) / (2.0 * g.dx());
  return grad;
}

}  // namespace

// ---------------------------------------------------------------------------
// Ledger arithmetic

double kappa_one(double C, double B1, double F1) { return 2.0 * B1 + C * (F1 + std::sqrt(2.0 * (F1 + 1.0))); }

double kappa_next(double kappa_n, double C, double F1, double sigma1) {
  return 0.5 * kappa_n + C * (F1 + std::sqrt(2.0 * (F1 + 1.0))) + 0.5 * sigma1;
}

double kappa_infinity(double C, double F1, double sigma1) {
  return 2.0 * (C * (F1 + std::sqrt(2.0 * (F1 + 1.0))) + 0.5 * sigma1);
}

double holder_exponent(int n) { return 1.0 - std::ldexp(1.0, -n); }

double t_theta(double theta) { return std::min(1.0, 1.0 / (16.0 * theta * theta)); }

int ConstantLedger::horizon_index(double t) const {
  const int last = static_cast<int>(Q.size()) - 1;
  const int k = static_cast<int>(std::ceil(t / dt - 1e-9));
  return std::clamp(k, 0, last);
}

double ConstantLedger::kappa_n(int n) const {
  if (n < 1 || n > static_cast<int>(kappa.size())) throw std::out_of_range("kappa order out of range");
  return kappa[n - 1];
}

double ConstantLedger::kappa_t(double t) const {
  const double h = std::min(t + 1.0 - t_theta, t_final);
  return kappa_infinity(C, F_at(h), sigma_at(h));
}

double ConstantLedger::lipschitz_bound(double t) const {
  if (!(t > 0.0)) return std::numeric_limits<double>::infinity();
  if (t <= t_theta) return kappa_inf / std::sqrt(t);
  return kappa_t(t) / std::sqrt(t_theta);
}

ConstantLedger build_ledger(const CoupledSystem& sys, const VectorField& u, int samples) {
  sys.check_shape();
  const TorusGrid& g = u.grid();
  ConstantLedger L;
  L.a = sys.a;
  L.A = sys.A;
  L.theta = sys.theta;
  L.C = sys.A / sys.a;
  L.t_theta = t_theta(sys.theta);
  L.dt = g.dt();
  L.t_final = g.t_final();
  L.reference_horizon = std::min(1.0, g.t_final());

  CouplingSampler sampler(sys, samples);
  double q = 0.0;
  double b = 0.0;
  double s = 0.0;
  for (int k = 0; k <= g.n_t(); ++k) {
    q = std::max(q, sup_norm(u, {k, k}));
    const SampledSup sup = sampler(q);
    L.Q.push_back(q);
    L.B_sampled.push_back(sup.value);
    L.sigma_sampled.push_back(sup.gradient);
    b = std::max(b, L.inflation * sup.value);
    s = std::max(s, L.inflation * sup.gradient);
    L.B.push_back(b);
    L.sigma.push_back(s);
    L.F.push_back(2.0 * q + g.time(k) * b);
  }
  const int ref = L.horizon_index(L.reference_horizon);
  L.B1 = L.B[ref];
  L.F1 = L.F[ref];
  L.sigma1 = L.sigma[ref];
  L.kappa.push_back(kappa_one(L.C, L.B1, L.F1));
  for (int n = 1; n < kKappaTerms; ++n) L.kappa.push_back(kappa_next(L.kappa.back(), L.C, L.F1, L.sigma1));
  L.kappa_inf = kappa_infinity(L.C, L.F1, L.sigma1);
  return L;
}

// ---------------------------------------------------------------------------
// Reports

void AuditReport::add(AuditRow row) {
  row.ratio = safe_ratio(row.measured, row.bound);
  passed = passed && row.pass;
  worst_ratio = std::max(worst_ratio, row.ratio);
  rows.push_back(std::move(row));
}

AuditReport holder_audit(const VectorField& u, const ConstantLedger& ledger, int n) {
  const TorusGrid& g = u.grid();
  AuditReport rep;
  rep.name = "holder_n" + std::to_string(n);
  const double alpha = holder_exponent(n);
  const double kappa = ledger.kappa_n(n);
  int eligible = 0;
  int empty = 0;
  for (int k = 1; k <= g.n_t(); ++k) {
    const double t = g.time(k);
    if (!(t < ledger.t_theta)) break;
    ++eligible;
    const auto offsets = pair_offsets(g, t);
    if (offsets.empty()) {
      ++empty;
      continue;
    }
    const double measured = pair_constant(u, k, offsets, alpha);
    const double bound = kappa / std::sqrt(t);
    rep.add({rep.name, k, t, measured, bound, 0.0, measured <= bound * (1.0 + 1e-6)});
  }
  if (eligible == 0) throw std::invalid_argument("t_Θ below first slice; refine dt or reduce Θ");
  rep.notes.push_back("kappa_" + std::to_string(n) + " = " + fmt(kappa) + ", alpha = " + fmt(alpha));
  if (empty > 0) rep.notes.push_back(std::to_string(empty) + " slice(s) with t_k < dx have no eligible pairs");
  return rep;
}

AuditReport lipschitz_audit(const VectorField& u, const ConstantLedger& ledger) {
  const TorusGrid& g = u.grid();
  AuditReport rep;
  rep.name = "lipschitz";

  // Every pair in 1D; in 2D the search radius shrinks to keep the scan affordable.
  double radius = 0.5 * std::sqrt(static_cast<double>(g.dim()));
  if (g.dim() == 2) {
    const double budget = 4e8 / (static_cast<double>(g.num_points()) * g.n_t());
    const double cells = std::sqrt(2.0 * budget / 3.14159);
    if (cells * g.dx() < radius) {
      radius = std::max(1.0, std::floor(cells)) * g.dx();
      rep.notes.push_back("2D pair search limited to |x - y| <= " + fmt(radius));
    }
  }
  const auto offsets = pair_offsets(g, radius);
  for (int k = 1; k <= g.n_t(); ++k) {
    const double t = g.time(k);
    const double measured = pair_constant(u, k, offsets, 1.0);
    const double bound = ledger.lipschitz_bound(t);
    rep.add({"lipschitz_x", k, t, measured, bound, 0.0, measured <= bound});
  }

  // t-direction: u(x,tau) - u(x,t) <= B_tau (tau - t) and
  // u(x,t) - u(x,tau) <= (B_tau + kappa~_tau c)(tau - t), c = kappa~/a' + sqrt(2 B_tau / a').
  const double a_lower = 1.0 / (4.0 * ledger.A);
  for (int k2 = 2; k2 <= g.n_t(); ++k2) {
    const double tau = g.time(k2);
    double up = 0.0;
    double down = 0.0;
    for (int k1 = 1; k1 < k2; ++k1) {
      const double gap = tau - g.time(k1);
      for (int i = 0; i < u.components(); ++i) {
        const auto s1 = u.slice(i, k1);
        const auto s2 = u.slice(i, k2);
        for (std::size_t p = 0; p < g.num_points(); ++p) {
          const double d = (s2[p] - s1[p]) / gap;
          up = std::max(up, d);
          down = std::max(down, -d);
        }
      }
    }
    const double B = ledger.B_at(tau);
    const double kt = ledger.lipschitz_bound(tau);
    const double c = kt / a_lower + std::sqrt(2.0 * B / a_lower);
    const double lower = B + kt * c;
    rep.add({"lipschitz_t_upper", k2, tau, up, B, 0.0, up <= B + 1e-9});
    rep.add({"lipschitz_t_lower", k2, tau, down, lower, 0.0, down <= lower});
  }
  rep.notes.push_back("kappa_inf = " + fmt(ledger.kappa_inf) + ", t_theta = " + fmt(ledger.t_theta) +
                      ", B and sigma inflated by " + fmt(ledger.inflation));
  return rep;
}

std::vector<double> pde_residual(const CoupledSystem& sys, const VectorField& u) {
  const TorusGrid& g = u.grid();
  if (g.n_t() < 3) throw std::invalid_argument("PDE residual needs n_t >= 3");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(u.components()) * (g.n_t() - 1) * g.num_points());
  for (int i = 0; i < u.components(); ++i)
    for (int k = 1; k < g.n_t(); ++k)
      for (std::size_t p = 0; p < g.num_points(); ++p) {
        const Point x = g.position(p);
        const double ut = (u.at(i, k + 1, p) - u.at(i, k - 1, p)) / (2.0 * g.dt());
        const Point ux = central_gradient_x(u, i, k, p);
        const auto state = u.state(k, p);
        out.push_back(std::abs(ut + hamiltonian(sys, i, x, ux, state)));
      }
  return out;
}

ResidualSummary summarize_residual(std::vector<double> r) {
  ResidualSummary s;
  s.count = r.size();
  if (r.empty()) return s;
  std::sort(r.begin(), r.end());
  const std::size_t n = r.size();
  s.median = n % 2 ? r[n / 2] : 0.5 * (r[n / 2 - 1] + r[n / 2]);
  s.p90 = r[std::min(n - 1, static_cast<std::size_t>(std::ceil(0.9 * n)) - 1)];
  s.max = r.back();
  return s;
}

DualityCheck curve_regularity(const CoupledSystem& sys, const MinimizingCurve& curve, const VectorField& u,
                              const ConstantLedger& ledger) {
  const TorusGrid& g = u.grid();
  const int i = curve.component;
  const int k = curve.end_slice;
  const std::size_t p = curve.end_point;
  DualityCheck d;
  d.tolerance = 10.0 * (g.dx() + g.dt());
  d.late_speed = curve.max_speed_late();
  if (k == 0) return d;
  for (int axis = 0; axis < g.dim(); ++axis)
    d.second_difference = std::max(d.second_difference, std::abs(second_difference(u, i, k, p, axis)));
  d.threshold = 10.0 * ledger.lipschitz_bound(g.time(k)) * g.dx() * g.dx();
  d.differentiable = d.second_difference <= d.threshold;

  const Point x = g.position(p);
  const auto state = u.state(k, p);
  d.velocity = curve.velocities.back();
  d.momentum = central_gradient_x(u, i, k, p);
  const double pv = dot(d.momentum, d.velocity);
  d.fenchel_defect =
      std::abs(pv - lagrangian(sys, i, x, d.velocity, state) - hamiltonian(sys, i, x, d.momentum, state));
  d.gradient_defect = norm(d.velocity - hamiltonian_grad_p(sys, i, x, d.momentum, state));
  return d;
}

AuditReport curve_regularity_audit(const CoupledSystem& sys, const std::vector<MinimizingCurve>& curves,
                                   const VectorField& u, const ConstantLedger& ledger) {
  const TorusGrid& g = u.grid();
  AuditReport rep;
  rep.name = "duality";
  int smooth = 0;
  double worst_gradient = 0.0;
  double late_speed = 0.0;
  for (const auto& c : curves) {
    const DualityCheck d = curve_regularity(sys, c, u, ledger);
    late_speed = std::max(late_speed, d.late_speed);
    if (!d.differentiable) continue;
    ++smooth;
    worst_gradient = std::max(worst_gradient, d.gradient_defect);
    rep.add({"duality", c.end_slice, g.time(c.end_slice), d.fenchel_defect, d.tolerance, 0.0,
             d.fenchel_defect <= d.tolerance});
  }
  rep.notes.push_back(std::to_string(smooth) + " of " + std::to_string(curves.size()) +
                      " end points differentiable; " + std::to_string(curves.size() - smooth) + " skipped (kink)");
  rep.notes.push_back("max |V - dH/dp| at differentiable end points = " + fmt(worst_gradient));
  rep.notes.push_back("max speed on [t/2, t] = " + fmt(late_speed));
  return rep;
}

AuditReport calibration_equality_audit(const LaxOleinikOperator& op, const VectorField& value,
                                       const VectorField& u_in, int k, std::vector<MinimizingCurve>* curves) {
  const TorusGrid& g = op.grid();
  AuditReport rep;
  rep.name = "calibration_equality";
  rep.hard = true;
  std::vector<std::size_t> xs(g.num_points());
  for (std::size_t p = 0; p < xs.size(); ++p) xs[p] = p;
  std::size_t pairs = 0;
  for (int i = 0; i < op.system().m; ++i) {
    auto traced = op.backtrack(value, u_in, i, xs, k);
    double worst = 0.0;
    for (const auto& c : traced) {
      // tail[j] = recomputed action from knot j to the end point
      std::vector<double> tail;
      for (int ks : c.knot_slices) tail.push_back(curve_action(op.system(), g, c, u_in, op.config(), ks));
      const std::size_t n = c.knot_slices.size();
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
          const double rise = value.at(i, c.knot_slices[b], c.knot_points[b]) -
                              value.at(i, c.knot_slices[a], c.knot_points[a]);
          worst = std::max(worst, std::abs(rise - (tail[a] - tail[b])));
          ++pairs;
        }
    }
    rep.add({"calibration_equality", k, g.time(k), worst, kCalibrationTolerance, 0.0, worst <= kCalibrationTolerance});
    if (curves) std::move(traced.begin(), traced.end(), std::back_inserter(*curves));
  }
  rep.notes.push_back(std::to_string(pairs) + " knot pairs checked");
  return rep;
}

AuditReport calibration_inequality_audit(const LaxOleinikOperator& op, const VectorField& value,
                                         const VectorField& u_in, int trials, std::uint64_t seed) {
  const TorusGrid& g = op.grid();
  const int S = op.config().max_segment_slices;
  AuditReport rep;
  rep.name = "calibration_inequality";
  std::mt19937_64 rng(seed);
  auto uniform_int = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::bernoulli_distribution stop(0.3);
  double worst = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < trials; ++trial) {
    MinimizingCurve c;
    c.component = uniform_int(0, op.system().m - 1);
    const int k1 = uniform_int(0, g.n_t() - 1);
    const std::size_t start = static_cast<std::size_t>(uniform_int(0, static_cast<int>(g.num_points()) - 1));
    c.nodes.assign(g.n_t() + 1, g.position(start));
    c.velocities.assign(g.n_t(), Point{});
    std::size_t cur = start;
    int k = k1;
    do {
      const int s = uniform_int(1, std::min(S, g.n_t() - k));
      const auto& offs = op.offsets(s);
      const auto& o = offs[static_cast<std::size_t>(uniform_int(0, static_cast<int>(offs.size()) - 1))];
      const auto idx = g.index(cur);
      for (int j = 0; j < s; ++j) {
        Point node{(idx[0] + static_cast<double>(j * o.d[0]) / s) * g.dx(),
                   (idx[1] + static_cast<double>(j * o.d[1]) / s) * g.dx()};
        if (g.dim() == 1) node[1] = 0.0;
        c.nodes[k + j] = g.wrap_point(node);
        c.velocities[k + j] = o.velocity;
      }
      cur = g.flat(idx[0] + o.d[0], idx[1] + o.d[1]);
      k += s;
      c.nodes[k] = g.position(cur);
    } while (k < g.n_t() && !stop(rng));
    c.end_slice = k;
    c.end_point = cur;
    c.nodes.resize(k + 1);
    c.velocities.resize(k);
    const double action = curve_action(op.system(), g, c, u_in, op.config(), k1);
    const double rise = value.at(c.component, k, cur) - value.at(c.component, k1, start);
    worst = std::min(worst, action - rise);
  }
  const double slack = trials > 0 ? worst : 0.0;
  rep.add({"calibration_inequality", g.n_t(), g.t_final(), std::max(0.0, -slack), kCalibrationTolerance, 0.0,
           slack >= -kCalibrationTolerance});
  rep.notes.push_back(std::to_string(trials) + " random curves, smallest slack " + fmt(slack));
  return rep;
}

double semiconcavity_constant(const VectorField& u, double t_theta_value) {
  const TorusGrid& g = u.grid();
  double K = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < u.components(); ++i)
    for (int k = 0; k <= g.n_t(); ++k) {
      if (g.time(k) < 0.5 * t_theta_value) continue;
      for (std::size_t p = 0; p < g.num_points(); ++p)
        for (int axis = 0; axis < g.dim(); ++axis)
          K = std::max(K, second_difference(u, i, k, p, axis) / (g.dx() * g.dx()));
    }
  return K;
}

void write_audit_csv(std::ostream& out, const std::vector<AuditReport>& reports) {
  out << "audit,k,t,measured,bound,ratio,pass\n";
  for (const auto& rep : reports)
    for (const auto& r : rep.rows)
      out << r.audit << ',' << r.k << ',' << format_real(r.t) << ',' << format_real(r.measured) << ','
          << format_real(r.bound) << ',' << format_real(r.ratio) << ',' << (r.pass ? 1 : 0) << '\n';
}

void write_audit_summary(std::ostream& out, const std::vector<AuditReport>& reports) {
  for (const auto& rep : reports) {
    const char* status = rep.skipped ? "SKIPPED" : rep.rows.empty() ? "INFO" : (rep.passed ? "PASS" : "FAIL");
    out << rep.name << ": " << status << (rep.hard ? " (hard)" : " (report)");
    if (!rep.rows.empty()) out << ", worst ratio " << fmt(rep.worst_ratio);
    out << '\n';
    for (const auto& n : rep.notes) out << "  " << n << '\n';
  }
}

}  // namespace wchj
