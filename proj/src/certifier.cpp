#include <funnel/certifier.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace funnel {

namespace {

ConditionCheck make_check(std::string name, double lhs, std::string op, double rhs) {
  ConditionCheck c;
  c.name = std::move(name);
  c.lhs = lhs;
  c.rhs = rhs;
  c.op = std::move(op);
  if (c.op == "<") {
    c.pass = lhs < rhs;
  } else if (c.op == "<=") {
    c.pass = lhs <= rhs;
  } else if (c.op == ">=") {
    c.pass = lhs >= rhs;
  } else {
    c.pass = lhs > rhs;
  }
  return c;
}

void require_p(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must lie in (0, 1)");
}

std::string format(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

SignalBounds SignalBounds::from(const FunnelSpec& funnel, const ReferenceSignal& reference) {
  SignalBounds s;
  s.psi_sup = funnel.sup();
  s.psi_dot_sup = funnel.derivative_sup();
  s.q = funnel.ratio();
  s.yref_sup = reference.sup_norm();
  s.yref_dot_sup = reference.derivative_sup_norm();
  s.constant_funnel = funnel.kind() == FunnelSpec::Kind::constant;
  return s;
}

std::optional<double> solve_alpha(const AssumptionConstants& c, double a, double psi_sup, double p) {
  require_p(p);
  if (!(a > 0.0) || !(psi_sup > 0.0)) throw std::invalid_argument("solve_alpha needs a > 0 and |psi| > 0");
  if (c.c3 == 0.0) return std::nullopt;
  return p * c.c1 / (c.c3 * a * psi_sup);
}

double implied_p(const AssumptionConstants& c, double a, double alpha, double psi_sup) {
  return c.c3 * a * alpha * psi_sup / c.c1;
}

ConditionCheck check_main_condition_general(const FeasibilityInput& in) {
  require_p(in.p);
  const auto& c = in.constants;
  const auto& s = in.signals;
  const double p = in.p;
  const double lhs = (c.c4 + c.c2 * c.c3 / c.c1) / (1.0 - p) + in.a * p / (1.0 - p) * s.psi_sup +
                     in.a / (1.0 - p) * s.yref_sup + s.yref_dot_sup + s.psi_dot_sup;
  const double rhs = c.c3 > 0.0 ? p * s.q * c.c1 / (2.0 * c.c3) : std::numeric_limits<double>::infinity();
  return make_check("tracking", lhs, "<", rhs);
}

ConditionCheck check_main_condition(const FeasibilityInput& in) {
  require_p(in.p);
  if (!(in.signals.constant_funnel && in.p == 0.5)) return check_main_condition_general(in);
  const auto& c = in.constants;
  const auto& s = in.signals;
  const double lhs = 2.0 * (c.c4 + c.c2 * c.c3 / c.c1) + in.a * (s.psi_sup + 2.0 * s.yref_sup) + s.yref_dot_sup;
  const double rhs = c.c3 > 0.0 ? c.c1 / (4.0 * c.c3) : std::numeric_limits<double>::infinity();
  return make_check("tracking_constant_funnel", lhs, "<", rhs);
}

std::optional<double> kappa(const FeasibilityInput& in) {
  if (!in.alpha) return std::nullopt;
  const auto& c = in.constants;
  const double psi = in.signals.psi_sup;
  const double drive = in.a * *in.alpha * psi;  // a alpha |psi|
  const double denominator = c.c1 - c.c3 * drive;
  if (!(denominator > 0.0)) return std::nullopt;
  return (c.c2 + c.c4 * drive + in.a * drive * (psi + in.signals.yref_sup)) / denominator;
}

ConditionCheck check_v_zero_condition_at(int dim, double a, double alpha, const SignalBounds& s, double p) {
  require_p(p);
  const double psi = s.psi_sup;
  const double lhs = 2.0 * p * dim / ((1.0 - p) * alpha * psi) + a * p / (1.0 - p) * psi +
                     a / (1.0 - p) * s.yref_sup + s.yref_dot_sup + s.psi_dot_sup;
  const double rhs = s.q / 4.0 * a * alpha * psi;
  return make_check("v_zero_tracking", lhs, "<", rhs);
}

VZeroReport check_v_zero_condition(int dim, double a, double alpha, const SignalBounds& s) {
  VZeroReport report;
  bool first = true;
  for (int k = 1; k <= 999; ++k) {
    const double p = k / 1000.0;
    auto check = check_v_zero_condition_at(dim, a, alpha, s, p);
    if (first || check.margin() > report.best.margin()) {
      report.best = check;
      report.best_p = p;
      first = false;
    }
    report.pass = report.pass || check.pass;
  }
  return report;
}

RConditionReport check_R_conditions(double cx, double cy, double radius) {
  if (!(radius > 1.0)) throw std::invalid_argument("extension radius must exceed 1");
  const double r2 = radius * radius;
  const double r4 = r2 * r2;
  const double r6 = r4 * r2;
  const double w = 3.0 * r2 - 1.0;
  RConditionReport r;
  r.applicable = 3.0 * r4 > 7.0;
  r.curvature = make_check("curvature", 2.0 * cx * w, ">=", cy);
  r.bounds_compatible = make_check(
      "bounds_compatible", 52.0 * cx * r6 - 6.0 * (2.0 * cx + cy) * r4 + (28.0 * cx - 12.0) * r2 + 28.0 * cx - 2.0 * cy,
      ">=", 0.0);
  r.minimizer_below_lower = make_check("minimizer_below_lower", 8.0 * r6 * (r2 + 1.0), "<=", w * w * w * w);
  r.gradient_bound_at_lower = make_check(
      "gradient_bound_at_lower",
      4.0 * (r2 + 1.0) * w * w - 8.0 * std::sqrt(8.0) * r2 * radius * std::pow(r2 + 1.0, 1.5) - 16.0 * r2 * (r4 + 1.0),
      "<", 0.0);
  return r;
}

double double_well_a_lower(double cx, double radius) { return 4.0 * cx * (radius * radius + 1.0); }

double double_well_a_upper_dissipativity(double cx, double cy, double radius) {
  const double r2 = radius * radius;
  const double r4 = r2 * r2;
  if (!(3.0 * r4 > 7.0)) throw std::invalid_argument("outer dissipativity bound needs 3 R^4 > 7");
  return (64.0 * cx * r4 * r2 - 6.0 * cy * r4 - 12.0 * r2 - 2.0 * cy) / (3.0 * r4 - 7.0);
}

namespace {

struct GradientQuadratic {
  double B;
  double C;
};

GradientQuadratic gradient_quadratic(double cx, double radius) {
  const double r2 = radius * radius;
  const double w2 = (3.0 * r2 - 1.0) * (3.0 * r2 - 1.0);
  return {4.0 * std::sqrt(8.0 * cx) * r2 * radius * (r2 + 1.0) / w2, 16.0 * cx * r2 * (r2 * r2 + 1.0) / w2};
}

}  // namespace

double double_well_a_upper_gradient(double cx, double radius) {
  const auto [B, C] = gradient_quadratic(cx, radius);
  // C > 0, so the roots have opposite signs.
  const double s = 0.5 * (B + std::sqrt(B * B + 4.0 * C));
  double a = s * s;
  // Land on the satisfied side of the non-strict inequality.
  while (!check_outer_gradient_upper(cx, radius, a).pass) a = std::nextafter(a, 0.0);
  return a;
}

ConditionCheck check_c1_simplification(double cx, double cy, double a) {
  return make_check("c1_simplification", cy, "<=", std::min(1.5 * a, (4.0 * a - 6.0) * cx / a));
}

ConditionCheck check_outer_dissipativity_upper(double cx, double cy, double radius, double a) {
  const double r2 = radius * radius;
  if (!(3.0 * r2 * r2 > 7.0)) return make_check("outer_dissipativity_upper", a, "<=", -std::numeric_limits<double>::infinity());
  return make_check("outer_dissipativity_upper", a, "<=", double_well_a_upper_dissipativity(cx, cy, radius));
}

ConditionCheck check_outer_dissipativity_lower(double cx, double radius, double a) {
  return make_check("outer_dissipativity_lower", a, ">=", double_well_a_lower(cx, radius));
}

ConditionCheck check_outer_gradient_upper(double cx, double radius, double a) {
  const auto [B, C] = gradient_quadratic(cx, radius);
  return make_check("outer_gradient_upper", a - B * std::sqrt(a) - C, "<=", 0.0);
}

ConditionCheck check_double_well_tracking(double cx, double cy, double a, const SignalBounds& s) {
  const double k = std::sqrt(a / (8.0 * cx));
  const double lhs = k * 4.0 * cy * cy / (2.0 * cy + a) +
                     2.0 * std::sqrt(8.0 * cx / a) * (2.0 * cy + 2.0 * a + 8.0 * a * cx - 4.0 * cx) / (4.0 * cy + 2.0 * a) +
                     a * (s.psi_sup + 2.0 * s.yref_sup) + s.yref_dot_sup;
  return make_check("double_well_tracking", lhs, "<", k * (cy + 0.5 * a));
}

namespace {

bool tracking_holds(double cx, double cy, double radius, double a, const SignalBounds& s, double p) {
  if (p == 0.5 && s.constant_funnel) return check_double_well_tracking(cx, cy, a, s).pass;
  FeasibilityInput in;
  in.constants = assumption_constants(PotentialModel::double_well(cx, cy, radius), a);
  in.a = a;
  in.signals = s;
  in.p = p;
  return check_main_condition_general(in).pass;
}

// Bisection on [fail, pass] until the bracket is narrower than tol; returns the passing end.
template <class Pred>
double refine(double fail, double pass, Pred holds, double tol = 1e-3) {
  while (std::abs(pass - fail) > tol) {
    const double mid = 0.5 * (fail + pass);
    (holds(mid) ? pass : fail) = mid;
  }
  return pass;
}

}  // namespace

AdmissibleInterval admissible_interval(double cx, double cy, double radius, const SignalBounds& s, double p) {
  require_p(p);
  AdmissibleInterval out;
  out.r_conditions = check_R_conditions(cx, cy, radius);
  for (const auto& c : out.r_conditions.checks())
    if (!c.pass) out.diagnostics.push_back("radius condition " + c.name + " fails");
  if (!out.r_conditions.applicable) {
    out.diagnostics.push_back("3 R^4 <= 7: outer dissipativity bound undefined");
    return out;
  }

  out.lower_dissipativity = double_well_a_lower(cx, radius);
  out.lower_c1_simplification = std::max(2.0 * cy / 3.0, 4.0 * cx > cy ? 6.0 * cx / (4.0 * cx - cy)
                                                                        : std::numeric_limits<double>::infinity());
  out.upper_dissipativity = double_well_a_upper_dissipativity(cx, cy, radius);
  out.upper_gradient = double_well_a_upper_gradient(cx, radius);

  double lo = std::max(out.lower_dissipativity, out.lower_c1_simplification);
  // Closed-form bounds can miss by an ulp; move inside.
  while (!check_c1_simplification(cx, cy, lo).pass && std::isfinite(lo)) lo = std::nextafter(lo, INFINITY);
  const double hi = std::min(out.upper_dissipativity, out.upper_gradient);
  if (!(lo <= hi)) {
    out.diagnostics.push_back("lower bound " + format(lo) + " exceeds upper bound " + format(hi));
    return out;
  }

  auto holds = [&](double a) { return tracking_holds(cx, cy, radius, a, s, p); };
  constexpr int cells = 1000;
  const double h = (hi - lo) / cells;
  int first = -1;
  int last = -1;
  int runs = 0;
  bool prev = false;
  for (int k = 0; k <= cells; ++k) {
    const double a = k == cells ? hi : lo + k * h;
    const bool ok = holds(a);
    if (ok && !prev) ++runs;
    if (ok && first < 0) first = k;
    if (ok && runs == 1) last = k;
    prev = ok;
  }
  if (first < 0) {
    out.diagnostics.push_back("tracking inequality fails on the whole bracket [" + format(lo) + ", " + format(hi) + "]");
    return out;
  }
  if (runs > 1) out.diagnostics.push_back("tracking inequality holds on several disjoint pieces; reporting the first");

  auto grid = [&](int k) { return k == cells ? hi : lo + k * h; };
  double a_min = grid(first);
  double a_max = grid(last);
  if (first > 0) {
    a_min = refine(grid(first - 1), a_min, holds);
    out.tracking_low = a_min;
  }
  if (last < cells) {
    a_max = refine(grid(last + 1), a_max, holds);
    out.tracking_high = a_max;
  }
  out.empty = false;
  out.a_min = a_min;
  out.a_max = a_max;
  return out;
}

CertificateReport certify(const PotentialModel& potential, const FunnelSpec& funnel, const ReferenceSignal& reference,
                          const CertifyRequest& request) {
  require_p(request.p);
  if (!(request.a > 0.0)) throw std::invalid_argument("control strength a must be positive");
  if (reference.dim() != potential.dim()) throw std::invalid_argument("reference and potential dimensions differ");

  CertificateReport r;
  r.family = potential.family_name();
  r.a = request.a;
  r.p = request.p;
  r.signals = SignalBounds::from(funnel, reference);

  const bool zero = std::holds_alternative<ZeroPotential>(potential.family());
  if (zero) {
    if (!request.alpha) throw std::invalid_argument("the zero potential needs an explicit alpha");
    // c3 is free here; choose it so that the gain balance holds with the configured p.
    auto c = assumption_constants(potential, request.a, 1.0);
    c.c3 = request.p * c.c1 / (request.a * *request.alpha * r.signals.psi_sup);
    r.constants = c;
    r.notes.push_back("zero potential: c3 chosen from the gain balance, c3 = " + format(c.c3));
  } else {
    r.constants = assumption_constants(potential, request.a, request.c3);
  }

  FeasibilityInput in;
  in.constants = r.constants;
  in.a = request.a;
  in.signals = r.signals;
  in.p = request.p;
  r.main_condition = check_main_condition(in);

  if (request.alpha) {
    r.alpha = request.alpha;
  } else {
    r.alpha = solve_alpha(r.constants, request.a, r.signals.psi_sup, request.p);
    r.alpha_solved = r.alpha.has_value();
  }

  bool ok = true;
  if (!r.alpha) {
    r.notes.push_back("c3 = 0: gain balance does not determine alpha");
    ok = false;
  } else {
    const double drive = r.constants.c3 * request.a * *r.alpha * r.signals.psi_sup;
    r.gain_balance = make_check("gain_balance", drive, "<", r.constants.c1);
    r.gain_balance.pass = r.gain_balance.pass && drive > 0.0;
    r.p_effective = implied_p(r.constants, request.a, *r.alpha, r.signals.psi_sup);
    ok = ok && r.gain_balance.pass;
    if (request.alpha && !zero) {
      const double pe = *r.p_effective;
      if (pe > 0.0 && pe < 1.0) {
        FeasibilityInput eff = in;
        eff.p = pe;
        r.main_condition_effective = check_main_condition_general(eff);
        ok = ok && r.main_condition_effective->pass;
      } else {
        r.notes.push_back("alpha implies p = " + format(pe) + " outside (0, 1)");
        ok = false;
      }
    } else {
      ok = ok && r.main_condition.pass;
    }
    in.alpha = r.alpha;
    in.p = *r.p_effective;
    r.kappa = kappa(in);
    if (!r.kappa) {
      r.notes.push_back("kappa undefined: c1 - c3 a alpha |psi| <= 0");
      ok = false;
    }
  }

  if (zero) {
    r.v_zero = check_v_zero_condition(potential.dim(), request.a, *request.alpha, r.signals);
    ok = r.v_zero->pass && r.kappa.has_value();
  }

  if (const auto* dw = std::get_if<DoubleWellPotential>(&potential.family())) {
    r.r_conditions = check_R_conditions(dw->cx, dw->cy, dw->radius);
    ok = ok && r.r_conditions->all_pass();
    r.double_well_checks.push_back(check_c1_simplification(dw->cx, dw->cy, request.a));
    r.double_well_checks.push_back(check_outer_dissipativity_upper(dw->cx, dw->cy, dw->radius, request.a));
    r.double_well_checks.push_back(check_outer_dissipativity_lower(dw->cx, dw->radius, request.a));
    r.double_well_checks.push_back(check_outer_gradient_upper(dw->cx, dw->radius, request.a));
    if (r.signals.constant_funnel && request.p == 0.5)
      r.double_well_checks.push_back(check_double_well_tracking(dw->cx, dw->cy, request.a, r.signals));
    for (const auto& c : r.double_well_checks) ok = ok && c.pass;
    if (request.compute_interval) {
      if (r.r_conditions->applicable) {
        r.interval = admissible_interval(dw->cx, dw->cy, dw->radius, r.signals, request.p);
      } else {
        r.notes.push_back("admissible interval skipped: 3 R^4 <= 7");
      }
    }
  } else if (!zero && potential.dim() > 0) {
    r.notes.push_back("growth constants are valid for A = a I only");
  }

  r.certified = ok;
  return r;
}

}  // namespace funnel
