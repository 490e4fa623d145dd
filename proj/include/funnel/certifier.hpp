#pragma once

// Feasibility certificate for funnel control of Langevin dynamics.
//
// Given the growth constants c1..c4 of a potential (see potentials.hpp), the
// funnel boundary and the reference, decides whether a control strength
// a = |A| and a gain alpha provably keep the mean tracking error inside the
// funnel. For the extended double-well it also derives the admissible
// interval of a.
//
// Conditions are named by what they constrain:
//   gain_balance                 c3 a alpha |psi| = p c1
//   tracking                     main inequality relating c1..c4, a, psi, y_ref
//   tracking_constant_funnel     the same for constant psi and p = 1/2
//   v_zero_tracking              the tracking inequality for V == 0
//   c1_simplification            C_y <= min{3a/2, (4a - 6) C_x / a}
//   outer_dissipativity_upper    upper bound on a from the dissipativity
//                                condition for |x| > R
//   outer_dissipativity_lower    a >= 4 C_x (R^2 + 1)
//   outer_gradient_upper         upper bound on a from the gradient growth
//                                condition for |x| > R
//   double_well_tracking         tracking_constant_funnel written out for the
//                                double-well constants
// and, for the extension radius R:
//   curvature                    2 C_x (3R^2 - 1) >= C_y
//   bounds_compatible            lower and outer_dissipativity_upper compatible
//   minimizer_below_lower        8 R^6 (R^2 + 1) <= (3R^2 - 1)^4
//   gradient_bound_at_lower      outer_gradient_upper exceeds the lower bound

#include <funnel/funnel_controller.hpp>
#include <funnel/potentials.hpp>

#include <optional>
#include <string>
#include <vector>

namespace funnel {

/// One inequality "lhs op rhs" with its verdict.
struct ConditionCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  std::string op = "<";
  bool pass = false;
  /// Signed slack, positive when satisfied.
  double margin() const { return op == ">=" || op == ">" ? lhs - rhs : rhs - lhs; }
};

/// Sup norms of funnel and reference entering the conditions.
struct SignalBounds {
  double psi_sup = 1.0;
  double psi_dot_sup = 0.0;
  double q = 1.0;  // inf psi / sup psi
  double yref_sup = 0.0;
  double yref_dot_sup = 0.0;
  bool constant_funnel = true;

  static SignalBounds from(const FunnelSpec& funnel, const ReferenceSignal& reference);
};

struct FeasibilityInput {
  AssumptionConstants constants;
  double a = 0.0;
  std::optional<double> alpha;
  SignalBounds signals;
  double p = 0.5;
};

/// Gain from c3 a alpha |psi| = p c1. Returns nullopt when c3 == 0, where the
/// balance puts no constraint on alpha.
std::optional<double> solve_alpha(const AssumptionConstants& c, double a, double psi_sup, double p);

/// p implied by a given alpha.
double implied_p(const AssumptionConstants& c, double a, double alpha, double psi_sup);

/// The tracking inequality
///   (c4 + c2 c3 / c1) / (1 - p) + a p |psi| / (1 - p) + a |y_ref| / (1 - p)
///     + |y_ref'| + |psi'|  <  p q c1 / (2 c3).
/// For a constant funnel and p = 1/2 the simplified form
///   2 (c4 + c2 c3 / c1) + a (psi + 2 |y_ref|) + |y_ref'| < c1 / (4 c3)
/// is reported instead. Independent of alpha. Strict, with no slack.
/// Throws std::invalid_argument for p outside (0, 1).
ConditionCheck check_main_condition(const FeasibilityInput& in);

/// The general form, regardless of the funnel shape.
ConditionCheck check_main_condition_general(const FeasibilityInput& in);

/// Bound on E[V(Z) + 1/2 Z^T A Z] for admissible initial data,
///   (c2 + c4 a alpha |psi| + a^2 alpha |psi| (|psi| + |y_ref|)) / (c1 - c3 a alpha |psi|).
/// Returns nullopt when alpha is missing or the denominator is not positive.
std::optional<double> kappa(const FeasibilityInput& in);

/// Tracking inequality for V == 0 at a single p:
///   2 p d / ((1 - p) alpha |psi|) + a p |psi| / (1 - p) + a |y_ref| / (1 - p)
///     + |y_ref'| + |psi'|  <  q a alpha |psi| / 4.
ConditionCheck check_v_zero_condition_at(int dim, double a, double alpha, const SignalBounds& s, double p);

struct VZeroReport {
  bool pass = false;
  double best_p = 0.5;  // grid point with the largest margin
  ConditionCheck best;
};

/// Scans p over {k / 1000 : k = 1..999}; passes if any grid point does.
VZeroReport check_v_zero_condition(int dim, double a, double alpha, const SignalBounds& s);

struct RConditionReport {
  bool applicable = false;  // 3 R^4 > 7, needed for the outer dissipativity bound
  ConditionCheck curvature;
  ConditionCheck bounds_compatible;
  ConditionCheck minimizer_below_lower;
  ConditionCheck gradient_bound_at_lower;

  bool all_pass() const {
    return applicable && curvature.pass && bounds_compatible.pass && minimizer_below_lower.pass &&
           gradient_bound_at_lower.pass;
  }
  std::vector<ConditionCheck> checks() const {
    return {curvature, bounds_compatible, minimizer_below_lower, gradient_bound_at_lower};
  }
};

/// Requires R > 1 (std::invalid_argument otherwise).
RConditionReport check_R_conditions(double cx, double cy, double radius);

/// 4 C_x (R^2 + 1).
double double_well_a_lower(double cx, double radius);
/// (64 C_x R^6 - 6 C_y R^4 - 12 R^2 - 2 C_y) / (3 R^4 - 7); requires 3 R^4 > 7.
double double_well_a_upper_dissipativity(double cx, double cy, double radius);
/// Square of the positive root of s^2 - B s - C with
///   B = 4 sqrt(8 C_x) R^3 (R^2 + 1) / (3R^2 - 1)^2,
///   C = 16 C_x R^2 (R^4 + 1) / (3R^2 - 1)^2.
double double_well_a_upper_gradient(double cx, double radius);

ConditionCheck check_c1_simplification(double cx, double cy, double a);
ConditionCheck check_outer_dissipativity_upper(double cx, double cy, double radius, double a);
ConditionCheck check_outer_dissipativity_lower(double cx, double radius, double a);
ConditionCheck check_outer_gradient_upper(double cx, double radius, double a);
/// Constant funnel, p = 1/2, c1 = 4 C_y + 2a:
///   sqrt(a/(8C_x)) 4C_y^2/(2C_y + a) + 2 sqrt(8C_x/a) (2C_y + 2a + 8aC_x - 4C_x)/(4C_y + 2a)
///     + a (psi + 2|y_ref|) + |y_ref'|  <  sqrt(a/(8C_x)) (C_y + a/2).
ConditionCheck check_double_well_tracking(double cx, double cy, double a, const SignalBounds& s);

struct AdmissibleInterval {
  bool empty = true;
  double a_min = 0.0;
  double a_max = 0.0;
  double lower_dissipativity = 0.0;
  double lower_c1_simplification = 0.0;  // +inf when C_y >= 4 C_x
  double upper_dissipativity = 0.0;
  double upper_gradient = 0.0;
  /// Part of the bracket where the tracking inequality holds.
  std::optional<double> tracking_low;
  std::optional<double> tracking_high;
  RConditionReport r_conditions;
  std::vector<std::string> diagnostics;
};

/// Admissible control strengths for the extended double-well. The tracking
/// inequality is scanned over the bracket [lower, min(uppers)] on a 1000-cell
/// grid; endpoints it cuts are refined by bisection to 1e-3 and reported on
/// the satisfied side.
AdmissibleInterval admissible_interval(double cx, double cy, double radius, const SignalBounds& s,
                                       double p = 0.5);

struct CertifyRequest {
  double a = 0.0;
  std::optional<double> alpha;  // nullopt: solve from p
  double p = 0.5;
  std::optional<double> c3;     // free constant for quadratic / zero potentials
  bool compute_interval = true;
};

struct CertificateReport {
  std::string family;
  double a = 0.0;
  double p = 0.5;
  SignalBounds signals;
  AssumptionConstants constants;
  std::optional<double> alpha;
  bool alpha_solved = false;
  std::optional<double> p_effective;   // p implied by (alpha, a)
  ConditionCheck gain_balance;
  ConditionCheck main_condition;       // at the configured p
  std::optional<ConditionCheck> main_condition_effective;  // at p_effective when alpha is given
  std::optional<double> kappa;
  std::vector<ConditionCheck> double_well_checks;
  std::optional<RConditionReport> r_conditions;
  std::optional<AdmissibleInterval> interval;
  std::optional<VZeroReport> v_zero;
  bool certified = false;
  std::vector<std::string> notes;
};

/// Full certificate for one controller setting.
CertificateReport certify(const PotentialModel& potential, const FunnelSpec& funnel,
                          const ReferenceSignal& reference, const CertifyRequest& request);

}  // namespace funnel
