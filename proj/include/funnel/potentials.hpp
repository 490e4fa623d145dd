#pragma once

// Potential-energy families for controlled Langevin dynamics
//
//   dX = -(grad V(X) + A (X - u)) dt + sqrt(2) dB
//
// Every family evaluates V, grad V and the Laplacian in closed form. The
// double-well is extended quadratically in x outside |x| <= R so that grad V
// is globally Lipschitz while V stays C^2.

#include <Eigen/Dense>

#include <optional>
#include <variant>

namespace funnel {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// V(x) = 1/2 x^T S x + b^T x + f with S symmetric positive definite and
/// f >= 1/2 b^T S^{-1} b, so that V >= 0.
struct QuadraticPotential {
  Mat S;
  Vec b;
  double f = 0.0;
};

/// V(x, y) = C_x (x^2 - 1)^2 + C_y y^2 for |x| <= R, continued by
/// d1 x^2 -+ d2 x + d3 + C_y y^2 for |x| > R.
struct DoubleWellPotential {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

/// V == 0 in dimension `dim`.
struct ZeroPotential {
  int dim = 0;
};

struct PotentialEval {
  double value = 0.0;
  Vec grad;
  double laplacian = 0.0;
};

/// Constants of the growth conditions
///   (A2)  lap V + tr A - |grad V + A x|^2 <= -c1 (V + 1/2 x^T A x) + c2
///   (A3)  |grad V| <= c3 (V + 1/2 x^T A x) + c4
/// for A = a I.
struct AssumptionConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
};

/// Builds the C^2 quadratic continuation of the double-well beyond |x| = R.
/// Throws std::invalid_argument unless C_x > 0, C_y > 0 and R > 1.
DoubleWellPotential extend_double_well(double cx, double cy, double radius);

/// Validates S (symmetric positive definite) and the non-negativity bound on f.
QuadraticPotential make_quadratic(Mat S, Vec b, double f);

class PotentialModel {
 public:
  using Family = std::variant<ZeroPotential, QuadraticPotential, DoubleWellPotential>;

  explicit PotentialModel(Family family);

  static PotentialModel zero(int dim);
  static PotentialModel quadratic(Mat S, Vec b, double f);
  static PotentialModel double_well(double cx, double cy, double radius);

  int dim() const { return dim_; }
  const Family& family() const { return family_; }
  const char* family_name() const;

  /// Value, gradient and Laplacian at x. Throws std::domain_error on
  /// non-finite input and std::invalid_argument on a dimension mismatch.
  PotentialEval eval(const Eigen::Ref<const Vec>& x) const;

  double value(const Eigen::Ref<const Vec>& x) const;

  /// Writes grad V(x) into `grad` and returns V(x). No validation; used by the
  /// integrator's inner loop.
  double value_and_gradient(const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> grad) const;

 private:
  Family family_;
  int dim_ = 0;
};

/// Constants (c1, c2, c3, c4) for A = a I.
///
/// Double-well: the inner-region formulas
///   c1 = min{8a, 2a + 16 C_x - 24 C_x / a, 4 C_y + 2a}
///   c2 = 2 C_y + 2a + 8 a C_x - 4 C_x
///   c3 = sqrt(8 C_x / a),  c4 = sqrt(a / (8 C_x)) 2 C_y^2 / (2 C_y + a).
/// Whether they also hold for |x| > R depends on a and R; see certifier.
///
/// Quadratic: c1 = lmin(S + A), c3 free (`c3`, defaulting to
/// sqrt(lmax(S) / a)), c2 and c4 from the closed forms.
///
/// Zero potential: c1 = a, c2 = d a, c4 = 0 and c3 free (default 0).
AssumptionConstants assumption_constants(const PotentialModel& model, double a,
                                         std::optional<double> c3 = std::nullopt);

}  // namespace funnel
