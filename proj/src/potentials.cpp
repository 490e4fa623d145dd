#include <funnel/potentials.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace funnel {

namespace {

constexpr double kSymmetryTol = 1e-10;

void require_finite(const Eigen::Ref<const Vec>& x) {
  if (!x.allFinite()) throw std::domain_error("potential evaluated at a non-finite point");
}

Eigen::SelfAdjointEigenSolver<Mat> symmetric_eigen(const Mat& M, const char* what) {
  if (M.rows() != M.cols() || M.rows() == 0)
    throw std::invalid_argument(std::string(what) + " must be a non-empty square matrix");
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale)
    throw std::invalid_argument(std::string(what) + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> eig(M, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw std::invalid_argument(std::string(what) + ": eigen-decomposition failed");
  return eig;
}

}  // namespace

DoubleWellPotential extend_double_well(double cx, double cy, double radius) {
  if (!(cx > 0.0) || !(cy > 0.0)) throw std::invalid_argument("double-well requires C_x > 0 and C_y > 0");
  if (!(radius > 1.0)) throw std::invalid_argument("double-well extension requires R > 1");
  DoubleWellPotential p;
  p.cx = cx;
  p.cy = cy;
  p.radius = radius;
  const double r2 = radius * radius;
  p.d1 = 2.0 * cx * (3.0 * r2 - 1.0);
  p.d2 = 8.0 * cx * r2 * radius;
  p.d3 = cx * (3.0 * r2 * r2 + 1.0);
  return p;
}

QuadraticPotential make_quadratic(Mat S, Vec b, double f) {
  const auto eig = symmetric_eigen(S, "S");
  if (!(eig.eigenvalues().minCoeff() > 0.0)) throw std::invalid_argument("S is not positive definite");
  if (b.size() != S.rows()) throw std::invalid_argument("b has the wrong dimension");
  if (!std::isfinite(f)) throw std::invalid_argument("f must be finite");
  const double floor = 0.5 * b.dot(S.ldlt().solve(b));
  if (f < floor - 1e-12 * std::max(1.0, std::abs(floor)))
    throw std::invalid_argument("f < 1/2 b^T S^{-1} b: the potential would take negative values");
  return QuadraticPotential{std::move(S), std::move(b), f};
}

PotentialModel::PotentialModel(Family family) : family_(std::move(family)) {
  dim_ = std::visit(
      [](const auto& p) -> int {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ZeroPotential>) {
          return p.dim;
        } else if constexpr (std::is_same_v<T, QuadraticPotential>) {
          return static_cast<int>(p.S.rows());
        } else {
          return 2;
        }
      },
      family_);
  if (dim_ < 1) throw std::invalid_argument("potential dimension must be >= 1");
}

PotentialModel PotentialModel::zero(int dim) { return PotentialModel(ZeroPotential{dim}); }

PotentialModel PotentialModel::quadratic(Mat S, Vec b, double f) {
  return PotentialModel(make_quadratic(std::move(S), std::move(b), f));
}

PotentialModel PotentialModel::double_well(double cx, double cy, double radius) {
  return PotentialModel(extend_double_well(cx, cy, radius));
}

const char* PotentialModel::family_name() const {
  switch (family_.index()) {
    case 0: return "zero";
    case 1: return "quadratic";
    default: return "double_well";
  }
}

double PotentialModel::value_and_gradient(const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> grad) const {
  if (const auto* dw = std::get_if<DoubleWellPotential>(&family_)) {
    const double px = x[0];
    const double py = x[1];
    const double tail = dw->cy * py * py;
    grad[1] = 2.0 * dw->cy * py;
    if (std::abs(px) <= dw->radius) {
      const double s = px * px - 1.0;
      grad[0] = 4.0 * dw->cx * px * s;
      return dw->cx * s * s + tail;
    }
    // Outer branches mirror each other: the sign of d2 follows the sign of x.
    const double sgn = px > 0.0 ? 1.0 : -1.0;
    grad[0] = 2.0 * dw->d1 * px - sgn * dw->d2;
    return dw->d1 * px * px - sgn * dw->d2 * px + dw->d3 + tail;
  }
  if (const auto* q = std::get_if<QuadraticPotential>(&family_)) {
    grad.noalias() = q->S * x;
    const double v = 0.5 * x.dot(grad) + q->b.dot(x) + q->f;
    grad += q->b;
    return v;
  }
  grad.setZero();
  return 0.0;
}

double PotentialModel::value(const Eigen::Ref<const Vec>& x) const {
  Vec g(dim_);
  return value_and_gradient(x, g);
}

PotentialEval PotentialModel::eval(const Eigen::Ref<const Vec>& x) const {
  if (x.size() != dim_) throw std::invalid_argument("point has the wrong dimension for this potential");
  require_finite(x);
  PotentialEval out;
  out.grad.resize(dim_);
  out.value = value_and_gradient(x, out.grad);
  if (const auto* dw = std::get_if<DoubleWellPotential>(&family_)) {
    out.laplacian = std::abs(x[0]) <= dw->radius ? 12.0 * dw->cx * x[0] * x[0] - 4.0 * dw->cx + 2.0 * dw->cy
                                                 : 2.0 * (dw->d1 + dw->cy);
  } else if (const auto* q = std::get_if<QuadraticPotential>(&family_)) {
    out.laplacian = q->S.trace();
  } else {
    out.laplacian = 0.0;
  }
  return out;
}

AssumptionConstants assumption_constants(const PotentialModel& model, double a, std::optional<double> c3) {
  if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("control strength a must be positive");
  if (c3 && !(*c3 >= 0.0)) throw std::invalid_argument("c3 must be non-negative");
  AssumptionConstants c;
  const auto& family = model.family();

  if (const auto* dw = std::get_if<DoubleWellPotential>(&family)) {
    const double cx = dw->cx;
    const double cy = dw->cy;
    c.c1 = std::min({8.0 * a, 2.0 * a + 16.0 * cx - 24.0 * cx / a, 4.0 * cy + 2.0 * a});
    c.c2 = 2.0 * cy + 2.0 * a + 8.0 * a * cx - 4.0 * cx;
    c.c3 = std::sqrt(8.0 * cx / a);
    c.c4 = std::sqrt(a / (8.0 * cx)) * 2.0 * cy * cy / (2.0 * cy + a);
    return c;
  }

  if (const auto* q = std::get_if<QuadraticPotential>(&family)) {
    const auto d = static_cast<double>(q->S.rows());
    const Mat SA = q->S + a * Mat::Identity(q->S.rows(), q->S.cols());
    Eigen::SelfAdjointEigenSolver<Mat> eig_sa(SA, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Mat> eig_s(q->S, Eigen::EigenvaluesOnly);
    const double lmin = eig_sa.eigenvalues().minCoeff();
    const double lmax = eig_sa.eigenvalues().maxCoeff();
    const double smax = eig_s.eigenvalues().maxCoeff();
    const double bn = q->b.norm();
    const double gap = 2.0 * lmax - lmin;
    c.c1 = lmin;
    c.c2 = q->S.trace() + d * a + (gap * gap / (2.0 * lmin * lmin) - 1.0) * bn * bn + lmin * q->f;
    c.c3 = c3.value_or(std::sqrt(smax) / std::sqrt(a));
    if (!(c.c3 > 0.0)) throw std::invalid_argument("quadratic potentials need c3 > 0");
    const double lead = smax + c.c3 * bn;
    c.c4 = lead * lead / (2.0 * c.c3 * lmin) + bn - c.c3 * q->f;
    return c;
  }

  const auto& z = std::get<ZeroPotential>(family);
  c.c1 = a;
  c.c2 = static_cast<double>(z.dim) * a;
  c.c3 = c3.value_or(0.0);
  c.c4 = 0.0;
  return c;
}

}  // namespace funnel
