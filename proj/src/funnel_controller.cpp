#include <funnel/funnel_controller.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace funnel {

namespace {
// Below this gap tanh(1 / gap) is 1 in double precision.
constexpr double kTanhSaturationGap = 1e-12;
}  // namespace

FunnelSpec FunnelSpec::constant(double value) {
  if (!(value > 0.0) || !std::isfinite(value)) throw std::invalid_argument("constant funnel needs psi > 0");
  return FunnelSpec(Kind::constant, value, value, 0.0);
}

FunnelSpec FunnelSpec::exponential(double psi0, double psi_inf, double decay) {
  if (!(psi_inf > 0.0) || !(psi0 >= psi_inf) || !std::isfinite(psi0))
    throw std::invalid_argument("exponential funnel needs psi0 >= psi_inf > 0");
  if (!(decay >= 0.0) || !std::isfinite(decay)) throw std::invalid_argument("exponential funnel needs decay >= 0");
  return FunnelSpec(Kind::exponential, psi0, psi_inf, decay);
}

FunnelSpec::Sample FunnelSpec::operator()(double t) const {
  if (!(t >= 0.0)) throw std::domain_error("funnel evaluated at negative time");
  if (kind_ == Kind::constant) return {psi0_, 0.0};
  const double transient = (psi0_ - psi_inf_) * std::exp(-decay_ * t);
  return {transient + psi_inf_, -decay_ * transient};
}

ReferenceSignal ReferenceSignal::figure_eight(double period) {
  if (!(period > 0.0) || !std::isfinite(period)) throw std::invalid_argument("figure-eight period must be positive");
  return ReferenceSignal(Kind::figure_eight, Vec::Zero(2), period);
}

ReferenceSignal ReferenceSignal::constant(Vec value) {
  if (value.size() < 1 || !value.allFinite()) throw std::invalid_argument("constant reference must be a finite vector");
  return ReferenceSignal(Kind::constant, std::move(value), 0.0);
}

ReferenceSignal ReferenceSignal::zero(int dim) {
  if (dim < 1) throw std::invalid_argument("reference dimension must be >= 1");
  return ReferenceSignal(Kind::zero, Vec::Zero(dim), 0.0);
}

void ReferenceSignal::value_at(double t, Eigen::Ref<Vec> y) const {
  if (kind_ == Kind::figure_eight) {
    const double w = 2.0 * std::numbers::pi / period_;
    y[0] = std::cos(w * t);
    y[1] = std::sin(2.0 * w * t);
  } else {
    y = value_;
  }
}

ReferenceSignal::Sample ReferenceSignal::operator()(double t) const {
  if (!(t >= 0.0)) throw std::domain_error("reference evaluated at negative time");
  Sample s{Vec(dim()), Vec::Zero(dim())};
  value_at(t, s.y);
  if (kind_ == Kind::figure_eight) {
    const double w = 2.0 * std::numbers::pi / period_;
    s.dy[0] = -2.0 * w * 0.5 * std::sin(w * t);
    s.dy[1] = 2.0 * w * std::cos(2.0 * w * t);
  }
  return s;
}

double ReferenceSignal::sup_norm() const {
  // |y|^2 = c + 4 c (1 - c) with c = cos^2, maximal at c = 5/8.
  if (kind_ == Kind::figure_eight) return 1.25;
  return value_.norm();
}

double ReferenceSignal::derivative_sup_norm() const {
  // |dy|^2 = (4 pi / period)^2 (4 s^2 - 15/4 s + 1) with s = sin^2, maximal at s = 1.
  if (kind_ == Kind::figure_eight) return 2.0 * std::numbers::pi * std::sqrt(5.0) / period_;
  return 0.0;
}

ControllerConfig::ControllerConfig(double alpha, Mat A, FunnelSpec funnel, ReferenceSignal reference)
    : alpha_(alpha), A_(std::move(A)), a_(0.0), funnel_(funnel), reference_(std::move(reference)) {
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) throw std::invalid_argument("gain alpha must be positive");
  if (A_.rows() != A_.cols() || A_.rows() == 0) throw std::invalid_argument("A must be square");
  const double scale = std::max(1.0, A_.cwiseAbs().maxCoeff());
  if ((A_ - A_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) throw std::invalid_argument("A is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> eig(A_, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) throw std::invalid_argument("A is not positive definite");
  a_ = eig.eigenvalues().maxCoeff();
  if (reference_.dim() != A_.rows()) throw std::invalid_argument("reference dimension does not match A");
}

void funnel_feedback(double alpha, double psi, const Eigen::Ref<const Vec>& e, Eigen::Ref<Vec> u, bool* inside) {
  const double norm = e.norm();
  const bool in = norm < psi;
  if (in) {
    const double gap = psi - norm;
    const double gain = gap < kTanhSaturationGap ? 1.0 : std::tanh(1.0 / gap);
    u = -alpha * gain * e;
  } else {
    // psi > 0, so norm > 0 here.
    u = (-alpha * psi / norm) * e;
  }
  if (inside) *inside = in;
}

ControlOutput control(const ControllerConfig& cfg, double t, const Eigen::Ref<const Vec>& y) {
  if (y.size() != cfg.dim()) throw std::invalid_argument("output has the wrong dimension");
  if (!y.allFinite()) throw std::domain_error("non-finite output");
  const auto boundary = cfg.funnel()(t);
  ControlOutput out;
  out.e.resize(cfg.dim());
  cfg.reference().value_at(t, out.e);
  out.e = y - out.e;
  out.error_norm = out.e.norm();
  out.psi = boundary.psi;
  out.u.resize(cfg.dim());
  funnel_feedback(cfg.alpha(), boundary.psi, out.e, out.u, &out.inside);
  return out;
}

}  // namespace funnel
