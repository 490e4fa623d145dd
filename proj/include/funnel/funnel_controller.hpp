#pragma once

// Funnel boundaries, reference signals and the funnel feedback
//
//   u(t) = -alpha tanh(1 / (psi(t) - |e(t)|)) e(t),   e = y - y_ref,
//
// continued by -alpha psi(t) e / |e| outside the funnel so that the law is
// globally bounded by alpha psi(t).

#include <funnel/potentials.hpp>

namespace funnel {

/// Boundary psi of the performance funnel {(t, e) : |e| < psi(t)}.
class FunnelSpec {
 public:
  enum class Kind { constant, exponential };

  /// psi(t) = value.
  static FunnelSpec constant(double value);
  /// psi(t) = (psi0 - psi_inf) exp(-decay t) + psi_inf.
  static FunnelSpec exponential(double psi0, double psi_inf, double decay);

  Kind kind() const { return kind_; }

  struct Sample {
    double psi;
    double dpsi;
  };
  /// Throws std::domain_error for t < 0.
  Sample operator()(double t) const;

  double sup() const { return psi0_; }
  double inf() const { return psi_inf_; }
  double derivative_sup() const { return decay_ * (psi0_ - psi_inf_); }
  /// q = inf psi / sup psi.
  double ratio() const { return psi_inf_ / psi0_; }

  double psi0() const { return psi0_; }
  double psi_inf() const { return psi_inf_; }
  double decay() const { return decay_; }

 private:
  FunnelSpec(Kind kind, double psi0, double psi_inf, double decay)
      : kind_(kind), psi0_(psi0), psi_inf_(psi_inf), decay_(decay) {}

  Kind kind_;
  double psi0_;
  double psi_inf_;
  double decay_;
};

class ReferenceSignal {
 public:
  enum class Kind { figure_eight, constant, zero };

  /// y_ref(t) = (cos(2 pi t / period), sin(4 pi t / period)).
  static ReferenceSignal figure_eight(double period);
  static ReferenceSignal constant(Vec value);
  static ReferenceSignal zero(int dim);

  Kind kind() const { return kind_; }
  int dim() const { return static_cast<int>(value_.size()); }
  double period() const { return period_; }
  const Vec& value() const { return value_; }

  struct Sample {
    Vec y;
    Vec dy;
  };
  Sample operator()(double t) const;
  /// Writes y_ref(t) without allocating.
  void value_at(double t, Eigen::Ref<Vec> y) const;

  /// Exact sup norms: for the figure-eight 5/4 and 2 pi sqrt(5) / period.
  double sup_norm() const;
  double derivative_sup_norm() const;

 private:
  ReferenceSignal(Kind kind, Vec value, double period)
      : kind_(kind), value_(std::move(value)), period_(period) {}

  Kind kind_;
  Vec value_;  // constant value, or a zero vector giving the dimension
  double period_ = 0.0;
};

class ControllerConfig {
 public:
  /// Throws std::invalid_argument unless alpha > 0, A is symmetric positive
  /// definite and the reference dimension matches A.
  ControllerConfig(double alpha, Mat A, FunnelSpec funnel, ReferenceSignal reference);

  double alpha() const { return alpha_; }
  const Mat& A() const { return A_; }
  /// Spectral norm of A (its largest eigenvalue).
  double a() const { return a_; }
  const FunnelSpec& funnel() const { return funnel_; }
  const ReferenceSignal& reference() const { return reference_; }
  int dim() const { return static_cast<int>(A_.rows()); }

 private:
  double alpha_;
  Mat A_;
  double a_;
  FunnelSpec funnel_;
  ReferenceSignal reference_;
};

struct ControlOutput {
  Vec u;
  Vec e;
  double error_norm = 0.0;
  double psi = 0.0;
  bool inside = true;
};

/// Evaluates the bounded funnel law at (t, y). Throws std::domain_error on
/// t < 0 or non-finite y.
ControlOutput control(const ControllerConfig& cfg, double t, const Eigen::Ref<const Vec>& y);

/// The law in terms of the tracking error alone.
void funnel_feedback(double alpha, double psi, const Eigen::Ref<const Vec>& e, Eigen::Ref<Vec> u, bool* inside = nullptr);

}  // namespace funnel
