#include <funnel/funnel_controller.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace funnel;
using std::numbers::pi;

namespace {

Vec v2(double x, double y) { return (Vec(2) << x, y).finished(); }

ControllerConfig unit_funnel(double alpha) {
  return ControllerConfig(alpha, Mat::Identity(2, 2), FunnelSpec::constant(1.0), ReferenceSignal::zero(2));
}

}  // namespace

TEST(Funnel, Constant) {
  const auto s = FunnelSpec::constant(1.0)(0.37);
  EXPECT_EQ(s.psi, 1.0);
  EXPECT_EQ(s.dpsi, 0.0);
  EXPECT_THROW(FunnelSpec::constant(1.0)(-0.1), std::domain_error);
  EXPECT_THROW(FunnelSpec::constant(0.0), std::invalid_argument);
}

TEST(Funnel, Exponential) {
  const auto f = FunnelSpec::exponential(2.0, 1.0, 3.0);
  EXPECT_DOUBLE_EQ(f(0.0).psi, 2.0);
  EXPECT_DOUBLE_EQ(f(0.0).dpsi, -3.0);
  EXPECT_NEAR(f(50.0).psi, 1.0, 1e-15);
  EXPECT_NEAR(f(50.0).dpsi, 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(f.sup(), 2.0);
  EXPECT_DOUBLE_EQ(f.derivative_sup(), 3.0);
  EXPECT_DOUBLE_EQ(f.ratio(), 0.5);
}

TEST(Reference, FigureEight) {
  const auto r = ReferenceSignal::figure_eight(0.5);
  const auto s0 = r(0.0);
  EXPECT_NEAR((s0.y - v2(1.0, 0.0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((s0.dy - v2(0.0, 8 * pi)).norm(), 0.0, 1e-12);
  // quarter period: sin(2wt) = sin(pi), cos(2wt) = -1
  const auto s1 = r(0.125);
  EXPECT_NEAR(s1.y.norm(), 0.0, 1e-15);
  EXPECT_NEAR((s1.dy - v2(-4 * pi, -8 * pi)).norm(), 0.0, 1e-12);
  EXPECT_THROW(ReferenceSignal::figure_eight(0.0), std::invalid_argument);
}

TEST(Reference, SupNormsMatchDenseSampling) {
  const auto r = ReferenceSignal::figure_eight(0.5);
  EXPECT_DOUBLE_EQ(r.sup_norm(), 1.25);
  EXPECT_NEAR(r.derivative_sup_norm(), 4 * pi * std::sqrt(5.0), 1e-12);
  // dense grid over one period
  double y_max = 0.0, dy_max = 0.0;
  const int n = 2'000'000;
  for (int k = 0; k <= n; ++k) {
    const auto s = r(0.5 * k / n);
    y_max = std::max(y_max, s.y.norm());
    dy_max = std::max(dy_max, s.dy.norm());
  }
  EXPECT_NEAR(y_max, r.sup_norm(), 1e-9);
  EXPECT_NEAR(dy_max, r.derivative_sup_norm(), 1e-9 * r.derivative_sup_norm());
}

TEST(Control, ZeroError) {
  const auto out = control(unit_funnel(7.18), 0.0, v2(0.0, 0.0));
  EXPECT_EQ(out.u.norm(), 0.0);
  EXPECT_TRUE(out.inside);
}

TEST(Control, InsideBranch) {
  const auto out = control(unit_funnel(7.18), 0.0, v2(0.5, 0.0));
  EXPECT_NEAR(out.u[0], -3.460859012472183, 1e-14);
  EXPECT_EQ(out.u[1], 0.0);
  EXPECT_TRUE(out.inside);
}

TEST(Control, ExtensionBranch) {
  const auto out = control(unit_funnel(7.18), 0.0, v2(2.0, 0.0));
  EXPECT_DOUBLE_EQ(out.u[0], -7.18);
  EXPECT_EQ(out.u[1], 0.0);
  EXPECT_FALSE(out.inside);
}

TEST(Control, ContinuousAtBoundary) {
  const double alpha = 7.18;
  const Vec dir = v2(0.6, 0.8);
  Vec inside(2), outside(2);
  funnel_feedback(alpha, 1.0, dir * (1.0 - 1e-6), inside);
  funnel_feedback(alpha, 1.0, dir * 1.0, outside);
  // the gap is alpha (psi - |e|) up to rounding
  EXPECT_LE((inside - outside).norm(), 1e-6 * alpha * (1 + 1e-9));
}

TEST(Control, TanhClampNearBoundary) {
  Vec u(2);
  bool in = false;
  funnel_feedback(1.0, 1.0, v2(1.0 - 1e-14, 0.0), u, &in);
  EXPECT_TRUE(in);
  EXPECT_TRUE(u.allFinite());
  EXPECT_NEAR(u[0], -(1.0 - 1e-14), 1e-15);
}

TEST(Control, Saturation) {
  const auto funnel = FunnelSpec::exponential(2.0, 0.5, 1.5);
  const ControllerConfig cfg(3.0, 4.0 * Mat::Identity(2, 2), funnel, ReferenceSignal::figure_eight(0.5));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> t_dist(0.0, 5.0);
  std::normal_distribution<double> g(0.0, 1.5);
  for (int k = 0; k < 100000; ++k) {
    const double t = t_dist(rng);
    const auto out = control(cfg, t, v2(g(rng), g(rng)));
    ASSERT_LE(out.u.norm(), cfg.alpha() * funnel(t).psi + 1e-12);
  }
}

TEST(Control, OpposesError) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  const auto cfg = unit_funnel(2.0);
  for (int k = 0; k < 1000; ++k) {
    const Vec y = v2(g(rng), g(rng));
    const auto out = control(cfg, 0.0, y);
    EXPECT_LE(out.u.dot(out.e), 0.0);
  }
}

TEST(Controller, Validation) {
  Mat A(2, 2);
  A << 1, 2, 2, 1;  // indefinite
  EXPECT_THROW(ControllerConfig(1.0, A, FunnelSpec::constant(1.0), ReferenceSignal::zero(2)), std::invalid_argument);
  EXPECT_THROW(ControllerConfig(0.0, Mat::Identity(2, 2), FunnelSpec::constant(1.0), ReferenceSignal::zero(2)),
               std::invalid_argument);
  EXPECT_THROW(ControllerConfig(1.0, Mat::Identity(3, 3), FunnelSpec::constant(1.0), ReferenceSignal::zero(2)),
               std::invalid_argument);
  A << 3, 1, 1, 3;
  EXPECT_DOUBLE_EQ(ControllerConfig(1.0, A, FunnelSpec::constant(1.0), ReferenceSignal::zero(2)).a(), 4.0);
  EXPECT_THROW(control(unit_funnel(1.0), 0.0, v2(std::nan(""), 0.0)), std::domain_error);
}
