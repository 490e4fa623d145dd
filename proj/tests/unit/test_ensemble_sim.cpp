#include <funnel/certifier.hpp>
#include <funnel/ensemble_sim.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace funnel;

namespace {

Vec v2(double x, double y) { return (Vec(2) << x, y).finished(); }

SimConfig deterministic(double dt, double horizon, Vec x0) {
  SimConfig cfg;
  cfg.ensemble_size = 1;
  cfg.dt = dt;
  cfg.horizon = horizon;
  cfg.noise_scale = 0.0;
  cfg.initial = InitialCondition::point(std::move(x0));
  return cfg;
}

// Smooth linear test problem: V = 1/2 x^T S x, constant reference inside a wide funnel.
struct LinearCase {
  PotentialModel potential = PotentialModel::quadratic((Mat(2, 2) << 1.0, 0.0, 0.0, 2.0).finished(), Vec::Zero(2), 0.0);
  ControllerConfig controller{1.0, 2.0 * Mat::Identity(2, 2), FunnelSpec::constant(2.0),
                              ReferenceSignal::constant(v2(0.3, -0.2))};
};

struct PaperCase {
  PotentialModel potential = PotentialModel::double_well(1.5, 3.0, 10.0);
  double alpha = 7.176694956248977;
  ControllerConfig controller{alpha, 606.0 * Mat::Identity(2, 2), FunnelSpec::constant(1.0),
                              ReferenceSignal::figure_eight(0.5)};
  SimConfig sim(std::uint64_t seed) const {
    SimConfig cfg;
    cfg.seed = seed;
    cfg.initial = InitialCondition::point(v2(1.0, 0.0));
    return cfg;
  }
};

std::string csv_of(const SimulationRecord& rec) {
  std::ostringstream os;
  write_csv(rec, os);
  return os.str();
}

}  // namespace

TEST(SimConfig, Validation) {
  SimConfig cfg;
  cfg.initial = InitialCondition::point(v2(0, 0));
  EXPECT_NO_THROW(cfg.validate());
  cfg.ensemble_size = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.ensemble_size = 1;
  cfg.dt = 2.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.dt = 1e-3;
  cfg.noise_scale = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(SimConfig, TimeGrid) {
  SimConfig cfg;
  EXPECT_EQ(cfg.steps(), 10000);
  cfg.dt = 0.3;
  EXPECT_EQ(cfg.steps(), 4);
  EXPECT_DOUBLE_EQ(cfg.time_at(3), 0.8999999999999999);
  EXPECT_DOUBLE_EQ(cfg.time_at(4), 1.0);
}

TEST(Init, PointMass) {
  SimConfig cfg;
  cfg.initial = InitialCondition::point(v2(1.0, 0.0));
  const auto s = init_ensemble(cfg, 2);
  ASSERT_EQ(s.X.cols(), 20);
  for (Eigen::Index i = 0; i < s.X.cols(); ++i) EXPECT_EQ(s.X.col(i), v2(1.0, 0.0));
}

TEST(Init, GaussianMeanWithinCltBound) {
  SimConfig cfg;
  cfg.ensemble_size = 10000;
  cfg.seed = 42;
  cfg.initial = InitialCondition::gaussian(v2(1.0, 0.0), 0.01 * Mat::Identity(2, 2));
  const auto s = init_ensemble(cfg, 2);
  const Vec mean = s.X.rowwise().mean();
  EXPECT_LT(std::abs(mean[0] - 1.0), 3 * 0.1 / 100);
  EXPECT_LT(std::abs(mean[1]), 3 * 0.1 / 100);
  const auto again = init_ensemble(cfg, 2);
  EXPECT_EQ(s.X, again.X);
}

TEST(Init, RejectsIndefiniteCovariance) {
  SimConfig cfg;
  cfg.initial = InitialCondition::gaussian(v2(0, 0), (Mat(2, 2) << 1.0, 2.0, 2.0, 1.0).finished());
  EXPECT_THROW(init_ensemble(cfg, 2), std::invalid_argument);
  cfg.initial = InitialCondition::point(Vec::Zero(3));
  EXPECT_THROW(init_ensemble(cfg, 2), std::invalid_argument);
}

TEST(Step, RestAtReference) {
  // No potential, zero reference and a start at the origin: nothing moves.
  const auto pot = PotentialModel::zero(2);
  const ControllerConfig ctl(8.0, 10.0 * Mat::Identity(2, 2), FunnelSpec::constant(1.0), ReferenceSignal::zero(2));
  const auto cfg = deterministic(1e-3, 1.0, v2(0.0, 0.0));
  const auto rec = run(pot, ctl, cfg);
  for (const auto& m : rec.mean) EXPECT_EQ(m.norm(), 0.0);
}

TEST(Step, NoiseVarianceGrowsLikeTwoT) {
  // Weak confinement so the spread is pure Brownian motion with sigma = sqrt(2).
  const auto pot = PotentialModel::zero(2);
  const ControllerConfig ctl(1e-9, 1e-9 * Mat::Identity(2, 2), FunnelSpec::constant(1.0), ReferenceSignal::zero(2));
  SimConfig cfg;
  cfg.ensemble_size = 20000;
  cfg.dt = 1e-2;
  cfg.horizon = 0.5;
  cfg.seed = 9;
  cfg.initial = InitialCondition::point(v2(0.0, 0.0));
  NoiseSource noise(cfg.seed, cfg.ensemble_size);
  auto state = init_ensemble(cfg, 2, noise);
  EnsembleIntegrator integ(pot, ctl, cfg);
  for (long k = 0; k < cfg.steps(); ++k) integ.step(state, cfg.dt, noise);
  const Vec mean = state.X.rowwise().mean();
  const double var = (state.X.colwise() - mean).squaredNorm() / (2.0 * (cfg.ensemble_size - 1));
  EXPECT_NEAR(var / cfg.horizon, 2.0, 0.05);
}

TEST(Run, RecordShape) {
  LinearCase lc;
  auto cfg = deterministic(0.3, 1.0, v2(1.0, 0.5));
  const auto rec = run(lc.potential, lc.controller, cfg);
  ASSERT_EQ(rec.size(), 5u);
  EXPECT_DOUBLE_EQ(rec.t.back(), 1.0);
  cfg.dt = 1e-3;
  EXPECT_EQ(run(lc.potential, lc.controller, cfg).size(), 1001u);
}

TEST(Run, HighGainContraction) {
  const auto pot = PotentialModel::zero(2);
  const ControllerConfig ctl(8.0, 10.0 * Mat::Identity(2, 2), FunnelSpec::constant(1.0), ReferenceSignal::zero(2));
  const auto rec = run(pot, ctl, deterministic(1e-4, 1.0, v2(0.5, 0.0)));
  for (std::size_t k = 1; k < rec.size(); ++k) ASSERT_LT(rec.error_norm[k], rec.error_norm[k - 1]);
  // scalar oracle: e' = -10 (1 + 8 tanh(1 / (1 - e))) e, integrated finely
  double e = 0.5;
  const double h = 1e-6;
  for (int k = 0; k < 1000000; ++k) e -= h * 10.0 * (1.0 + 8.0 * std::tanh(1.0 / (1.0 - e))) * e;
  EXPECT_NEAR(rec.error_norm.back(), e, 1e-3 * 0.5 + 1e-12);
}

TEST(Run, EulerOrderOne) {
  LinearCase lc;
  const Vec x0 = v2(1.0, 0.5);
  auto terminal = [&](double dt) { return run(lc.potential, lc.controller, deterministic(dt, 1.0, x0)).mean.back(); };
  const Vec coarse = terminal(1e-2);
  const Vec fine = terminal(1e-3);
  const double e_coarse = (coarse - terminal(1e-3)).norm();
  const double e_fine = (fine - terminal(1e-4)).norm();
  const double order = std::log10(e_coarse / e_fine);
  EXPECT_NEAR(order, 1.0, 0.1);
}

TEST(Residual, HalvesWithStep) {
  LinearCase lc;
  const Vec x0 = v2(1.0, 0.5);
  const auto r1 = mean_ode_residual(run(lc.potential, lc.controller, deterministic(2e-3, 1.0, x0)), lc.controller);
  const auto r2 = mean_ode_residual(run(lc.potential, lc.controller, deterministic(1e-3, 1.0, x0)), lc.controller);
  EXPECT_NEAR(r2.max / r1.max, 0.5, 0.1);
}

TEST(Residual, ExactForZeroPotential) {
  const auto pot = PotentialModel::zero(2);
  const ControllerConfig ctl(8.0, 10.0 * Mat::Identity(2, 2), FunnelSpec::constant(1.0),
                             ReferenceSignal::figure_eight(0.5));
  SimConfig cfg;
  cfg.noise_scale = 0.0;
  cfg.horizon = 0.2;
  cfg.initial = InitialCondition::gaussian(v2(1.0, 0.0), 0.01 * Mat::Identity(2, 2));
  const auto rec = run(pot, ctl, cfg);
  EXPECT_LT(mean_ode_residual(rec, ctl, DifferenceStencil::forward).max, 1e-8);
}

TEST(Residual, TooShort) {
  LinearCase lc;
  const auto rec = run(lc.potential, lc.controller, deterministic(0.5, 0.5, v2(1, 0)));
  EXPECT_THROW(mean_ode_residual(rec, lc.controller), std::invalid_argument);
}

TEST(Run, InitialObservableAtWell) {
  PaperCase pc;
  const auto rec = run(pc.potential, pc.controller, pc.sim(1));
  EXPECT_NEAR(rec.lyapunov.front(), 0.5 * 606.0, 1e-12);
}

TEST(Run, PaperSettingStaysInFunnel) {
  PaperCase pc;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto rec = run(pc.potential, pc.controller, pc.sim(seed));
    ASSERT_FALSE(rec.aborted);
    EXPECT_EQ(rec.funnel_exits, 0);
    for (std::size_t k = 0; k < rec.size(); ++k) {
      ASSERT_LT(rec.error_norm[k], rec.psi[k]);
      ASSERT_LE(rec.u[k].norm(), pc.alpha * rec.psi[k] + 1e-12);
    }
  }
}

TEST(Lyapunov, CertifiedRunBelowKappa) {
  PaperCase pc;
  const auto report = certify(pc.potential, FunnelSpec::constant(1.0), ReferenceSignal::figure_eight(0.5),
                              CertifyRequest{606.0, std::nullopt, 0.5, std::nullopt, false});
  ASSERT_TRUE(report.kappa);
  const auto rec = run(pc.potential, pc.controller, pc.sim(4));
  const auto check = lyapunov_check(rec, *report.kappa);
  EXPECT_TRUE(check.pass);
  EXPECT_LT(check.max_observable, *report.kappa);
  EXPECT_FALSE(lyapunov_check(rec, 0.0).pass);
}

TEST(Run, BlowUpAborts) {
  const auto pot = PotentialModel::quadratic(Mat::Identity(2, 2), Vec::Zero(2), 0.0);
  const ControllerConfig ctl(1.0, 1000.0 * Mat::Identity(2, 2), FunnelSpec::constant(1.0), ReferenceSignal::zero(2));
  const auto rec = run(pot, ctl, deterministic(1.0, 1000.0, v2(1.0, 1.0)));
  EXPECT_TRUE(rec.aborted);
  EXPECT_FALSE(rec.abort_reason.empty());
  EXPECT_GT(rec.size(), 1u);
  EXPECT_LT(rec.size(), 1001u);
}

TEST(Run, WarnsOutsideFunnelAtStart) {
  const auto pot = PotentialModel::zero(2);
  const ControllerConfig ctl(8.0, 10.0 * Mat::Identity(2, 2), FunnelSpec::constant(1.0), ReferenceSignal::zero(2));
  std::vector<std::string> warnings;
  RunOptions opts;
  opts.warnings = &warnings;
  opts.kappa = 0.1;
  run(pot, ctl, deterministic(1e-3, 0.01, v2(2.0, 0.0)), opts);
  EXPECT_EQ(warnings.size(), 2u);
}

TEST(Run, BitIdenticalCsv) {
  PaperCase pc;
  auto cfg = pc.sim(7);
  cfg.horizon = 0.1;
  const auto a = csv_of(run(pc.potential, pc.controller, cfg));
  const auto b = csv_of(run(pc.potential, pc.controller, cfg));
  EXPECT_EQ(a, b);
  cfg.seed = 8;
  EXPECT_NE(a, csv_of(run(pc.potential, pc.controller, cfg)));
}

TEST(Csv, Header) {
  EXPECT_EQ(csv_header(2), "t,y1,y2,err_norm,psi,u1,u2,Au1,Au2,z,sem1,sem2");
}
