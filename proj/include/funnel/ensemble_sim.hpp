#pragma once

// Mean-field Euler-Maruyama integration of the funnel-controlled Langevin
// system. N trajectories evolve under
//
//   X^i <- X^i - (grad V(X^i) + A (X^i - u)) dt + sigma sqrt(dt) xi^i,
//
// where the single control u = u(t, mean_i X^i) is recomputed from the
// empirical mean at every step.

#include <funnel/funnel_controller.hpp>
#include <funnel/potentials.hpp>

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace funnel {

struct InitialCondition {
  enum class Kind { point, gaussian };
  Kind kind = Kind::point;
  Vec mean;
  Mat covariance;  // gaussian only

  static InitialCondition point(Vec at) { return {Kind::point, std::move(at), Mat()}; }
  static InitialCondition gaussian(Vec mean, Mat covariance) {
    return {Kind::gaussian, std::move(mean), std::move(covariance)};
  }
};

struct SimConfig {
  int ensemble_size = 20;
  double dt = 1e-4;
  double horizon = 1.0;
  std::uint64_t seed = 0;
  double noise_scale = std::numbers::sqrt2;
  InitialCondition initial;

  /// Throws std::invalid_argument on N < 1, dt outside (0, T] or a negative
  /// noise scale.
  void validate() const;
  /// Number of steps; the last one is shortened to land on T when T/dt is
  /// not an integer.
  long steps() const;
  double time_at(long k) const;
};

/// Trajectories stored column-wise: X.col(i) is trajectory i.
struct EnsembleState {
  double t = 0.0;
  Mat X;
};

/// Independent standard Gaussian streams, one per trajectory.
class NoiseSource {
 public:
  NoiseSource(std::uint64_t seed, int ensemble_size);

  double draw(int trajectory) { return normal_[trajectory](engines_[trajectory]); }
  /// Fills column i of `xi` from stream i.
  void fill(Eigen::Ref<Mat> xi);

 private:
  std::vector<std::mt19937_64> engines_;
  std::vector<std::normal_distribution<double>> normal_;
};

/// Samples X_0. Trajectory i uses stream i of `noise`, so the result depends
/// only on (seed, i, dim). Throws std::invalid_argument for a covariance that
/// is not symmetric positive semidefinite.
EnsembleState init_ensemble(const SimConfig& cfg, int dim, NoiseSource& noise);
/// Convenience overload with a fresh NoiseSource(cfg.seed, N).
EnsembleState init_ensemble(const SimConfig& cfg, int dim);

/// Ensemble statistics at the current state together with the control the
/// integrator applies next.
struct StepObservation {
  Vec mean;          // empirical mean y
  Vec mean_grad;     // empirical E[grad V]
  Vec sem;           // standard error of the mean per coordinate
  ControlOutput control;
  Vec weighted_control;  // A u
  double lyapunov = 0.0;      // mean of V(X^i) + 1/2 X^i^T A X^i
  double lyapunov_sem = 0.0;
};

class BlowUpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One explicit step with a shared control. Holds per-ensemble workspace so
/// the integration loop does not allocate.
class EnsembleIntegrator {
 public:
  EnsembleIntegrator(const PotentialModel& potential, const ControllerConfig& controller, const SimConfig& cfg);

  /// Statistics of `state` and the control computed from its mean. Caches
  /// the gradients for the following advance().
  StepObservation observe(const EnsembleState& state);

  /// Moves `state` forward by dt with the control from the preceding
  /// observe(). Throws BlowUpError on a non-finite update.
  void advance(EnsembleState& state, const Vec& u, double dt, NoiseSource& noise);

  /// observe() followed by advance().
  StepObservation step(EnsembleState& state, double dt, NoiseSource& noise);

 private:
  const PotentialModel& potential_;
  const ControllerConfig& controller_;
  double noise_scale_;
  Mat grad_;
  Mat xi_;
  Vec values_;
  Vec scratch_;
};

struct SimulationRecord {
  int dim = 0;
  std::vector<double> t;
  std::vector<Vec> mean;
  std::vector<double> error_norm;
  std::vector<double> psi;
  std::vector<Vec> u;
  std::vector<Vec> weighted_u;
  std::vector<double> lyapunov;
  std::vector<Vec> sem;
  // Kept in memory only (not part of the CSV schema).
  std::vector<Vec> mean_grad;
  std::vector<double> lyapunov_sem;
  bool aborted = false;
  std::string abort_reason;
  long funnel_exits = 0;  // rows with |e| >= psi

  std::size_t size() const { return t.size(); }
};

struct RunOptions {
  /// Warnings (initial error outside the funnel, z(0) > kappa) are appended here.
  std::vector<std::string>* warnings = nullptr;
  /// Bound from the certificate, used for the initial-observable warning.
  double kappa = std::numeric_limits<double>::infinity();
};

/// Integrates to the horizon and records one row per grid time. A blow-up
/// ends the run early with `aborted` set.
SimulationRecord run(const PotentialModel& potential, const ControllerConfig& controller, const SimConfig& cfg,
                     const RunOptions& options = {});

/// CSV with header t,y1..yd,err_norm,psi,u1..ud,Au1..Aud,z,sem1..semd and
/// 17 significant digits.
void write_csv(const SimulationRecord& record, std::ostream& os);
std::string csv_header(int dim);

struct ResidualSeries {
  std::vector<double> t;
  std::vector<double> norm;
  double max = 0.0;
  double rms = 0.0;
};

enum class DifferenceStencil { central, forward };

/// Residual of the mean-value equation  y' = -E[grad V] - A y + A u  along a
/// record, with dy/dt from finite differences of the stored means. Throws
/// std::invalid_argument for records with fewer than 3 rows.
ResidualSeries mean_ode_residual(const SimulationRecord& record, const ControllerConfig& controller,
                                 DifferenceStencil stencil = DifferenceStencil::central);

struct LyapunovCheck {
  bool pass = false;
  double max_observable = 0.0;
  /// min over t of (kappa + 3 SEM(t) - z(t)).
  double margin = 0.0;
  double t_worst = 0.0;
};

/// Passes iff z(t) <= kappa + 3 SEM_z(t) at every recorded time.
LyapunovCheck lyapunov_check(const SimulationRecord& record, double kappa);

}  // namespace funnel
