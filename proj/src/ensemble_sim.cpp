#include <funnel/ensemble_sim.hpp>

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace funnel {

void SimConfig::validate() const {
  if (ensemble_size < 1) throw std::invalid_argument("ensemble size must be >= 1");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
  if (!(horizon >= dt) || !std::isfinite(horizon)) throw std::invalid_argument("need 0 < dt <= T");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) throw std::invalid_argument("noise scale must be >= 0");
}

long SimConfig::steps() const {
  const double ratio = horizon / dt;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio)) return static_cast<long>(nearest);
  return static_cast<long>(std::ceil(ratio));
}

double SimConfig::time_at(long k) const {
  const long n = steps();
  return k >= n ? horizon : static_cast<double>(k) * dt;
}

NoiseSource::NoiseSource(std::uint64_t seed, int ensemble_size) {
  engines_.reserve(static_cast<std::size_t>(ensemble_size));
  normal_.resize(static_cast<std::size_t>(ensemble_size));
  const auto lo = static_cast<std::uint32_t>(seed & 0xffffffffu);
  const auto hi = static_cast<std::uint32_t>(seed >> 32);
  for (int i = 0; i < ensemble_size; ++i) {
    std::seed_seq seq{lo, hi, static_cast<std::uint32_t>(i + 1)};
    engines_.emplace_back(seq);
  }
}

void NoiseSource::fill(Eigen::Ref<Mat> xi) {
  for (Eigen::Index i = 0; i < xi.cols(); ++i) {
    auto& engine = engines_[static_cast<std::size_t>(i)];
    auto& normal = normal_[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < xi.rows(); ++j) xi(j, i) = normal(engine);
  }
}

EnsembleState init_ensemble(const SimConfig& cfg, int dim, NoiseSource& noise) {
  cfg.validate();
  const auto& ic = cfg.initial;
  if (ic.mean.size() != dim) throw std::invalid_argument("initial mean has the wrong dimension");
  if (!ic.mean.allFinite()) throw std::invalid_argument("initial mean must be finite");
  EnsembleState state;
  state.t = 0.0;
  state.X = ic.mean.replicate(1, cfg.ensemble_size);
  if (ic.kind == InitialCondition::Kind::point) return state;

  const Mat& cov = ic.covariance;
  if (cov.rows() != dim || cov.cols() != dim) throw std::invalid_argument("covariance has the wrong shape");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::invalid_argument("covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
  const Vec& lambda = eig.eigenvalues();
  if (lambda.minCoeff() < -1e-12 * std::max(1.0, lambda.maxCoeff()))
    throw std::invalid_argument("covariance is not positive semidefinite");
  const Mat root = eig.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();

  Vec z(dim);
  for (int i = 0; i < cfg.ensemble_size; ++i) {
    for (int j = 0; j < dim; ++j) z[j] = noise.draw(i);
    state.X.col(i) += root * z;
  }
  return state;
}

EnsembleState init_ensemble(const SimConfig& cfg, int dim) {
  NoiseSource noise(cfg.seed, cfg.ensemble_size);
  return init_ensemble(cfg, dim, noise);
}

EnsembleIntegrator::EnsembleIntegrator(const PotentialModel& potential, const ControllerConfig& controller,
                                       const SimConfig& cfg)
    : potential_(potential), controller_(controller), noise_scale_(cfg.noise_scale) {
  if (potential.dim() != controller.dim()) throw std::invalid_argument("potential and controller dimensions differ");
  const int d = potential.dim();
  grad_.resize(d, cfg.ensemble_size);
  xi_.resize(d, cfg.ensemble_size);
  values_.resize(cfg.ensemble_size);
  scratch_.resize(d);
}

StepObservation EnsembleIntegrator::observe(const EnsembleState& state) {
  const Eigen::Index n = state.X.cols();
  const Mat& A = controller_.A();
  for (Eigen::Index i = 0; i < n; ++i) {
    auto x = state.X.col(i);
    const double v = potential_.value_and_gradient(x, grad_.col(i));
    scratch_.noalias() = A * x;
    values_[i] = v + 0.5 * x.dot(scratch_);
  }

  StepObservation obs;
  obs.mean = state.X.rowwise().mean();
  obs.mean_grad = grad_.rowwise().mean();
  obs.lyapunov = values_.mean();
  if (n > 1) {
    const double norm = 1.0 / std::sqrt(static_cast<double>(n) * static_cast<double>(n - 1));
    obs.sem = (state.X.colwise() - obs.mean).rowwise().norm() * norm;
    obs.lyapunov_sem = (values_.array() - obs.lyapunov).matrix().norm() * norm;
  } else {
    obs.sem = Vec::Zero(state.X.rows());
    obs.lyapunov_sem = 0.0;
  }
  if (!obs.mean.allFinite()) throw BlowUpError("non-finite ensemble mean at t = " + std::to_string(state.t));
  obs.control = control(controller_, state.t, obs.mean);
  obs.weighted_control = A * obs.control.u;
  return obs;
}

void EnsembleIntegrator::advance(EnsembleState& state, const Vec& u, double dt, NoiseSource& noise) {
  const Mat& A = controller_.A();
  const Vec Au = A * u;
  // grad_ holds grad V at the current state from observe().
  grad_.noalias() += A * state.X;
  state.X -= dt * (grad_.colwise() - Au);
  if (noise_scale_ > 0.0) {
    noise.fill(xi_);
    state.X += (noise_scale_ * std::sqrt(dt)) * xi_;
  }
  state.t += dt;
  if (!state.X.allFinite()) throw BlowUpError("non-finite state after step ending at t = " + std::to_string(state.t));
}

StepObservation EnsembleIntegrator::step(EnsembleState& state, double dt, NoiseSource& noise) {
  auto obs = observe(state);
  advance(state, obs.control.u, dt, noise);
  return obs;
}

SimulationRecord run(const PotentialModel& potential, const ControllerConfig& controller, const SimConfig& cfg,
                     const RunOptions& options) {
  cfg.validate();
  const int d = potential.dim();
  NoiseSource noise(cfg.seed, cfg.ensemble_size);
  EnsembleState state = init_ensemble(cfg, d, noise);
  EnsembleIntegrator integrator(potential, controller, cfg);

  const long n = cfg.steps();
  SimulationRecord rec;
  rec.dim = d;
  const auto rows = static_cast<std::size_t>(n + 1);
  rec.t.reserve(rows);
  rec.mean.reserve(rows);
  rec.error_norm.reserve(rows);
  rec.psi.reserve(rows);
  rec.u.reserve(rows);
  rec.weighted_u.reserve(rows);
  rec.lyapunov.reserve(rows);
  rec.sem.reserve(rows);
  rec.mean_grad.reserve(rows);
  rec.lyapunov_sem.reserve(rows);

  try {
    for (long k = 0; k <= n; ++k) {
      state.t = cfg.time_at(k);
      StepObservation obs = integrator.observe(state);
      if (k == 0 && options.warnings) {
        if (!obs.control.inside)
          options.warnings->push_back("initial tracking error is outside the funnel; no tracking guarantee");
        if (obs.lyapunov > options.kappa)
          options.warnings->push_back("initial observable z(0) exceeds kappa; certificate does not apply");
      }
      rec.t.push_back(state.t);
      rec.error_norm.push_back(obs.control.error_norm);
      rec.psi.push_back(obs.control.psi);
      if (!obs.control.inside) ++rec.funnel_exits;
      rec.lyapunov.push_back(obs.lyapunov);
      rec.lyapunov_sem.push_back(obs.lyapunov_sem);
      rec.u.push_back(obs.control.u);
      rec.weighted_u.push_back(std::move(obs.weighted_control));
      rec.mean.push_back(std::move(obs.mean));
      rec.sem.push_back(std::move(obs.sem));
      rec.mean_grad.push_back(std::move(obs.mean_grad));
      if (k < n) integrator.advance(state, rec.u.back(), cfg.time_at(k + 1) - cfg.time_at(k), noise);
    }
  } catch (const BlowUpError& err) {
    rec.aborted = true;
    rec.abort_reason = err.what();
  }
  return rec;
}

std::string csv_header(int dim) {
  std::ostringstream os;
  os << "t";
  for (int j = 1; j <= dim; ++j) os << ",y" << j;
  os << ",err_norm,psi";
  for (int j = 1; j <= dim; ++j) os << ",u" << j;
  for (int j = 1; j <= dim; ++j) os << ",Au" << j;
  os << ",z";
  for (int j = 1; j <= dim; ++j) os << ",sem" << j;
  return os.str();
}

void write_csv(const SimulationRecord& record, std::ostream& os) {
  os << csv_header(record.dim) << '\n';
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  auto put_vec = [&](const Vec& v) {
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      os << ',';
      put(v[j]);
    }
  };
  for (std::size_t k = 0; k < record.size(); ++k) {
    put(record.t[k]);
    put_vec(record.mean[k]);
    os << ',';
    put(record.error_norm[k]);
    os << ',';
    put(record.psi[k]);
    put_vec(record.u[k]);
    put_vec(record.weighted_u[k]);
    os << ',';
    put(record.lyapunov[k]);
    put_vec(record.sem[k]);
    os << '\n';
  }
}

ResidualSeries mean_ode_residual(const SimulationRecord& record, const ControllerConfig& controller,
                                 DifferenceStencil stencil) {
  const std::size_t n = record.size();
  if (n < 3) throw std::invalid_argument("mean-ODE residual needs at least 3 recorded steps");
  if (record.mean_grad.size() != n) throw std::invalid_argument("record lacks the empirical mean gradient");
  const Mat& A = controller.A();
  ResidualSeries out;
  double sum_sq = 0.0;
  Vec drift(record.dim);
  const std::size_t first = stencil == DifferenceStencil::central ? 1 : 0;
  for (std::size_t k = first; k + 1 < n; ++k) {
    const std::size_t back = stencil == DifferenceStencil::central ? k - 1 : k;
    const Vec slope = (record.mean[k + 1] - record.mean[back]) / (record.t[k + 1] - record.t[back]);
    drift.noalias() = -record.mean_grad[k] - A * record.mean[k];
    drift += record.weighted_u[k];
    const double r = (slope - drift).norm();
    out.t.push_back(record.t[k]);
    out.norm.push_back(r);
    out.max = std::max(out.max, r);
    sum_sq += r * r;
  }
  out.rms = std::sqrt(sum_sq / static_cast<double>(out.norm.size()));
  return out;
}

LyapunovCheck lyapunov_check(const SimulationRecord& record, double kappa) {
  LyapunovCheck out;
  out.margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < record.size(); ++k) {
    const double sem = k < record.lyapunov_sem.size() ? record.lyapunov_sem[k] : 0.0;
    const double slack = kappa + 3.0 * sem - record.lyapunov[k];
    out.max_observable = std::max(out.max_observable, record.lyapunov[k]);
    if (slack < out.margin) {
      out.margin = slack;
      out.t_worst = record.t[k];
    }
  }
  out.pass = record.size() > 0 && out.margin >= 0.0;
  return out;
}

}  // namespace funnel
