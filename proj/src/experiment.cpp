#include <funnel/experiment.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace funnel {

using nlohmann::json;

namespace {

// --- config helpers -------------------------------------------------------

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path, "missing key '" + key + "'");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

double number_at(const json& j, const std::string& key, const std::string& path) {
  return number(require(j, key, path), path + "." + key);
}

double number_or(const json& j, const std::string& key, double fallback, const std::string& path) {
  auto it = j.find(key);
  return it == j.end() ? fallback : number(*it, path + "." + key);
}

std::string string_at(const json& j, const std::string& key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

Vec vector_of(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

Mat matrix_of(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Mat m;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vec row = vector_of(j[static_cast<std::size_t>(r)], path + "[" + std::to_string(r) + "]");
    if (r == 0) m.resize(rows, row.size());
    if (row.size() != m.cols()) fail(path, "rows have different lengths");
    m.row(r) = row.transpose();
  }
  return m;
}

// Wraps constructors that validate with std::invalid_argument.
template <class F>
auto checked(const std::string& path, F&& make) {
  try {
    return make();
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  } catch (const std::domain_error& e) {
    fail(path, e.what());
  }
}

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

std::string fmt(double v, int digits = 10) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// --- worker pool ----------------------------------------------------------

void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& body) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto drain = [&] {
    for (std::size_t k = next++; k < count; k = next++) {
      try {
        body(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(drain);
    drain();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

SweepSpec::Variable parse_sweep_variable(const std::string& name) {
  if (name == "C_x" || name == "cx") return SweepSpec::Variable::cx;
  if (name == "a") return SweepSpec::Variable::a;
  if (name == "alpha") return SweepSpec::Variable::alpha;
  if (name == "psi") return SweepSpec::Variable::psi;
  throw ConfigError("sweep variable must be one of C_x, a, alpha, psi (got '" + name + "')");
}

const char* sweep_variable_name(SweepSpec::Variable v) {
  switch (v) {
    case SweepSpec::Variable::cx: return "C_x";
    case SweepSpec::Variable::a: return "a";
    case SweepSpec::Variable::alpha: return "alpha";
    case SweepSpec::Variable::psi: return "psi";
  }
  return "?";
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ":" + line_col(text, e.byte) + ": " + e.what());
  }
  if (!root.is_object()) throw ConfigError(source + ": top level must be an object");

  ExperimentConfig cfg;
  cfg.source = source;

  // potential
  const auto& pot = require(root, "potential", "config");
  const std::string family = string_at(pot, "family", "potential");
  if (family == "double_well") {
    const double cx = number_at(pot, "C_x", "potential");
    const double cy = number_at(pot, "C_y", "potential");
    const double radius = number_at(pot, "R", "potential");
    cfg.potential = checked("potential", [&] { return PotentialModel::double_well(cx, cy, radius); });
  } else if (family == "quadratic") {
    Mat S = matrix_of(require(pot, "S", "potential"), "potential.S");
    Vec b = pot.contains("b") ? vector_of(pot["b"], "potential.b") : Vec::Zero(S.rows());
    const double f = number_or(pot, "f", 0.0, "potential");
    cfg.potential = checked("potential", [&] { return PotentialModel::quadratic(S, b, f); });
    if (pot.contains("c3")) cfg.c3 = number(pot["c3"], "potential.c3");
  } else if (family == "zero") {
    const double dim = number_at(pot, "dim", "potential");
    if (dim < 1 || dim != std::floor(dim)) fail("potential.dim", "expected a positive integer");
    cfg.potential = PotentialModel::zero(static_cast<int>(dim));
  } else {
    fail("potential.family", "unsupported family '" + family + "' (double_well, quadratic, zero)");
  }
  const int d = cfg.potential.dim();

  // controller
  const auto& ctl = require(root, "controller", "config");
  if (ctl.contains("A")) {
    cfg.A = matrix_of(ctl["A"], "controller.A");
    if (cfg.A.rows() != d || cfg.A.cols() != d) fail("controller.A", "must be " + std::to_string(d) + "x" + std::to_string(d));
    Eigen::SelfAdjointEigenSolver<Mat> eig(cfg.A, Eigen::EigenvaluesOnly);
    cfg.a = eig.eigenvalues().maxCoeff();
  } else {
    cfg.a = number_at(ctl, "a", "controller");
    if (!(cfg.a > 0.0)) fail("controller.a", "must be positive");
    cfg.A = cfg.a * Mat::Identity(d, d);
  }
  const auto& alpha = require(ctl, "alpha", "controller");
  if (alpha.is_string()) {
    if (alpha.get<std::string>() != "solve") fail("controller.alpha", "expected a number or \"solve\"");
  } else {
    cfg.alpha = number(alpha, "controller.alpha");
    if (!(*cfg.alpha > 0.0)) fail("controller.alpha", "must be positive");
  }
  cfg.p = number_or(ctl, "p", 0.5, "controller");
  if (!(cfg.p > 0.0 && cfg.p < 1.0)) fail("controller.p", "must lie in (0, 1)");
  const auto& fun = require(ctl, "funnel", "controller");
  const std::string fkind = string_at(fun, "kind", "controller.funnel");
  if (fkind == "constant") {
    const double v = number_at(fun, "value", "controller.funnel");
    cfg.funnel = checked("controller.funnel", [&] { return FunnelSpec::constant(v); });
  } else if (fkind == "exponential") {
    const double psi0 = number_at(fun, "psi0", "controller.funnel");
    const double psi_inf = number_at(fun, "psi_inf", "controller.funnel");
    const double decay = number_at(fun, "decay", "controller.funnel");
    cfg.funnel = checked("controller.funnel", [&] { return FunnelSpec::exponential(psi0, psi_inf, decay); });
  } else {
    fail("controller.funnel.kind", "expected constant or exponential");
  }

  // reference
  const auto& ref = require(root, "reference", "config");
  const std::string rkind = string_at(ref, "kind", "reference");
  if (rkind == "figure_eight") {
    const double period = number_at(ref, "period", "reference");
    cfg.reference = checked("reference", [&] { return ReferenceSignal::figure_eight(period); });
  } else if (rkind == "constant") {
    Vec v = vector_of(require(ref, "value", "reference"), "reference.value");
    cfg.reference = checked("reference", [&] { return ReferenceSignal::constant(v); });
  } else if (rkind == "zero") {
    cfg.reference = ReferenceSignal::zero(d);
  } else {
    fail("reference.kind", "expected figure_eight, constant or zero");
  }
  if (cfg.reference.dim() != d) fail("reference", "dimension does not match the potential");

  // simulation
  if (root.contains("simulation")) {
    const auto& sim = root["simulation"];
    const std::string sp = "simulation";
    const double n = number_or(sim, "N", 20, sp);
    if (n < 1 || n != std::floor(n)) fail("simulation.N", "expected a positive integer");
    cfg.sim.ensemble_size = static_cast<int>(n);
    cfg.sim.dt = number_or(sim, "dt", 1e-4, sp);
    cfg.sim.horizon = number_or(sim, "T", 1.0, sp);
    cfg.sim.noise_scale = number_or(sim, "noise_scale", std::numbers::sqrt2, sp);
    if (sim.contains("seeds")) {
      const auto& seeds = sim["seeds"];
      if (!seeds.is_array() || seeds.empty()) fail("simulation.seeds", "expected a non-empty array of integers");
      cfg.seeds.clear();
      for (const auto& s : seeds) {
        if (!s.is_number_unsigned()) fail("simulation.seeds", "seeds must be non-negative integers");
        cfg.seeds.push_back(s.get<std::uint64_t>());
      }
    }
    if (sim.contains("initial")) {
      const auto& init = sim["initial"];
      const std::string ikind = string_at(init, "kind", "simulation.initial");
      Vec mean = vector_of(require(init, "mean", "simulation.initial"), "simulation.initial.mean");
      if (mean.size() != d) fail("simulation.initial.mean", "dimension does not match the potential");
      if (ikind == "point") {
        cfg.sim.initial = InitialCondition::point(mean);
      } else if (ikind == "gaussian") {
        cfg.sim.initial = InitialCondition::gaussian(mean, matrix_of(require(init, "covariance", "simulation.initial"),
                                                                     "simulation.initial.covariance"));
      } else {
        fail("simulation.initial.kind", "expected point or gaussian");
      }
    }
    try {
      cfg.sim.validate();
    } catch (const std::invalid_argument& e) {
      fail("simulation", e.what());
    }
  }
  if (cfg.sim.initial.mean.size() == 0) cfg.sim.initial = InitialCondition::point(cfg.reference(0.0).y);

  // output
  if (root.contains("output")) {
    const auto& out = root["output"];
    if (out.contains("directory")) cfg.output_dir = string_at(out, "directory", "output");
    if (out.contains("csv")) {
      if (!out["csv"].is_boolean()) fail("output.csv", "expected true or false");
      cfg.write_csv = out["csv"].get<bool>();
    }
    if (out.contains("format")) {
      cfg.report_format = string_at(out, "format", "output");
      if (cfg.report_format != "text" && cfg.report_format != "json") fail("output.format", "expected text or json");
    }
  }

  // sweep
  if (root.contains("sweep")) {
    const auto& sw = root["sweep"];
    SweepSpec parsed;
    try {
      parsed.variable = parse_sweep_variable(string_at(sw, "variable", "sweep"));
    } catch (const ConfigError& e) {
      fail("sweep.variable", e.what());
    }
    parsed.from = number_at(sw, "from", "sweep");
    parsed.to = number_at(sw, "to", "sweep");
    const double pts = number_at(sw, "points", "sweep");
    if (pts < 1 || pts != std::floor(pts)) fail("sweep.points", "expected a positive integer");
    parsed.points = static_cast<int>(pts);
    cfg.sweep = parsed;
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

CertificateReport certify_config(const ExperimentConfig& cfg, bool compute_interval) {
  CertifyRequest req;
  req.a = cfg.a;
  req.alpha = cfg.alpha;
  req.p = cfg.p;
  req.c3 = cfg.c3;
  req.compute_interval = compute_interval;
  auto report = certify(cfg.potential, cfg.funnel, cfg.reference, req);
  const Mat scaled = cfg.a * Mat::Identity(cfg.A.rows(), cfg.A.cols());
  if (!cfg.A.isApprox(scaled)) {
    report.notes.push_back("A is not a multiple of the identity; growth constants were derived for A = a I");
    report.certified = false;
  }
  return report;
}

ControllerConfig resolve_controller(const ExperimentConfig& cfg, const CertificateReport& report) {
  const auto alpha = cfg.alpha ? cfg.alpha : report.alpha;
  if (!alpha) throw ConfigError("controller.alpha: cannot be solved for this potential; give a number");
  return ControllerConfig(*alpha, cfg.A, cfg.funnel, cfg.reference);
}

RunSummary summarize(const SimulationRecord& record, std::uint64_t seed) {
  RunSummary s;
  s.seed = seed;
  s.rows = record.size();
  s.aborted = record.aborted;
  s.min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < record.size(); ++k) {
    s.max_error = std::max(s.max_error, record.error_norm[k]);
    s.min_margin = std::min(s.min_margin, record.psi[k] - record.error_norm[k]);
    s.max_weighted_control = std::max(s.max_weighted_control, record.weighted_u[k].norm());
    if (record.error_norm[k] >= record.psi[k]) ++s.funnel_exits;
  }
  return s;
}

SimulationRecord read_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw ConfigError("empty CSV");
  const auto columns = static_cast<int>(std::count(header.begin(), header.end(), ',')) + 1;
  // t, y*d, err_norm, psi, u*d, Au*d, z, sem*d
  if ((columns - 4) % 4 != 0 || columns < 8) throw ConfigError("CSV header has an unexpected column count");
  const int d = (columns - 4) / 4;
  if (header != csv_header(d)) throw ConfigError("CSV header does not match the record schema: " + header);

  SimulationRecord rec;
  rec.dim = d;
  std::string line;
  std::vector<double> f(static_cast<std::size_t>(columns));
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const char* p = line.c_str();
    for (int c = 0; c < columns; ++c) {
      char* end = nullptr;
      f[static_cast<std::size_t>(c)] = std::strtod(p, &end);
      if (end == p) throw ConfigError("malformed CSV row: " + line);
      p = *end == ',' ? end + 1 : end;
    }
    auto vec = [&](int offset) {
      Vec v(d);
      for (int j = 0; j < d; ++j) v[j] = f[static_cast<std::size_t>(offset + j)];
      return v;
    };
    rec.t.push_back(f[0]);
    rec.mean.push_back(vec(1));
    rec.error_norm.push_back(f[static_cast<std::size_t>(1 + d)]);
    rec.psi.push_back(f[static_cast<std::size_t>(2 + d)]);
    rec.u.push_back(vec(3 + d));
    rec.weighted_u.push_back(vec(3 + 2 * d));
    rec.lyapunov.push_back(f[static_cast<std::size_t>(3 + 3 * d)]);
    rec.sem.push_back(vec(4 + 3 * d));
    if (rec.error_norm.back() >= rec.psi.back()) ++rec.funnel_exits;
  }
  return rec;
}

void print_certificate(const CertificateReport& r, std::ostream& os, bool integer_endpoints) {
  auto line = [&](const ConditionCheck& c) {
    os << "condition." << c.name << " = " << fmt(c.lhs) << " " << c.op << " " << fmt(c.rhs)
       << "  margin=" << fmt(c.margin()) << "  " << (c.pass ? "PASS" : "FAIL") << '\n';
  };
  os << "family = " << r.family << '\n';
  os << "a = " << fmt(r.a) << '\n';
  os << "p = " << fmt(r.p) << '\n';
  os << "psi_sup = " << fmt(r.signals.psi_sup) << "\npsi_dot_sup = " << fmt(r.signals.psi_dot_sup)
     << "\nq = " << fmt(r.signals.q) << '\n';
  os << "yref_sup = " << fmt(r.signals.yref_sup) << "\nyref_dot_sup = " << fmt(r.signals.yref_dot_sup) << '\n';
  os << "c1 = " << fmt(r.constants.c1) << "\nc2 = " << fmt(r.constants.c2) << "\nc3 = " << fmt(r.constants.c3)
     << "\nc4 = " << fmt(r.constants.c4) << '\n';
  if (r.r_conditions) {
    os << "radius.applicable = " << (r.r_conditions->applicable ? "yes" : "no") << '\n';
    for (const auto& c : r.r_conditions->checks()) line(c);
  }
  for (const auto& c : r.double_well_checks) line(c);
  line(r.main_condition);
  if (r.alpha) os << "alpha = " << fmt(r.alpha.value()) << (r.alpha_solved ? " (solved)" : " (given)") << '\n';
  if (r.p_effective) {
    os << "p_effective = " << fmt(*r.p_effective) << '\n';
    line(r.gain_balance);
  }
  if (r.main_condition_effective) {
    os << "at p_effective: ";
    line(*r.main_condition_effective);
  }
  if (r.v_zero) {
    os << "v_zero.best_p = " << fmt(r.v_zero->best_p) << '\n';
    line(r.v_zero->best);
  }
  os << "kappa = " << (r.kappa ? fmt(*r.kappa) : std::string("undefined")) << '\n';
  if (r.interval) {
    const auto& iv = *r.interval;
    os << "bound.lower_dissipativity = " << fmt(iv.lower_dissipativity) << '\n';
    os << "bound.lower_c1_simplification = " << fmt(iv.lower_c1_simplification) << '\n';
    os << "bound.upper_dissipativity = " << fmt(iv.upper_dissipativity) << '\n';
    os << "bound.upper_gradient = " << fmt(iv.upper_gradient) << '\n';
    if (iv.tracking_low) os << "bound.tracking_low = " << fmt(*iv.tracking_low) << '\n';
    if (iv.tracking_high) os << "bound.tracking_high = " << fmt(*iv.tracking_high) << '\n';
    if (iv.empty) {
      os << "interval = empty\n";
    } else if (integer_endpoints) {
      os << "interval = [" << fmt(std::ceil(iv.a_min)) << ", " << fmt(std::floor(iv.a_max)) << "]\n";
    } else {
      os << "interval = [" << fmt(iv.a_min) << ", " << fmt(iv.a_max) << "]\n";
    }
    for (const auto& d : iv.diagnostics) os << "interval.diagnostic = " << d << '\n';
  }
  for (const auto& n : r.notes) os << "note = " << n << '\n';
  os << "certified = " << (r.certified ? "yes" : "no") << '\n';
}

namespace {

json certificate_json(const CertificateReport& r) {
  auto cond = [](const ConditionCheck& c) {
    return json{{"name", c.name}, {"lhs", c.lhs}, {"op", c.op}, {"rhs", c.rhs}, {"margin", c.margin()}, {"pass", c.pass}};
  };
  json j;
  j["family"] = r.family;
  j["a"] = r.a;
  j["p"] = r.p;
  j["constants"] = {{"c1", r.constants.c1}, {"c2", r.constants.c2}, {"c3", r.constants.c3}, {"c4", r.constants.c4}};
  j["conditions"] = json::array();
  if (r.r_conditions)
    for (const auto& c : r.r_conditions->checks()) j["conditions"].push_back(cond(c));
  for (const auto& c : r.double_well_checks) j["conditions"].push_back(cond(c));
  j["conditions"].push_back(cond(r.main_condition));
  if (r.main_condition_effective) j["conditions"].push_back(cond(*r.main_condition_effective));
  if (r.v_zero) j["conditions"].push_back(cond(r.v_zero->best));
  if (r.alpha) j["alpha"] = *r.alpha;
  if (r.p_effective) j["p_effective"] = *r.p_effective;
  if (r.kappa) j["kappa"] = *r.kappa;
  if (r.interval && !r.interval->empty) j["interval"] = {r.interval->a_min, r.interval->a_max};
  j["notes"] = r.notes;
  j["certified"] = r.certified;
  return j;
}

std::filesystem::path output_dir(const ExperimentConfig& cfg, const CommandOptions& opts) {
  return opts.out_dir ? *opts.out_dir : cfg.output_dir;
}

}  // namespace

int cmd_certify(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out) {
  const auto report = certify_config(cfg);
  std::ostringstream text;
  if (cfg.report_format == "json") {
    text << certificate_json(report).dump(2) << '\n';
  } else {
    print_certificate(report, text, opts.integer_endpoints);
  }
  if (!opts.quiet) out << text.str();
  const auto dir = output_dir(cfg, opts);
  std::filesystem::create_directories(dir);
  std::ofstream(dir / (cfg.report_format == "json" ? "certificate.json" : "certificate.txt")) << text.str();
  if (opts.report_only) return kExitOk;
  return report.certified ? kExitOk : kExitConditionFailed;
}

SimulateResult simulate(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out) {
  SimulateResult result;
  result.certificate = certify_config(cfg, false);
  const ControllerConfig controller = resolve_controller(cfg, result.certificate);
  if (!result.certificate.certified)
    result.warnings.push_back("running uncertified parameters: no tracking guarantee");

  const auto seeds = opts.seeds ? *opts.seeds : cfg.seeds;
  const auto dir = output_dir(cfg, opts);
  std::filesystem::create_directories(dir);

  result.summaries.resize(seeds.size());
  if (cfg.write_csv) result.csv_files.resize(seeds.size());
  std::vector<std::vector<std::string>> warnings(seeds.size());

  parallel_for(seeds.size(), opts.workers, [&](std::size_t k) {
    SimConfig sim = cfg.sim;
    sim.seed = seeds[k];
    RunOptions ro;
    ro.warnings = &warnings[k];
    ro.kappa = result.certificate.kappa.value_or(std::numeric_limits<double>::infinity());
    const auto start = std::chrono::steady_clock::now();
    const SimulationRecord rec = run(cfg.potential, controller, sim, ro);
    const auto stop = std::chrono::steady_clock::now();
    auto summary = summarize(rec, seeds[k]);
    summary.wall_seconds = std::chrono::duration<double>(stop - start).count();
    if (rec.aborted) warnings[k].push_back("seed " + std::to_string(seeds[k]) + " aborted: " + rec.abort_reason);
    if (cfg.write_csv) {
      const auto path = dir / ("run_seed" + std::to_string(seeds[k]) + ".csv");
      std::ofstream os(path);
      write_csv(rec, os);
      result.csv_files[k] = path;
    }
    result.summaries[k] = summary;
  });

  for (std::size_t k = 0; k < seeds.size(); ++k)
    for (auto& w : warnings[k]) {
      if (std::find(result.warnings.begin(), result.warnings.end(), w) == result.warnings.end())
        result.warnings.push_back(std::move(w));
    }

  std::ostringstream csv;
  csv << "seed,max_err_norm,min_funnel_margin,max_Au_norm,funnel_exits,rows,aborted,wall_seconds,certified\n";
  std::ostringstream text;
  text << "alpha = " << fmt(controller.alpha()) << "\na = " << fmt(controller.a()) << "\ncertified = "
       << (result.certificate.certified ? "yes" : "no") << '\n';
  for (const auto& s : result.summaries) {
    csv << s.seed << ',' << fmt(s.max_error, 17) << ',' << fmt(s.min_margin, 17) << ',' << fmt(s.max_weighted_control, 17)
        << ',' << s.funnel_exits << ',' << s.rows << ',' << (s.aborted ? 1 : 0) << ',' << fmt(s.wall_seconds, 6) << ','
        << (result.certificate.certified ? 1 : 0) << '\n';
    text << "seed " << s.seed << ": max|e| = " << fmt(s.max_error, 6) << "  min margin = " << fmt(s.min_margin, 6)
         << "  max|Au| = " << fmt(s.max_weighted_control, 6) << "  exits = " << s.funnel_exits
         << (s.aborted ? "  ABORTED" : "") << "  (" << fmt(s.wall_seconds, 3) << " s)\n";
    if (s.aborted || s.funnel_exits > 0) result.exit_code = kExitConditionFailed;
  }
  for (const auto& w : result.warnings) text << "warning: " << w << '\n';
  std::ofstream(dir / "summary.csv") << csv.str();
  std::ofstream(dir / "summary.txt") << text.str();
  if (!opts.quiet) out << text.str();
  return result;
}

int cmd_simulate(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out) {
  return simulate(cfg, opts, out).exit_code;
}

std::vector<SweepRow> sweep(const ExperimentConfig& base, const SweepSpec& grid, unsigned workers) {
  if (grid.points < 1) throw ConfigError("sweep.points must be >= 1");
  if (grid.variable == SweepSpec::Variable::cx && !std::holds_alternative<DoubleWellPotential>(base.potential.family()))
    throw ConfigError("sweep over C_x needs the double_well potential");
  std::vector<SweepRow> rows(static_cast<std::size_t>(grid.points));

  parallel_for(rows.size(), workers, [&](std::size_t k) {
    ExperimentConfig cfg = base;
    const double v = grid.value(static_cast<int>(k));
    SweepRow& row = rows[k];
    row.param = sweep_variable_name(grid.variable);
    row.value = v;
    switch (grid.variable) {
      case SweepSpec::Variable::cx: {
        const auto& dw = std::get<DoubleWellPotential>(base.potential.family());
        cfg.potential = PotentialModel::double_well(v, dw.cy, dw.radius);
        break;
      }
      case SweepSpec::Variable::a:
        cfg.a = v;
        cfg.A = v * Mat::Identity(base.A.rows(), base.A.cols());
        break;
      case SweepSpec::Variable::alpha:
        cfg.alpha = v;
        break;
      case SweepSpec::Variable::psi:
        cfg.funnel = FunnelSpec::constant(v);
        break;
    }
    auto report = certify_config(cfg, true);
    if (report.interval) {
      row.empty = report.interval->empty;
      row.a_min = report.interval->a_min;
      row.a_max = report.interval->a_max;
      // Along C_x the interesting setting is the minimal certified strength.
      if (grid.variable == SweepSpec::Variable::cx && !row.empty) {
        cfg.a = row.a_min;
        cfg.A = row.a_min * Mat::Identity(base.A.rows(), base.A.cols());
        report = certify_config(cfg, false);
      }
    }
    row.a = cfg.a;
    row.alpha = report.alpha.value_or(std::nan(""));
    row.p = report.p_effective.value_or(cfg.p);
    const auto& main = report.main_condition_effective ? *report.main_condition_effective : report.main_condition;
    row.lhs = main.lhs;
    row.rhs = main.rhs;
    row.condition_pass = main.pass;
    row.kappa = report.kappa.value_or(std::nan(""));
    row.certified = report.certified;
  });
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os) {
  os << "param,value,a_min,a_max,empty,a,alpha,p,lhs,rhs,condition_pass,kappa,certified\n";
  for (const auto& r : rows) {
    os << r.param << ',' << fmt(r.value, 17) << ',';
    if (r.empty) {
      os << "nan,nan,1,";
    } else {
      os << fmt(r.a_min, 17) << ',' << fmt(r.a_max, 17) << ",0,";
    }
    os << fmt(r.a, 17) << ',' << fmt(r.alpha, 17) << ',' << fmt(r.p, 17) << ',' << fmt(r.lhs, 17) << ','
       << fmt(r.rhs, 17) << ',' << (r.condition_pass ? 1 : 0) << ',' << fmt(r.kappa, 17) << ','
       << (r.certified ? 1 : 0) << '\n';
  }
}

int cmd_sweep(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out) {
  const auto grid = opts.sweep ? opts.sweep : cfg.sweep;
  if (!grid) throw ConfigError("no sweep specification (config 'sweep' block or --var/--from/--to/--points)");
  const auto rows = sweep(cfg, *grid, opts.workers);
  const auto dir = output_dir(cfg, opts);
  std::filesystem::create_directories(dir);
  const auto path = dir / (std::string("sweep_") + sweep_variable_name(grid->variable) + ".csv");
  std::ofstream os(path);
  write_sweep_csv(rows, os);
  if (!opts.quiet) {
    write_sweep_csv(rows, out);
    out << "wrote " << path.string() << '\n';
  }
  return kExitOk;
}

}  // namespace funnel
