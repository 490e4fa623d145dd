#include <funnel/experiment.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace funnel;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(FUNNEL_SOURCE_DIR) / "configs";

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("funnel_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kDeterministic = R"({
  "potential": {"family": "zero", "dim": 2},
  "controller": {"a": 10, "alpha": 8, "funnel": {"kind": "constant", "value": 1.0}},
  "reference": {"kind": "zero"},
  "simulation": {"N": 1, "dt": 1e-3, "T": 0.5, "seeds": [1, 2, 3], "noise_scale": 0,
                 "initial": {"kind": "point", "mean": [0.5, 0.0]}}
})";

}  // namespace

TEST(Config, ShippedConfigsParse) {
  const auto cfg = load_config(kConfigs / "double_well_a606.json");
  EXPECT_EQ(cfg.a, 606.0);
  EXPECT_FALSE(cfg.alpha.has_value());
  EXPECT_EQ(cfg.seeds.size(), 10u);
  EXPECT_EQ(cfg.sim.ensemble_size, 20);
  EXPECT_DOUBLE_EQ(cfg.sim.dt, 1e-4);
  const auto a5 = load_config(kConfigs / "double_well_a5.json");
  EXPECT_EQ(a5.a, 5.0);
  ASSERT_TRUE(a5.alpha);
  const auto sw = load_config(kConfigs / "sweep_cx.json");
  ASSERT_TRUE(sw.sweep);
  EXPECT_EQ(sw.sweep->points, 11);
}

TEST(Config, SyntaxErrorHasLineAndColumn) {
  try {
    parse_config("{\n  \"potential\": {,\n}", "bad.json");
    FAIL() << "no exception";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.json:2:"), std::string::npos) << e.what();
  }
}

TEST(Config, SemanticErrorsNameTheKey) {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message(R"({"potential": {"family": "cubic"}})").find("potential.family"), std::string::npos);
  EXPECT_NE(message(R"({"potential": {"family": "double_well", "C_x": 1.5, "C_y": 3, "R": 1}})").find("potential"),
            std::string::npos);
  std::string no_alpha = kDeterministic;
  no_alpha.replace(no_alpha.find("\"alpha\": 8"), 10, "\"alpha\": \"x\"");
  EXPECT_NE(message(no_alpha).find("controller.alpha"), std::string::npos);
  std::string bad_dt = kDeterministic;
  bad_dt.replace(bad_dt.find("1e-3"), 4, "-1.0");
  EXPECT_NE(message(bad_dt).find("simulation"), std::string::npos);
  EXPECT_FALSE(message(R"({"controller": {}})").empty());
}

TEST(Config, DefaultsInitialToReference) {
  const auto cfg = parse_config(R"({
    "potential": {"family": "double_well", "C_x": 1.5, "C_y": 3, "R": 10},
    "controller": {"a": 606, "alpha": "solve", "funnel": {"kind": "constant", "value": 1}},
    "reference": {"kind": "figure_eight", "period": 0.5}})");
  EXPECT_EQ(cfg.sim.initial.mean, cfg.reference(0.0).y);
}

TEST(Certify, ExitCodes) {
  std::ostringstream out;
  CommandOptions opts;
  opts.out_dir = scratch("certify");
  EXPECT_EQ(cmd_certify(load_config(kConfigs / "double_well_a606.json"), opts, out), kExitOk);
  EXPECT_NE(out.str().find("interval = [606, 675.2677271]"), std::string::npos) << out.str();
  EXPECT_TRUE(fs::exists(*opts.out_dir / "certificate.txt"));

  std::ostringstream out5;
  EXPECT_EQ(cmd_certify(load_config(kConfigs / "double_well_a5.json"), opts, out5), kExitConditionFailed);
  EXPECT_NE(out5.str().find("condition.tracking_constant_funnel = 57.57029836 < 3.550234734"), std::string::npos)
      << out5.str();
  opts.report_only = true;
  EXPECT_EQ(cmd_certify(load_config(kConfigs / "double_well_a5.json"), opts, out5), kExitOk);
}

TEST(Certify, IntegerEndpoints) {
  std::ostringstream out;
  CommandOptions opts;
  opts.out_dir = scratch("certify_int");
  opts.integer_endpoints = true;
  cmd_certify(load_config(kConfigs / "double_well_a606.json"), opts, out);
  EXPECT_NE(out.str().find("interval = [606, 675]"), std::string::npos);
}

TEST(Simulate, SummaryRoundTrip) {
  auto cfg = load_config(kConfigs / "double_well_a606.json");
  cfg.sim.horizon = 0.2;
  CommandOptions opts;
  opts.out_dir = scratch("simulate");
  opts.seeds = std::vector<std::uint64_t>{1, 2, 3};
  opts.quiet = true;
  std::ostringstream out;
  const auto res = simulate(cfg, opts, out);
  EXPECT_EQ(res.exit_code, kExitOk);
  ASSERT_EQ(res.csv_files.size(), 3u);
  EXPECT_TRUE(fs::exists(*opts.out_dir / "summary.csv"));
  EXPECT_TRUE(fs::exists(*opts.out_dir / "summary.txt"));
  for (std::size_t k = 0; k < 3; ++k) {
    std::ifstream in(res.csv_files[k]);
    const auto rec = read_csv(in);
    const auto again = summarize(rec, res.summaries[k].seed);
    const auto& s = res.summaries[k];
    EXPECT_EQ(again.max_error, s.max_error);
    EXPECT_EQ(again.min_margin, s.min_margin);
    EXPECT_EQ(again.max_weighted_control, s.max_weighted_control);
    EXPECT_EQ(again.funnel_exits, s.funnel_exits);
    EXPECT_EQ(again.rows, s.rows);
    EXPECT_EQ(s.funnel_exits, 0);
  }
}

TEST(Simulate, UncertifiedRunWarns) {
  auto cfg = load_config(kConfigs / "double_well_a5.json");
  cfg.sim.horizon = 0.05;
  CommandOptions opts;
  opts.out_dir = scratch("simulate_a5");
  opts.seeds = std::vector<std::uint64_t>{1};
  opts.quiet = true;
  std::ostringstream out;
  const auto res = simulate(cfg, opts, out);
  EXPECT_FALSE(res.certificate.certified);
  EXPECT_FALSE(res.warnings.empty());
}

TEST(Simulate, DeterministicSeedsAgree) {
  auto cfg = parse_config(kDeterministic);
  CommandOptions opts;
  opts.out_dir = scratch("simulate_det");
  opts.quiet = true;
  std::ostringstream out;
  const auto res = simulate(cfg, opts, out);
  ASSERT_EQ(res.summaries.size(), 3u);
  EXPECT_EQ(read_file(res.csv_files[0]), read_file(res.csv_files[1]));
  EXPECT_EQ(res.summaries[0].max_error, res.summaries[2].max_error);
}

TEST(Simulate, ReproducibleAcrossInvocations) {
  auto cfg = load_config(kConfigs / "double_well_a606.json");
  cfg.sim.horizon = 0.1;
  CommandOptions opts;
  opts.seeds = std::vector<std::uint64_t>{5};
  opts.quiet = true;
  std::ostringstream out;
  opts.out_dir = scratch("repro1");
  const auto a = simulate(cfg, opts, out);
  opts.out_dir = scratch("repro2");
  opts.workers = 1;
  const auto b = simulate(cfg, opts, out);
  EXPECT_EQ(read_file(a.csv_files[0]), read_file(b.csv_files[0]));
}

TEST(ReadCsv, RejectsForeignSchema) {
  std::istringstream in("t,x,y\n0,1,2\n");
  EXPECT_THROW(read_csv(in), ConfigError);
}

TEST(Sweep, CxRows) {
  const auto cfg = load_config(kConfigs / "sweep_cx.json");
  const auto rows = sweep(cfg, *cfg.sweep);
  ASSERT_EQ(rows.size(), 11u);
  for (const auto& r : rows) {
    EXPECT_FALSE(r.empty);
    EXPECT_NEAR(r.a_min, 404.0 * r.value, 1e-9 * r.a_min);
    EXPECT_GT(r.a_max, r.a_min);
    EXPECT_TRUE(r.certified);
  }
  EXPECT_NEAR(rows[5].a_max, 675.2677270662758, 1e-6);
  std::ostringstream os;
  write_sweep_csv(rows, os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
            "param,value,a_min,a_max,empty,a,alpha,p,lhs,rhs,condition_pass,kappa,certified");
}

TEST(Sweep, EmptyRowsKept) {
  auto cfg = load_config(kConfigs / "sweep_cx.json");
  const auto rows = sweep(cfg, SweepSpec{SweepSpec::Variable::psi, 1.0, 100.0, 2});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].empty);
  EXPECT_TRUE(rows[1].empty);
  std::ostringstream os;
  write_sweep_csv(rows, os);
  EXPECT_NE(os.str().find("nan,nan,1,"), std::string::npos);
}

TEST(Sweep, VariableNames) {
  EXPECT_EQ(parse_sweep_variable("C_x"), SweepSpec::Variable::cx);
  EXPECT_EQ(parse_sweep_variable("alpha"), SweepSpec::Variable::alpha);
  EXPECT_THROW(parse_sweep_variable("beta"), ConfigError);
}
