// funnelctl: certify, simulate and sweep funnel-controlled Langevin ensembles.
//
//   funnelctl certify  --config FILE [--out DIR] [--report-only] [--integer-endpoints]
//   funnelctl simulate --config FILE [--out DIR] [--seeds 1,2,3] [--workers N]
//   funnelctl sweep    --config FILE [--var C_x --from 1 --to 2 --points 11]

#include <funnel/experiment.hpp>

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace funnel;
  CLI::App app{"Funnel-controlled Langevin dynamics: certification and ensemble simulation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  CommandOptions opts;
  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--out", out_dir, "output directory (overrides output.directory)");
    sub->add_flag("-q,--quiet", opts.quiet, "do not print the report");
    sub->add_option("-j,--workers", opts.workers, "worker threads (0: all cores)");
  };

  auto* certify_cmd = app.add_subcommand("certify", "check the feasibility conditions");
  common(certify_cmd);
  certify_cmd->add_flag("--report-only", opts.report_only, "exit 0 even when a condition fails");
  certify_cmd->add_flag("--integer-endpoints", opts.integer_endpoints, "print ceil(a_min), floor(a_max)");

  std::vector<std::uint64_t> seeds;
  auto* simulate_cmd = app.add_subcommand("simulate", "run the ensemble for each seed");
  common(simulate_cmd);
  simulate_cmd->add_option("--seeds", seeds, "seeds (overrides simulation.seeds)")->delimiter(',');

  std::string var;
  double from = 0.0;
  double to = 0.0;
  int points = 0;
  auto* sweep_cmd = app.add_subcommand("sweep", "certify over a parameter range");
  common(sweep_cmd);
  auto* var_opt = sweep_cmd->add_option("--var", var, "C_x, a, alpha or psi");
  auto* from_opt = sweep_cmd->add_option("--from", from);
  auto* to_opt = sweep_cmd->add_option("--to", to);
  auto* points_opt = sweep_cmd->add_option("--points", points)->check(CLI::PositiveNumber);
  var_opt->needs(from_opt, to_opt, points_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    const ExperimentConfig cfg = load_config(config_path);
    if (!out_dir.empty()) opts.out_dir = out_dir;
    if (!seeds.empty()) opts.seeds = seeds;
    if (*certify_cmd) return cmd_certify(cfg, opts, std::cout);
    if (*simulate_cmd) return cmd_simulate(cfg, opts, std::cout);
    if (!var.empty()) opts.sweep = SweepSpec{parse_sweep_variable(var), from, to, points};
    return cmd_sweep(cfg, opts, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}
