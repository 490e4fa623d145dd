#pragma once

// Experiment configuration and the certify / simulate / sweep commands.
//
// Exit codes: 0 success or certified, 1 a condition failed, 2 usage or
// configuration error.

#include <funnel/certifier.hpp>
#include <funnel/ensemble_sim.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace funnel {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConditionFailed = 1;
inline constexpr int kExitUsage = 2;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepSpec {
  enum class Variable { cx, a, alpha, psi };
  Variable variable = Variable::cx;
  double from = 1.0;
  double to = 2.0;
  int points = 11;

  double value(int k) const { return points == 1 ? from : from + (to - from) * k / (points - 1); }
};

/// Parses "C_x", "a", "alpha" or "psi".
SweepSpec::Variable parse_sweep_variable(const std::string& name);
const char* sweep_variable_name(SweepSpec::Variable v);

struct ExperimentConfig {
  std::string source;
  PotentialModel potential = PotentialModel::zero(1);
  std::optional<double> c3;
  Mat A;
  double a = 0.0;
  std::optional<double> alpha;  // nullopt: solve from p
  double p = 0.5;
  FunnelSpec funnel = FunnelSpec::constant(1.0);
  ReferenceSignal reference = ReferenceSignal::zero(1);
  SimConfig sim;
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path output_dir = "out";
  bool write_csv = true;
  std::string report_format = "text";
  std::optional<SweepSpec> sweep;
};

/// Throws ConfigError with line:column for syntax errors and the offending
/// key path for semantic ones.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Certificate for the configured setting.
CertificateReport certify_config(const ExperimentConfig& cfg, bool compute_interval = true);

/// Controller with alpha resolved (solved from the certificate if requested).
ControllerConfig resolve_controller(const ExperimentConfig& cfg, const CertificateReport& report);

struct RunSummary {
  std::uint64_t seed = 0;
  double max_error = 0.0;
  double min_margin = 0.0;  // min over t of psi - |e|
  double max_weighted_control = 0.0;  // max over t of |A u|
  long funnel_exits = 0;
  std::size_t rows = 0;
  bool aborted = false;
  double wall_seconds = 0.0;  // not re-derivable from the CSV
};

/// Aggregates derived only from fields that are written to the CSV.
RunSummary summarize(const SimulationRecord& record, std::uint64_t seed);

/// Reads a record back from its CSV. Throws ConfigError on schema mismatch.
SimulationRecord read_csv(std::istream& is);

struct CommandOptions {
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::vector<std::uint64_t>> seeds;
  bool quiet = false;
  bool report_only = false;       // certify: always exit 0
  bool integer_endpoints = false; // certify: floor/ceil interval endpoints
  std::optional<SweepSpec> sweep;
  unsigned workers = 0;           // 0: hardware concurrency
};

void print_certificate(const CertificateReport& report, std::ostream& os, bool integer_endpoints = false);

int cmd_certify(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out);

struct SimulateResult {
  CertificateReport certificate;
  std::vector<RunSummary> summaries;
  std::vector<std::filesystem::path> csv_files;
  std::vector<std::string> warnings;
  int exit_code = kExitOk;
};

SimulateResult simulate(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out);
int cmd_simulate(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out);

struct SweepRow {
  std::string param;
  double value = 0.0;
  bool empty = true;
  double a_min = 0.0;
  double a_max = 0.0;
  double a = 0.0;
  double alpha = 0.0;
  double p = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool condition_pass = false;
  double kappa = 0.0;
  bool certified = false;
};

std::vector<SweepRow> sweep(const ExperimentConfig& cfg, const SweepSpec& spec, unsigned workers = 0);
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os);
int cmd_sweep(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out);

}  // namespace funnel
