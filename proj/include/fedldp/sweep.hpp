#ifndef FEDLDP_SWEEP_HPP
#define FEDLDP_SWEEP_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fedldp/oracles.hpp"

namespace fedldp {

/// One sweep definition: dataset, privacy grid, algorithm list, tuning grids.
/// Algorithms are "driver:privacy" strings, e.g. "mbsgd:ldp",
/// "mbsgd:nonprivate", "local-sgd:ldp", "acsa:ldp", "mbsgd:sdp".
struct ExperimentConfig {
  std::string dataset = "synthetic-quadratic";
  int N = 4;
  int n = 200;          // per-client samples (synthetic)
  int d = 5;            // dimension (synthetic)
  double D = 5.0;       // constraint-ball radius
  double hetero = 0.5;  // synthetic client spread
  int M = 0;            // active clients per round; 0 means all N
  int R = 20;
  int local_steps = 4;  // local-sgd only
  std::vector<double> eps_grid = {0.5, 1.0, 2.0, 4.0, 8.0};
  std::string delta_rule = "1/n^2";
  std::vector<std::string> algorithms = {"mbsgd:ldp", "mbsgd:nonprivate"};
  std::vector<double> stepsizes;    // empty: 10 log-spaced points in [e^-6, 1]
  std::vector<double> clip_grid;    // empty: no clipping
  int trials = 3;
  int tune_reps = 3;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string data_dir;  // defaults to $FEDLDP_DATA_DIR

  void validate() const;
};

ExperimentConfig config_from_json_file(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);

/// delta as a formula over n; supported rules: "1/n^2", "1/n", or a literal.
double delta_from_rule(const std::string& rule, int n);

struct SweepRow {
  double epsilon = 0.0;
  std::string algorithm;
  double mean_test_error = 0.0;
  double p5 = 0.0;
  double p95 = 0.0;
};

/// Runs the sweep with a deterministic worker pool; identical config + seed
/// give identical rows for any worker count.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config);

void write_sweep_csv(const std::vector<SweepRow>& rows, const ExperimentConfig& config,
                     std::ostream& out);
void write_sweep_svg(const std::vector<SweepRow>& rows, std::ostream& out);

/// Log-log regression slope of the noiseless accelerated-run error on a 20-D
/// ill-conditioned least-squares problem (eigenvalues log-spaced 1..1e-6), so
/// the O(1/R^2) envelope governs the whole measured range. Expected ~ -2.
double acsa_loglog_slope(const std::vector<int>& rounds);

/// Full oracle/invariant suite behind the `verify` subcommand. `only` filters
/// by report-name substring; fault_sigma_half halves sigma^2 inside the
/// calibration-equality check (test hook for the fault-injection contract).
std::vector<OracleReport> verification_suite(const std::optional<std::string>& only,
                                             bool fault_sigma_half = false);

void write_reports_csv(const std::vector<OracleReport>& reports, std::ostream& out);
void write_reports_table(const std::vector<OracleReport>& reports, std::ostream& out);

}  // namespace fedldp

#endif
