#pragma once

#include "sgtmle/config.hpp"

#include <string>
#include <vector>

namespace sgtmle {

struct MetricsRow {
  int scenario = 0;
  std::string estimator;
  double abs_bias = 0.0;
  double empirical_se = 0.0;
  double mse = 0.0;
  double coverage = 0.0;
  double oracle_coverage = 0.0;
  long reps_used = 0;
  long reps_failed = 0;
};

struct BenchResult {
  std::vector<MetricsRow> rows;
  double psi_true = 0.0;
  double truth_mc_se = 0.0;
  double eta = 0.0;
  double alpha0 = 0.0;
  long reps = 0;
  std::string manifest;  // JSON run record: config hash, seed, truth, failures
};

// Runs bench_reps replications of size bench_n, applying every configured
// estimator to the same simulated datasets. Replication r uses seed streams
// keyed by (seed, r), so metrics do not depend on the thread schedule. A
// failing estimator invocation is excluded and counted; more than 5% failures
// for any estimator aborts the run.
BenchResult run_benchmark(const RunConfig& config, int threads = 1);

std::string report_csv(const std::vector<MetricsRow>& rows);
std::string report_markdown(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_metrics_csv(const std::string& text);

// Memoized (alpha0, eta, psi_true) for a config's generator sections, keyed by
// their serialized form, so repeated benchmark runs skip recalibration.
struct TruthRecord {
  double alpha0 = 0.0;
  double eta = 0.0;
  double psi_true = 0.0;
  double mc_se = 0.0;
};
TruthRecord cached_truth(const RunConfig& config);

}  // namespace sgtmle
