#pragma once

#include "sgtmle/dgp.hpp"
#include "sgtmle/estimators.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sgtmle {

// Full run configuration with sections dgp / subgroup / hal / learners /
// estimators / bench, serialized as JSON. Unknown keys are rejected with the
// offending key path.
struct RunConfig {
  // dgp
  int scenario = 1;
  CopulaSpec copula;
  ScenarioSpec scenario_spec;          // eta == 0 means calibrate
  long calibration_mc = 1000000;
  // subgroup
  SubgroupModel subgroup;
  std::optional<double> alpha0;        // absent means calibrate
  double target_prevalence = 920.0 / 9340.0;
  // hal
  BasisSpec hal_screen{5, 1, 5};
  BasisSpec hal_fit{3, 1, 20};
  // learners
  std::vector<LearnerKind> learners{LearnerKind::Mean, LearnerKind::GlmLogit,
                                    LearnerKind::LassoLogitInt2};
  int cv_folds = 3;
  // estimators
  std::vector<std::string> estimators{"unadjusted", "aipw", "tmle", "tmle_pr", "atmle"};
  bool g_known = true;
  int atmle_loop_cap = 50;
  std::uint64_t seed = 1;
  // bench
  long bench_n = 2000;
  long bench_reps = 500;
  long truth_mc = 1000000;
};

RunConfig default_config();
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string config_to_json(const RunConfig& config);

// Materialized generator with alpha0 / eta calibrated when unset.
struct PreparedDgp {
  CopulaSpec copula;
  SubgroupModel subgroup;
  ScenarioSpec spec;
};
PreparedDgp prepare_dgp(const RunConfig& config);

EstimatorConfig estimator_config(const RunConfig& config);

}  // namespace sgtmle
