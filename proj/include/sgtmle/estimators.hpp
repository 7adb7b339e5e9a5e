#pragma once

#include "sgtmle/hal.hpp"
#include "sgtmle/learners.hpp"
#include "sgtmle/trial_data.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace sgtmle {

struct EstimatorConfig {
  bool g_known = true;         // plug in g = 1/2; otherwise estimate by logistic CV
  int cv_folds = 3;
  std::uint64_t seed = 1;
  int atmle_loop_cap = 50;
  BasisSpec hal_screen{5, 1, 5};
  BasisSpec hal_fit{3, 1, 20};
  std::vector<LearnerKind> learners{LearnerKind::Mean, LearnerKind::GlmLogit,
                                    LearnerKind::LassoLogitInt2};
};

struct EstimateReport {
  std::string estimator;
  double psi_hat = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  Eigen::VectorXd eic_values;  // one per dataset row
  std::map<std::string, double> diagnostics;  // iterations, flags, eic_mean, ...
};

struct AtmleDecomposition {
  double psi_tilde = 0.0;
  double psi_pound = 0.0;
  double psi = 0.0;  // psi_tilde - psi_pound exactly
};

// H = (1/p_s) * (I(a=1)/g1 - I(a=0)/(1-g1))
double clever_covariate(double a, double g1, double p_s);

// epsilon* = Pn(H R) / Pn(H^2); throws on degenerate H
double closed_form_epsilon(const Eigen::VectorXd& H, const Eigen::VectorXd& R);

// se = sqrt(Pn[D^2] / n), ci = psi +/- 1.96 se
struct WaldInterval {
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool degenerate = false;  // all-zero influence values
};
WaldInterval eic_variance(const Eigen::VectorXd& eic_values, double psi);

// Deterministic fold ids stratified by the (s, a) cell and keyed to row content
// so fold membership survives row permutation.
std::vector<int> content_folds(const TrialDataset& data, int k, std::uint64_t seed);

EstimateReport unadjusted(const TrialDataset& data);
EstimateReport aipw_subgroup(const TrialDataset& data, const EstimatorConfig& config);
EstimateReport tmle_subgroup(const TrialDataset& data, const EstimatorConfig& config);
// pooled = false forces the initial regression onto S=1 rows, reducing the
// estimator to the subgroup-only TMLE
EstimateReport tmle_pr(const TrialDataset& data, const EstimatorConfig& config,
                       bool pooled = true);
std::pair<EstimateReport, AtmleDecomposition> atmle(const TrialDataset& data,
                                                    const EstimatorConfig& config);

// Dispatch by id: unadjusted | aipw | tmle | tmle_pr | atmle
EstimateReport run_estimator(const std::string& name, const TrialDataset& data,
                             const EstimatorConfig& config);
const std::vector<std::string>& estimator_names();

}  // namespace sgtmle
