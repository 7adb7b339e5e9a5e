#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace sgtmle {

// Discrete learner library used for every nuisance regression: constant mean,
// main-effect GLMs, and lasso on main effects plus pairwise interactions.
enum class LearnerKind {
  Mean,
  GlmLogit,
  GlmLinear,
  LassoLogit,
  LassoLinear,
  LassoLogitInt2,
  LassoLinearInt2,
};

LearnerKind learner_from_string(const std::string& id);
std::string learner_to_string(LearnerKind kind);
bool learner_is_logistic(LearnerKind kind);

struct FitModel {
  LearnerKind kind = LearnerKind::Mean;
  Eigen::VectorXd coef;      // [intercept, expanded features...]
  bool pairwise = false;     // expanded feature map includes pairwise products
  std::optional<double> trunc_delta;

  // Predictions on the raw feature matrix; logistic kinds return probabilities,
  // truncated to [delta, 1-delta] when a truncation policy is set.
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

FitModel fit_learner(LearnerKind kind, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const std::vector<int>& folds);

enum class CvLoss { log_likelihood, squared_error };

struct CvSelector {
  std::vector<LearnerKind> candidates;
  int folds = 3;
  CvLoss loss = CvLoss::log_likelihood;
};

struct CvResult {
  FitModel model;
  int selected = 0;                 // index into candidates
  std::vector<double> cv_losses;    // +inf for candidates that failed on a fold
};

// Deterministic fold ids in {0..K-1}, stratified by the (s, a) cell so every
// fold contains both arms.
std::vector<int> stratified_folds(const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                                  int k, std::uint64_t seed);

// Evaluates every candidate on identical fold splits; a candidate failing on a
// fold receives +inf loss. Ties break toward the earlier candidate. The winner
// is refit on the full sample.
CvResult cv_select(const CvSelector& selector, const Eigen::MatrixXd& X,
                   const Eigen::VectorXd& y, const std::vector<int>& folds);

// Clamp to [delta_n, 1 - delta_n] with delta_n = 5 / (sqrt(n) * ln n).
double truncate_probability(double p, long n);
double truncation_delta(long n);

// [X, x_i * x_j for i < j]
Eigen::MatrixXd expand_pairwise(const Eigen::MatrixXd& X);

}  // namespace sgtmle
