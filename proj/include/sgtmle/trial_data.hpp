#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace sgtmle {

// One trial sample stored column-wise: subgroup indicator s, covariates w,
// randomized arm a, bounded outcome y. Immutable after construction.
struct TrialDataset {
  Eigen::VectorXd s;  // 0/1
  Eigen::MatrixXd w;  // n x d
  Eigen::VectorXd a;  // 0/1
  Eigen::VectorXd y;  // [0,1]
  std::vector<std::string> covariate_names;

  Eigen::Index n() const { return s.size(); }
  Eigen::Index dim() const { return w.cols(); }
};

struct SubgroupCounts {
  long n = 0;
  long n1 = 0;  // rows with s == 1
  long n0 = 0;
  double p_s = 0.0;  // n1 / n
};

// Throws std::runtime_error with a row/column description on the first
// violated invariant (s,a in {0,1}; y in [0,1]; finite w; both arms present;
// n >= 20).
void validate(const TrialDataset& data, bool require_both_strata = false);

// CSV with mandatory columns S, A, Y (case-insensitive); remaining columns are
// covariates in file order.
TrialDataset load_csv(const std::string& path);
TrialDataset parse_csv(const std::string& text, const std::string& origin = "<string>");
std::string to_csv(const TrialDataset& data);
void write_csv(const TrialDataset& data, const std::string& path);

SubgroupCounts subgroup_counts(const TrialDataset& data);

// Rows with s == 1, preserving order.
TrialDataset subgroup_rows(const TrialDataset& data);

}  // namespace sgtmle
