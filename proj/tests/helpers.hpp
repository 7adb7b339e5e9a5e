#pragma once

#include "sgtmle/trial_data.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

namespace testutil {

inline sgtmle::TrialDataset make_dataset(const std::vector<double>& s,
                                         const std::vector<double>& a,
                                         const std::vector<double>& y,
                                         const Eigen::MatrixXd& w) {
  sgtmle::TrialDataset d;
  const auto n = static_cast<Eigen::Index>(s.size());
  d.s = Eigen::Map<const Eigen::VectorXd>(s.data(), n);
  d.a = Eigen::Map<const Eigen::VectorXd>(a.data(), n);
  d.y = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  d.w = w;
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    d.covariate_names.push_back("W" + std::to_string(j + 1));
  return d;
}

// small logistic-outcome trial with one continuous and one binary covariate
inline sgtmle::TrialDataset random_trial(Eigen::Index n, std::uint64_t seed,
                                         double p_s = 0.4) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif;
  sgtmle::TrialDataset d;
  d.s.resize(n);
  d.a.resize(n);
  d.y.resize(n);
  d.w.resize(n, 2);
  d.covariate_names = {"W1", "W2"};
  for (Eigen::Index i = 0; i < n; ++i) {
    d.w(i, 0) = gauss(rng);
    d.w(i, 1) = unif(rng) < 0.5 ? 1.0 : 0.0;
    d.s[i] = unif(rng) < p_s ? 1.0 : 0.0;
    d.a[i] = unif(rng) < 0.5 ? 1.0 : 0.0;
    const double lp = -0.8 + 0.7 * d.w(i, 0) - 0.4 * d.w(i, 1) + 0.5 * d.a[i] -
                      0.6 * d.a[i] * d.s[i];
    const double p = 1.0 / (1.0 + std::exp(-lp));
    d.y[i] = unif(rng) < p ? 1.0 : 0.0;
  }
  // guarantee both arms in both strata for small n
  d.a[0] = 1.0; d.s[0] = 1.0;
  d.a[1] = 0.0; d.s[1] = 1.0;
  d.a[2] = 1.0; d.s[2] = 0.0;
  d.a[3] = 0.0; d.s[3] = 0.0;
  return d;
}

}  // namespace testutil
