#pragma once

#include <Eigen/Dense>
#include <vector>

namespace sgtmle {

enum class Family { gaussian, binomial };

struct LassoPath {
  std::vector<double> lambdas;             // descending
  std::vector<double> intercepts;          // per lambda
  std::vector<Eigen::VectorXd> coefs;      // per lambda, original column scale
  std::vector<double> kkt_residuals;       // per lambda, standardized scale
  bool converged = true;
};

// Smallest lambda at which every penalized coefficient is zero. Residuals are
// taken after fitting intercept plus any unpenalized columns.
double lasso_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Family family,
                        const std::vector<int>& unpenalized = {},
                        const Eigen::VectorXd* weights = nullptr);

std::vector<double> lambda_path(double lambda_max, int n_points = 100,
                                double min_ratio = 1e-3);

// Pathwise cyclic coordinate descent on internally standardized columns with
// warm starts and active-set iterations. Objective per lambda:
//   (1/2n) sum_i w_i (loss_i) + lambda * sum_{j penalized} |beta_j|
// with the binomial family handled by IRLS-reweighted quadratic approximations.
LassoPath fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const std::vector<double>& lambdas, Family family,
                    const std::vector<int>& unpenalized = {},
                    const Eigen::VectorXd* weights = nullptr, double tol = 1e-7);

// Max-abs violation of the subgradient stationarity conditions at (b0, beta),
// evaluated on the standardized problem.
double lasso_kkt_residual(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          double intercept, const Eigen::VectorXd& beta, double lambda,
                          Family family, const std::vector<int>& unpenalized = {},
                          const Eigen::VectorXd* weights = nullptr);

}  // namespace sgtmle
