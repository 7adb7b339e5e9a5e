#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace sgtmle {

struct GlmFit {
  Eigen::VectorXd coef;    // includes intercept as component 0 when fit with one
  bool converged = false;
  int iterations = 0;
  double max_score = 0.0;  // max-abs weighted score at the returned coefficients
};

struct SeparationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Weighted logistic MLE by Newton/IRLS on the design X (caller supplies the
// intercept column). Converges when the max-abs score drops below 1e-10 or the
// relative log-likelihood change drops below 1e-12; 100 iteration cap.
// Perfect separation is detected via a diverging coefficient norm and thrown.
GlmFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const Eigen::VectorXd* offset = nullptr,
                    const Eigen::VectorXd* weights = nullptr);

// Weighted least squares, normal equations with a tiny ridge fallback on
// rank-deficient designs.
GlmFit fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const Eigen::VectorXd* offset = nullptr,
                  const Eigen::VectorXd* weights = nullptr);

inline double expit(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace sgtmle
